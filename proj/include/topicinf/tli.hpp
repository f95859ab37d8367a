#pragma once

// Thresholded linear inverse: x_hat = B y / n, then coordinates below a
// cutoff are zeroed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "topicinf/core.hpp"
#include "topicinf/error.hpp"

namespace topicinf {

enum class ThresholdMode { theoretical, scaled, top_r };

inline const char* to_string(ThresholdMode m) noexcept {
  switch (m) {
    case ThresholdMode::theoretical: return "theoretical";
    case ThresholdMode::scaled: return "scaled";
    case ThresholdMode::top_r: return "top_r";
  }
  return "unknown";
}

inline ThresholdMode parse_threshold_mode(std::string_view s) {
  if (s == "theoretical") return ThresholdMode::theoretical;
  if (s == "scaled") return ThresholdMode::scaled;
  if (s == "top_r" || s == "top-r") return ThresholdMode::top_r;
  throw ValidationError("unknown threshold mode '" + std::string(s) + "' (theoretical, scaled, top_r)");
}

struct TLIOptions {
  ThresholdMode mode = ThresholdMode::theoretical;
  double scale_divisor = 4.5;
  std::size_t r = 0;  // top_r mode only
  bool normalize = false;
  /// Override the inverse's own bias level / max entry in the cutoff; by
  /// default the cutoff uses B.delta() and the achieved max |B_ij|.
  std::optional<double> delta;
  std::optional<double> lambda_delta;
};

/// 2 lambda sqrt(ln k / n) + delta.
inline double threshold_value(double lambda_delta, double delta, std::size_t k, std::size_t n) {
  if (n < 1) throw ValidationError("document length must be >= 1");
  if (k < 2) throw ValidationError("threshold needs k >= 2");
  return 2.0 * lambda_delta * std::sqrt(std::log(static_cast<double>(k)) / static_cast<double>(n)) + delta;
}

struct TLIResult {
  TopicVector raw;
  TopicVector thresholded;
  double cutoff = 0.0;  // unused (0) in top_r mode
};

/// B y / n accumulated over the document's distinct words.
inline std::vector<double> linear_inverse_estimate(const LinearInverse& B, const SparseDocument& y) {
  y.check_vocab(B.vocab_size());
  const std::size_t k = B.topics();
  const auto& M = B.matrix();
  std::vector<double> raw(k, 0.0);
  for (const auto& [word, count] : y.entries()) {
    const auto c = static_cast<double>(count);
    for (std::size_t i = 0; i < k; ++i) raw[i] += c * M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(word));
  }
  const auto n = static_cast<double>(y.length());
  for (auto& v : raw) v /= n;
  return raw;
}

/// Indices of the r largest values; ties keep the lower index.
inline std::vector<std::size_t> top_indices(std::span<const double> values, std::size_t r) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  r = std::min(r, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(r), idx.end(),
                    [&](std::size_t a, std::size_t b) { return values[a] > values[b] || (values[a] == values[b] && a < b); });
  idx.resize(r);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline TLIResult tli_estimate(const LinearInverse& B, const SparseDocument& y, const TLIOptions& opts) {
  const std::size_t k = B.topics();
  if (!(opts.scale_divisor > 0.0)) throw ValidationError("scale divisor must be positive");
  if (opts.mode == ThresholdMode::top_r && opts.r < 1) throw ValidationError("top_r mode needs r >= 1");

  std::vector<double> raw = linear_inverse_estimate(B, y);
  std::vector<double> kept(k, 0.0);
  double cutoff = 0.0;
  if (opts.mode == ThresholdMode::top_r) {
    // Negative values never survive, matching the signed comparison of the other modes.
    for (std::size_t i : top_indices(raw, opts.r)) kept[i] = std::max(raw[i], 0.0);
  } else {
    const double lambda = opts.lambda_delta.value_or(B.lambda_delta());
    const double delta = opts.delta.value_or(B.delta());
    cutoff = threshold_value(lambda, delta, k, y.length());
    if (opts.mode == ThresholdMode::scaled) cutoff /= opts.scale_divisor;
    for (std::size_t i = 0; i < k; ++i) kept[i] = raw[i] < cutoff ? 0.0 : raw[i];
  }

  TLIResult out{TopicVector::raw(std::move(raw)), TopicVector::raw({}), cutoff};
  if (!opts.normalize) {
    out.thresholded = TopicVector::raw(std::move(kept));
    return out;
  }
  double total = 0.0;
  for (auto& v : kept) total += (v = std::max(v, 0.0));
  if (!(total > 0.0)) throw NumericalError("every coordinate fell below the threshold; cannot normalize");
  for (auto& v : kept) v /= total;
  out.thresholded = TopicVector::simplex_point(std::move(kept));
  return out;
}

}  // namespace topicinf
