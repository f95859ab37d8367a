#pragma once

// Collapsed Gibbs sampler for the topic proportions of one document with
// the word-topic matrix held fixed. Token j of word w is resampled from
//
//     p(z_j = t | z_-j) ∝ A[w, t] (c_-j,t + alpha),
//
// and each sweep reports (c_t + alpha) / (n + k alpha). Tokens are visited
// in increasing word-id order.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "topicinf/core.hpp"
#include "topicinf/error.hpp"
#include "topicinf/rng.hpp"

namespace topicinf {

struct GibbsConfig {
  double alpha = 0.0;  // must be set; the usual choice is r / k
  std::size_t burnin = 200;
  std::size_t samples = 1000;
  std::size_t thin = 1;
  std::uint64_t seed = 0;
};

struct GibbsTrace {
  std::size_t topics = 0;
  std::vector<std::vector<std::size_t>> counts;  // per retained sweep
  std::vector<std::vector<double>> estimates;    // per retained sweep
  std::vector<double> mean;

  TopicVector mean_estimate() const { return TopicVector::simplex_point(mean); }
};

namespace detail {

inline void validate(const GibbsConfig& cfg) {
  if (!(cfg.alpha > 0.0) || !std::isfinite(cfg.alpha)) throw ValidationError("Gibbs alpha must be positive");
  if (cfg.burnin < 1 || cfg.samples < 1 || cfg.thin < 1) {
    throw ValidationError("Gibbs burnin, samples and thin must all be >= 1");
  }
}

}  // namespace detail

/// Runs burnin + samples * thin sweeps and keeps every thin-th post-burnin sweep.
inline GibbsTrace gibbs_infer(const TopicMatrix& A, const SparseDocument& y, const GibbsConfig& cfg) {
  detail::validate(cfg);
  y.check_vocab(A.vocab_size());
  const std::size_t k = A.topics();
  for (const auto& wc : y.entries()) {
    const auto a = A.row(wc.word);
    bool any = false;
    for (double v : a) any = any || v > 0.0;
    if (!any) throw ValidationError("word " + std::to_string(wc.word) + " has zero probability under every topic");
  }

  std::vector<std::size_t> tokens;
  tokens.reserve(y.length());
  for (const auto& [word, count] : y.entries()) tokens.insert(tokens.end(), count, word);
  const std::size_t n = tokens.size();

  Rng rng(cfg.seed, "gibbs");
  std::vector<std::size_t> z(n);
  std::vector<std::size_t> c(k, 0);
  std::vector<double> cumulative(k);
  auto draw = [&](std::size_t word, bool with_counts) {
    const auto a = A.row(word);
    double total = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
      total += a[t] * (with_counts ? static_cast<double>(c[t]) + cfg.alpha : 1.0);
      cumulative[t] = total;
    }
    return sample_cumulative(cumulative, rng.uniform());
  };
  for (std::size_t j = 0; j < n; ++j) ++c[z[j] = draw(tokens[j], false)];

  GibbsTrace trace;
  trace.topics = k;
  trace.mean.assign(k, 0.0);
  const double denom = static_cast<double>(n) + static_cast<double>(k) * cfg.alpha;
  const std::size_t sweeps = cfg.burnin + cfg.samples * cfg.thin;
  for (std::size_t s = 1; s <= sweeps; ++s) {
    for (std::size_t j = 0; j < n; ++j) {
      --c[z[j]];
      ++c[z[j] = draw(tokens[j], true)];
    }
    if (s <= cfg.burnin || (s - cfg.burnin) % cfg.thin != 0) continue;
    std::vector<double> est(k);
    for (std::size_t t = 0; t < k; ++t) est[t] = (static_cast<double>(c[t]) + cfg.alpha) / denom;
    for (std::size_t t = 0; t < k; ++t) trace.mean[t] += est[t];
    trace.counts.push_back(c);
    trace.estimates.push_back(std::move(est));
  }
  for (auto& m : trace.mean) m /= static_cast<double>(trace.estimates.size());
  return trace;
}

/// Fraction of retained sweep estimates within l1 distance eps of center.
inline double posterior_concentration(const GibbsTrace& trace, std::span<const double> center, double eps) {
  if (trace.estimates.empty()) throw ValidationError("trace has no retained sweeps");
  if (!(eps >= 0.0)) throw ValidationError("radius must be nonnegative");
  if (center.size() != trace.topics) throw ValidationError("center length does not match topic count");
  std::size_t inside = 0;
  for (const auto& e : trace.estimates) {
    if (l1_distance(e, center) <= eps) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(trace.estimates.size());
}

}  // namespace topicinf
