#pragma once

// Generators for topic vectors, documents and the random half-support
// matrices, plus divergences between word distributions.
//
// Every generator is a pure function of its parameters and seed. Seeds are
// split into named streams with derive_seed(seed, name, indices), so e.g.
// column j of a hard matrix depends only on (seed, j).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "topicinf/core.hpp"
#include "topicinf/error.hpp"
#include "topicinf/rng.hpp"

namespace topicinf {

/// Uniform random r-subset of topics with weights drawn uniformly from the r-simplex.
inline TopicVector gen_uniform_sparse_x(std::size_t k, std::size_t r, std::uint64_t seed) {
  if (r < 1 || r > k) throw ValidationError("sparsity r must satisfy 1 <= r <= k");
  Rng rng(seed, "uniform-sparse-x");
  auto support = sample_without_replacement(rng, k, r);
  std::sort(support.begin(), support.end());
  std::vector<double> weights(r);
  double total = 0.0;
  for (auto& w : weights) total += (w = rng.exponential());
  std::vector<double> x(k, 0.0);
  for (std::size_t i = 0; i < r; ++i) x[support[i]] = weights[i] / total;
  return TopicVector::simplex_point(std::move(x));
}

/// Symmetric Dirichlet(alpha) sample, normalized in log space so tiny alphas do not underflow.
inline TopicVector gen_dirichlet_x(std::size_t k, double alpha, std::uint64_t seed) {
  if (k < 1) throw ValidationError("k must be >= 1");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValidationError("Dirichlet alpha must be positive");
  Rng rng(seed, "dirichlet-x");
  std::vector<double> logs(k);
  for (auto& l : logs) l = rng.log_gamma_variate(alpha);
  const double top = *std::max_element(logs.begin(), logs.end());
  std::vector<double> x(k);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) total += (x[i] = std::exp(logs[i] - top));
  for (auto& v : x) v /= total;
  return TopicVector::simplex_point(std::move(x));
}

/// n i.i.d. words from the categorical distribution A x.
inline SparseDocument gen_document(const TopicMatrix& A, const TopicVector& x, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("document length must be >= 1");
  if (x.size() != A.topics()) throw ValidationError("topic vector length does not match topic count");
  const std::vector<double> p = A.apply(x.values());
  std::vector<double> cumulative(p.size());
  double total = 0.0;
  for (std::size_t w = 0; w < p.size(); ++w) {
    if (p[w] < 0.0) throw ValidationError("A x has a negative entry at word " + std::to_string(w));
    cumulative[w] = (total += p[w]);
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("A x sums to " + std::to_string(total) + ", not 1");

  Rng rng(seed, "document");
  std::vector<std::size_t> counts(p.size(), 0);
  for (std::size_t t = 0; t < n; ++t) ++counts[sample_cumulative(cumulative, rng.uniform())];
  return SparseDocument::from_dense(counts);
}

/// Random half-support matrix: column j is uniform on a random word subset S_j.
struct HardInstance {
  TopicMatrix A;
  std::vector<std::vector<std::size_t>> supports;  // S_j in increasing order
  RowMatrix B_explicit;                            // k x D, +1 on S_j and -1 elsewhere
};

inline HardInstance gen_hard_matrix(std::size_t D, std::size_t k, std::uint64_t seed) {
  if (D < 2 || k < 1) throw ValidationError("hard instance needs D >= 2 and k >= 1");
  if (k > D) throw ValidationError("hard instance needs k <= D");
  std::vector<std::vector<std::size_t>> supports(k);
  RowMatrix dense = RowMatrix::Zero(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(k));
  RowMatrix signs = RowMatrix::Constant(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(D), -1.0);
  for (std::size_t j = 0; j < k; ++j) {
    Rng rng(seed, "hard-matrix-column", {j});
    auto& S = supports[j];
    while (S.empty()) {
      for (std::size_t w = 0; w < D; ++w) {
        if (rng.coin()) S.push_back(w);
      }
    }
    const double mass = 1.0 / static_cast<double>(S.size());
    for (std::size_t w : S) {
      dense(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(j)) = mass;
      signs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(w)) = 1.0;
    }
  }
  return {TopicMatrix(std::move(dense)), std::move(supports), std::move(signs)};
}

/// max |B_explicit A - I|, the bias of the ±1 inverse.
inline double explicit_inverse_bias(const HardInstance& h) {
  Eigen::MatrixXd BA = h.B_explicit * h.A.dense();
  BA -= Eigen::MatrixXd::Identity(BA.rows(), BA.cols());
  return BA.cwiseAbs().maxCoeff();
}

namespace detail {

inline void check_distribution(std::span<const double> p, const char* name) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(std::string(name) + " has a negative or non-finite entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError(std::string(name) + " sums to " + std::to_string(total));
}

}  // namespace detail

/// sum_i (p_i - q_i)^2 / q_i; infinite when some q_i = 0 < p_i.
inline double chi_square(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ValidationError("distributions have different lengths");
  detail::check_distribution(p, "p");
  detail::check_distribution(q, "q");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (q[i] == 0.0) {
      if (p[i] != 0.0) return std::numeric_limits<double>::infinity();
      continue;
    }
    const double d = p[i] - q[i];
    s += d * d / q[i];
  }
  return s;
}

/// KL(p || q) in nats; infinite when some q_i = 0 < p_i.
inline double kl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ValidationError("distributions have different lengths");
  detail::check_distribution(p, "p");
  detail::check_distribution(q, "q");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) return std::numeric_limits<double>::infinity();
    s += p[i] * std::log(p[i] / q[i]);
  }
  return s;
}

/// Uniform vectors on nested supports R (size r) and R minus one topic.
struct IndistinguishablePair {
  TopicVector x;
  TopicVector x_minus;
  std::vector<std::size_t> support;  // R, increasing
  std::size_t removed = 0;
  double chi_square = 0.0;  // between A x and A x_minus
  double kl = 0.0;
  /// Same divergences after conditioning both word distributions on
  /// balanced words: those with between r/4 and 3r/4 of the remaining
  /// r - 1 topics active. Unconditioned divergences are infinite whenever
  /// some word is active only under the removed topic.
  double balanced_chi_square = 0.0;
  double balanced_kl = 0.0;
  double balanced_mass = 0.0;  // probability of a balanced word under A x
};

inline IndistinguishablePair gen_indistinguishable_pair(const TopicMatrix& A, std::size_t r, std::uint64_t seed) {
  const std::size_t k = A.topics();
  if (r < 2 || r > k) throw ValidationError("pair needs 2 <= r <= k");
  Rng rng(seed, "indistinguishable-pair");
  auto R = sample_without_replacement(rng, k, r);
  const std::size_t removed = R[static_cast<std::size_t>(rng.below(r))];
  std::sort(R.begin(), R.end());

  std::vector<double> x(k, 0.0), xm(k, 0.0);
  for (std::size_t j : R) {
    x[j] = 1.0 / static_cast<double>(r);
    if (j != removed) xm[j] = 1.0 / static_cast<double>(r - 1);
  }
  IndistinguishablePair out{TopicVector::simplex_point(x), TopicVector::simplex_point(xm), R, removed};
  const std::vector<double> p = A.apply(x);
  const std::vector<double> q = A.apply(xm);
  out.chi_square = chi_square(p, q);
  out.kl = kl(p, q);

  const double low = static_cast<double>(r) / 4.0;
  const double high = 3.0 * static_cast<double>(r) / 4.0;
  std::vector<double> pb(p.size(), 0.0), qb(q.size(), 0.0);
  double p_mass = 0.0, q_mass = 0.0;
  for (std::size_t w = 0; w < p.size(); ++w) {
    std::size_t active = 0;
    for (std::size_t j : R) {
      if (j != removed && A(w, j) > 0.0) ++active;
    }
    const auto a = static_cast<double>(active);
    if (a < low || a > high) continue;
    pb[w] = p[w];
    qb[w] = q[w];
    p_mass += p[w];
    q_mass += q[w];
  }
  out.balanced_mass = p_mass;
  if (p_mass > 0.0 && q_mass > 0.0) {
    for (auto& v : pb) v /= p_mass;
    for (auto& v : qb) v /= q_mass;
    out.balanced_chi_square = chi_square(pb, qb);
    out.balanced_kl = kl(pb, qb);
  } else {
    out.balanced_chi_square = std::numeric_limits<double>::infinity();
    out.balanced_kl = std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace topicinf
