#pragma once

// Likelihood refinement on a fixed support R (|R| = r):
//
//     f(x) = sum_w y_w log <a_w, x>   (+ (alpha - 1) sum_i log x_i for MAP)
//
// maximized over the r-simplex by projected gradient ascent, plus the
// expected and empirical Fisher matrices
//
//     Q     = sum_w a_w a_w^T / <a_w, x>
//     Q_hat = (1/n) sum_w y_w a_w a_w^T / <a_w, x>^2 = -(1/n) Hessian of the likelihood.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "topicinf/core.hpp"
#include "topicinf/error.hpp"

namespace topicinf {

/// A document paired with a support restriction (and optionally a Dirichlet prior).
class LikelihoodProblem {
 public:
  LikelihoodProblem(const SupportRestriction& restriction, const SparseDocument& doc,
                    std::optional<double> prior_alpha = std::nullopt)
      : restriction_(&restriction), alpha_(prior_alpha) {
    doc.check_vocab(restriction.vocab_size());
    if (alpha_ && !(*alpha_ > 0.0)) throw ValidationError("Dirichlet alpha must be positive");
    for (const auto& wc : doc.entries()) {
      const auto row = restriction.row(wc.word);
      if (std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; })) {
        excluded_.push_back(wc.word);
        continue;
      }
      words_.push_back(wc);
      length_ += wc.count;
    }
  }

  const SupportRestriction& restriction() const noexcept { return *restriction_; }
  std::size_t size() const noexcept { return restriction_->size(); }
  const std::optional<double>& prior_alpha() const noexcept { return alpha_; }
  /// Words used in the likelihood and their total count.
  const std::vector<WordCount>& words() const noexcept { return words_; }
  std::size_t length() const noexcept { return length_; }
  /// Words whose restricted profile is zero: impossible under this support, left out.
  const std::vector<std::size_t>& excluded_words() const noexcept { return excluded_; }

  double inner(std::size_t word, std::span<const double> x) const noexcept {
    const auto a = restriction_->row(word);
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * x[j];
    return s;
  }

 private:
  const SupportRestriction* restriction_;
  std::optional<double> alpha_;
  std::vector<WordCount> words_;
  std::vector<std::size_t> excluded_;
  std::size_t length_ = 0;
};

namespace detail {

inline void check_point(const LikelihoodProblem& p, std::span<const double> x) {
  if (x.size() != p.size()) throw ValidationError("point has length " + std::to_string(x.size()) + ", support has " +
                                                  std::to_string(p.size()));
}

inline bool use_prior(const LikelihoodProblem& p) { return p.prior_alpha() && *p.prior_alpha() != 1.0; }

}  // namespace detail

/// Log-likelihood (plus log prior in MAP mode); -inf if some word has <a_w, x> <= 0.
inline double log_likelihood(const LikelihoodProblem& p, std::span<const double> x) {
  detail::check_point(p, x);
  double f = 0.0;
  for (const auto& [word, count] : p.words()) {
    const double s = p.inner(word, x);
    if (!(s > 0.0)) return -std::numeric_limits<double>::infinity();
    f += static_cast<double>(count) * std::log(s);
  }
  if (detail::use_prior(p)) {
    const double a = *p.prior_alpha() - 1.0;
    for (double v : x) {
      if (!(v > 0.0)) return a > 0.0 ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
      f += a * std::log(v);
    }
  }
  return f;
}

inline std::vector<double> gradient(const LikelihoodProblem& p, std::span<const double> x) {
  detail::check_point(p, x);
  const std::size_t r = p.size();
  std::vector<double> g(r, 0.0);
  for (const auto& [word, count] : p.words()) {
    const double s = p.inner(word, x);
    if (!(s > 0.0)) throw NumericalError("word " + std::to_string(word) + " has zero probability at this point");
    const auto a = p.restriction().row(word);
    const double c = static_cast<double>(count) / s;
    for (std::size_t j = 0; j < r; ++j) g[j] += c * a[j];
  }
  if (detail::use_prior(p)) {
    for (std::size_t j = 0; j < r; ++j) g[j] += (*p.prior_alpha() - 1.0) / x[j];
  }
  return g;
}

inline Eigen::MatrixXd hessian(const LikelihoodProblem& p, std::span<const double> x) {
  detail::check_point(p, x);
  const auto r = static_cast<Eigen::Index>(p.size());
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(r, r);
  for (const auto& [word, count] : p.words()) {
    const double s = p.inner(word, x);
    if (!(s > 0.0)) throw NumericalError("word " + std::to_string(word) + " has zero probability at this point");
    const auto a = p.restriction().row(word);
    const Eigen::Map<const Eigen::VectorXd> av(a.data(), r);
    H.noalias() -= (static_cast<double>(count) / (s * s)) * av * av.transpose();
  }
  if (detail::use_prior(p)) {
    for (Eigen::Index j = 0; j < r; ++j) {
      H(j, j) -= (*p.prior_alpha() - 1.0) / (x[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)]);
    }
  }
  return H;
}

/// Q = sum over words with nonzero restricted profile of a a^T / <a, x>.
inline Eigen::MatrixXd fisher_expected(const SupportRestriction& R, std::span<const double> x) {
  if (x.size() != R.size()) throw ValidationError("point length does not match support size");
  const auto r = static_cast<Eigen::Index>(R.size());
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(r, r);
  for (std::size_t w = 0; w < R.vocab_size(); ++w) {
    const auto a = R.row(w);
    double s = 0.0;
    bool nonzero = false;
    for (std::size_t j = 0; j < a.size(); ++j) {
      s += a[j] * x[j];
      nonzero = nonzero || a[j] != 0.0;
    }
    if (!nonzero) continue;
    if (!(s > 0.0)) throw NumericalError("word " + std::to_string(w) + " has zero probability under x");
    const Eigen::Map<const Eigen::VectorXd> av(a.data(), r);
    Q.noalias() += (1.0 / s) * av * av.transpose();
  }
  return Q;
}

/// Q_hat = (1/n) sum_w y_w a_w a_w^T / <a_w, x>^2 (likelihood part only).
inline Eigen::MatrixXd fisher_empirical(const LikelihoodProblem& p, std::span<const double> x) {
  const LikelihoodProblem plain(p.restriction(), SparseDocument(p.words()));
  return -hessian(plain, x) / static_cast<double>(p.length());
}

struct FisherDiagnostics {
  Eigen::MatrixXd Q;
  Eigen::MatrixXd Q_hat;
  double psd_ratio = 0.0;  // largest c with Q_hat >= c Q on the range of Q
  double min_eig_Q = 0.0;
  bool Q_rank_deficient = false;
};

/// Smallest generalized eigenvalue of (Q_hat, Q), computed by whitening
/// with the (pseudo-)inverse square root of Q.
inline double psd_ratio(const Eigen::MatrixXd& Q_hat, const Eigen::MatrixXd& Q, double* min_eig = nullptr,
                        bool* rank_deficient = nullptr) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eq(Q);
  const Eigen::VectorXd lam = eq.eigenvalues();
  const double top = lam.cwiseAbs().maxCoeff();
  if (min_eig) *min_eig = lam.minCoeff();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam(i) > 1e-12 * std::max(top, 1e-300)) keep.push_back(i);
  }
  if (rank_deficient) *rank_deficient = keep.size() < static_cast<std::size_t>(lam.size());
  if (keep.empty()) throw NumericalError("expected Fisher matrix is zero");
  Eigen::MatrixXd W(Q.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    W.col(static_cast<Eigen::Index>(c)) = eq.eigenvectors().col(keep[c]) / std::sqrt(lam(keep[c]));
  }
  const Eigen::MatrixXd M = W.transpose() * Q_hat * W;
  const double smallest = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(M, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  return std::max(0.0, smallest);
}

/// Q, Q_hat and their ratio at x_star (restricted coordinates, on the r-simplex).
inline FisherDiagnostics fisher_psd_check(const SupportRestriction& R, std::span<const double> x_star,
                                          const SparseDocument& y) {
  const LikelihoodProblem p(R, y);
  if (p.length() == 0) throw ValidationError("document has no words possible under this support");
  FisherDiagnostics out;
  out.Q = fisher_expected(R, x_star);
  out.Q_hat = fisher_empirical(p, x_star);
  out.psd_ratio = psd_ratio(out.Q_hat, out.Q, &out.min_eig_Q, &out.Q_rank_deficient);
  return out;
}

// ---------------------------------------------------------------- ascent

struct AscentOptions {
  std::size_t max_iterations = 500;
  /// Stop when the projected-gradient norm is at most this times n.
  double gradient_tolerance = 1e-8;
  double floor = 1e-10;
  double armijo = 1e-4;
  double backtrack = 0.5;
  std::size_t max_backtracks = 60;
};

struct AscentResult {
  TopicVector x;                  // length k, zero off the support
  std::vector<double> restricted;  // coordinates on the support
  std::size_t iterations = 0;
  double gradient_norm = 0.0;  // gradient projected onto the tangent cone at x
  double objective = 0.0;
  bool converged = false;
  std::vector<std::size_t> excluded_words;
};

/// Euclidean projection onto {x : x_i >= floor, sum x = 1} (sort-based).
inline std::vector<double> project_to_simplex(std::span<const double> v, double floor = 0.0) {
  const std::size_t r = v.size();
  if (r == 0) throw ValidationError("cannot project an empty vector");
  const double budget = 1.0 - static_cast<double>(r) * floor;
  if (budget < 0.0) throw ValidationError("floor too large for the simplex dimension");
  std::vector<double> u(v.begin(), v.end());
  for (auto& e : u) e -= floor;
  std::vector<double> s = u;
  std::sort(s.begin(), s.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    cumulative += s[i];
    const double t = (cumulative - budget) / static_cast<double>(i + 1);
    if (i + 1 == r || s[i + 1] <= t) {
      theta = t;
      break;
    }
  }
  std::vector<double> out(r);
  for (std::size_t i = 0; i < r; ++i) out[i] = std::max(u[i] - theta, 0.0) + floor;
  return out;
}

/// Norm of the projection of g onto the tangent cone of the floored simplex at x.
inline double projected_gradient_norm(std::span<const double> g, std::span<const double> x, double floor) {
  std::vector<double> free_g, bound_g;
  for (std::size_t i = 0; i < g.size(); ++i) (x[i] <= floor ? bound_g : free_g).push_back(g[i]);
  std::sort(bound_g.begin(), bound_g.end(), std::greater<>());
  // mu balances sum_free (g - mu) + sum_bound max(g - mu, 0) = 0.
  double sum = 0.0;
  for (double v : free_g) sum += v;
  double mu = 0.0;
  std::size_t m = 0;
  for (;; ++m) {
    const std::size_t count = free_g.size() + m;
    if (count > 0) {
      mu = sum / static_cast<double>(count);
      if (m == bound_g.size() || bound_g[m] <= mu) break;
    }
    if (m == bound_g.size()) break;
    sum += bound_g[m];
  }
  double norm2 = 0.0;
  for (double v : free_g) norm2 += (v - mu) * (v - mu);
  for (double v : bound_g) {
    const double d = std::max(v - mu, 0.0);
    norm2 += d * d;
  }
  return std::sqrt(norm2);
}

namespace detail {

inline AscentResult ascend(const SupportRestriction& R, const SparseDocument& y, const TopicVector& init,
                           std::optional<double> alpha, const AscentOptions& opts) {
  if (init.size() != R.parent().topics()) throw ValidationError("initial point length does not match topic count");
  std::vector<bool> on_support(init.size(), false);
  for (std::size_t j : R.support()) on_support[j] = true;
  double total = 0.0;
  for (std::size_t j = 0; j < init.size(); ++j) {
    if (!on_support[j] && init[j] != 0.0) {
      throw ValidationError("initial point is nonzero at topic " + std::to_string(j) + ", outside the support");
    }
    if (init[j] < 0.0) throw ValidationError("initial point has a negative entry");
    total += init[j];
  }
  if (std::abs(total - 1.0) > TopicVector::kSimplexTolerance) throw ValidationError("initial point is not on the simplex");

  const LikelihoodProblem p(R, y, alpha);
  if (p.length() == 0) throw NumericalError("no word of the document is possible under this support");
  AscentResult out;
  out.excluded_words = p.excluded_words();
  const auto n = static_cast<double>(p.length());
  std::vector<double> x = project_to_simplex(R.restrict_vector(init.values()), opts.floor);
  double f = log_likelihood(p, x);
  if (!std::isfinite(f)) throw NumericalError("objective is not finite at the initial point");

  if (R.size() == 1) {
    out.converged = true;
  } else {
    for (;;) {
      const std::vector<double> g = gradient(p, x);
      out.gradient_norm = projected_gradient_norm(g, x, opts.floor);
      if (out.gradient_norm <= opts.gradient_tolerance * n) {
        out.converged = true;
        break;
      }
      if (out.iterations >= opts.max_iterations) break;
      double step = 1.0 / n;
      bool accepted = false;
      for (std::size_t b = 0; b <= opts.max_backtracks; ++b, step *= opts.backtrack) {
        std::vector<double> trial(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) trial[j] = x[j] + step * g[j];
        trial = project_to_simplex(trial, opts.floor);
        double gain = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) gain += g[j] * (trial[j] - x[j]);
        const double ft = log_likelihood(p, trial);
        if (std::isfinite(ft) && ft >= f + opts.armijo * gain) {
          accepted = ft >= f;
          if (accepted) {
            x = std::move(trial);
            f = ft;
          }
          break;
        }
      }
      if (!accepted) break;  // no ascent step left at double precision
      ++out.iterations;
    }
  }
  out.objective = f;
  out.restricted = x;
  std::vector<double> full = R.expand(x);
  // Floors and rounding leave the sum within a few ulps of 1.
  double s = 0.0;
  for (double v : full) s += v;
  for (auto& v : full) v /= s;
  out.x = TopicVector::simplex_point(std::move(full));
  return out;
}

}  // namespace detail

/// Restricted maximum-likelihood estimate on support R.
inline AscentResult mle_on_support(const TopicMatrix& A, const SparseDocument& y, std::vector<std::size_t> R,
                                   const TopicVector& init, const AscentOptions& opts = {}) {
  const SupportRestriction restriction(A, std::move(R));
  return detail::ascend(restriction, y, init, std::nullopt, opts);
}

/// Restricted MAP estimate under a symmetric Dirichlet(alpha) prior.
inline AscentResult map_on_support(const TopicMatrix& A, const SparseDocument& y, std::vector<std::size_t> R,
                                   double alpha, const TopicVector& init, const AscentOptions& opts = {}) {
  if (!(alpha > 0.0)) throw ValidationError("Dirichlet alpha must be positive");
  const SupportRestriction restriction(A, std::move(R));
  return detail::ascend(restriction, y, init, alpha, opts);
}

/// Uniform point on the support, the default starting point.
inline TopicVector uniform_on(std::size_t k, std::span<const std::size_t> support) {
  if (support.empty()) throw ValidationError("support must be nonempty");
  std::vector<double> x(k, 0.0);
  for (std::size_t j : support) x[j] = 1.0 / static_cast<double>(support.size());
  return TopicVector::simplex_point(std::move(x));
}

}  // namespace topicinf
