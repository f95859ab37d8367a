#pragma once

// Dense bounded-variable simplex for LPs of the form
//
//     minimize    c^T x
//     subject to  row_lower <= M x <= row_upper
//                 col_lower <= x   <= col_upper
//
// with finite column bounds. Every row gets a logical variable z = M x, so
// the all-logical basis (B = -I) is always available, and because every
// structural column is boxed it is dual feasible once each nonbasic
// structural sits at the bound matching the sign of its cost. The solver
// therefore runs:
//
//   1. dual simplex on slightly perturbed costs (deterministic, seeded),
//      with a bound-flipping ("long step") ratio test;
//   2. primal simplex on the true costs from the resulting primal feasible
//      basis, Dantzig pricing with a switch to Bland's rule after a run of
//      degenerate pivots.
//
// The explicit basis inverse is updated in product form and refactorized
// periodically. M is accessed only through a ColumnSource, so callers with
// structured matrices never materialize them.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "topicinf/error.hpp"
#include "topicinf/rng.hpp"

namespace topicinf::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Read-only access to the constraint matrix M (rows x cols).
template <typename S>
concept ColumnSource = requires(const S& s, std::size_t j, std::span<double> out, std::span<const double> in) {
  { s.rows() } -> std::convertible_to<std::size_t>;
  { s.cols() } -> std::convertible_to<std::size_t>;
  s.column(j, out);           // out := M e_j (out has rows() entries)
  s.transpose_apply(in, out); // out := M^T in (out has cols() entries)
  s.apply(in, out);           // out := M in (out has rows() entries)
};

/// Column source over an explicit dense matrix.
class DenseColumns {
 public:
  explicit DenseColumns(Eigen::MatrixXd M) : M_(std::move(M)) {}

  std::size_t rows() const noexcept { return static_cast<std::size_t>(M_.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(M_.cols()); }

  void column(std::size_t j, std::span<double> out) const {
    for (std::size_t i = 0; i < rows(); ++i) out[i] = M_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  void transpose_apply(std::span<const double> v, std::span<double> out) const {
    Eigen::Map<Eigen::VectorXd>(out.data(), M_.cols()) =
        M_.transpose() * Eigen::Map<const Eigen::VectorXd>(v.data(), M_.rows());
  }
  void apply(std::span<const double> x, std::span<double> out) const {
    Eigen::Map<Eigen::VectorXd>(out.data(), M_.rows()) = M_ * Eigen::Map<const Eigen::VectorXd>(x.data(), M_.cols());
  }

 private:
  Eigen::MatrixXd M_;
};

struct Bounds {
  std::vector<double> cost;
  std::vector<double> col_lower, col_upper;
  std::vector<double> row_lower, row_upper;
};

enum class Status { optimal, infeasible, unbounded, iteration_limit };

struct Options {
  double primal_tolerance = 1e-9;
  double dual_tolerance = 1e-11;
  double pivot_tolerance = 1e-9;
  std::size_t max_iterations = 200000;
  std::size_t refactor_interval = 50;
  /// Absolute size of the cost perturbation used during the dual phase; 0 disables it.
  double perturbation = 1e-7;
  std::uint64_t perturbation_seed = 0;
  /// Consecutive degenerate primal pivots before switching to Bland's rule.
  std::size_t bland_after = 50;
  /// Optional per-column starting side for zero-cost columns: > 0 upper, < 0 lower.
  std::vector<double> start_hint;
};

struct Solution {
  Status status = Status::iteration_limit;
  std::vector<double> x;             // structural values
  std::vector<double> row_activity;  // M x
  std::vector<double> row_duals;     // y with c - M^T y = reduced costs
  std::vector<double> reduced_costs; // structural reduced costs
  double objective = 0.0;
  std::size_t dual_iterations = 0;
  std::size_t primal_iterations = 0;
};

namespace detail {

template <ColumnSource S>
class BoundedSimplex {
 public:
  BoundedSimplex(const S& M, const Bounds& b, const Options& opt)
      : M_(M), opt_(opt), n_(M.cols()), m_(M.rows()), N_(n_ + m_) {
    if (b.cost.size() != n_ || b.col_lower.size() != n_ || b.col_upper.size() != n_ || b.row_lower.size() != m_ ||
        b.row_upper.size() != m_) {
      throw ValidationError("LP bound vectors do not match matrix shape");
    }
    lo_.resize(N_);
    up_.resize(N_);
    true_cost_.assign(N_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
      if (!std::isfinite(b.col_lower[j]) || !std::isfinite(b.col_upper[j]) || b.col_lower[j] > b.col_upper[j]) {
        throw ValidationError("LP column bounds must be finite with lower <= upper");
      }
      lo_[j] = b.col_lower[j];
      up_[j] = b.col_upper[j];
      true_cost_[j] = b.cost[j];
    }
    for (std::size_t i = 0; i < m_; ++i) {
      if (b.row_lower[i] > b.row_upper[i]) throw ValidationError("LP row bounds must satisfy lower <= upper");
      lo_[n_ + i] = b.row_lower[i];
      up_[n_ + i] = b.row_upper[i];
    }
    cost_ = true_cost_;
    if (opt_.perturbation > 0.0) {
      Rng rng(opt_.perturbation_seed, "lp-cost-perturbation");
      for (std::size_t j = 0; j < n_; ++j) {
        if (lo_[j] == up_[j]) continue;
        const double magnitude = opt_.perturbation * (1.0 + std::abs(true_cost_[j])) * (0.5 + 0.5 * rng.uniform());
        const double hint = j < opt_.start_hint.size() ? opt_.start_hint[j] : 0.0;
        double sign = rng.coin() ? 1.0 : -1.0;
        if (true_cost_[j] != 0.0) {
          sign = true_cost_[j] > 0.0 ? 1.0 : -1.0;
        } else if (hint != 0.0) {
          sign = hint > 0.0 ? -1.0 : 1.0;
        }
        cost_[j] += sign * magnitude;
      }
    }

    x_.assign(N_, 0.0);
    at_upper_.assign(N_, false);
    pos_.assign(N_, npos);
    basis_.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      basis_[i] = n_ + i;
      pos_[n_ + i] = i;
    }
    for (std::size_t j = 0; j < n_; ++j) {
      at_upper_[j] = cost_[j] < 0.0;
      x_[j] = at_upper_[j] ? up_[j] : lo_[j];
    }
    work_m_.resize(m_);
    work_m2_.resize(m_);
    alpha_.resize(N_);
    d_.assign(N_, 0.0);
  }

  Solution run() {
    Solution sol;
    refactor();
    compute_duals();
    const Status dual_status = dual_phase(sol.dual_iterations);
    if (dual_status != Status::optimal) {
      sol.status = dual_status;
      fill(sol);
      return sol;
    }
    cost_ = true_cost_;
    refactor();
    compute_duals();
    sol.status = primal_phase(sol.primal_iterations);
    refactor();
    compute_duals();
    fill(sol);
    return sol;
  }

 private:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  bool boxed(std::size_t j) const noexcept { return std::isfinite(lo_[j]) && std::isfinite(up_[j]); }
  bool fixed(std::size_t j) const noexcept { return lo_[j] == up_[j]; }

  void column_of(std::size_t j, std::span<double> out) const {
    if (j < n_) {
      M_.column(j, out);
    } else {
      std::fill(out.begin(), out.end(), 0.0);
      out[j - n_] = -1.0;
    }
  }

  /// alpha_j = rho^T a_j for every variable.
  void row_products(std::span<const double> rho, std::span<double> out) const {
    M_.transpose_apply(rho, out.first(n_));
    for (std::size_t i = 0; i < m_; ++i) out[n_ + i] = -rho[i];
  }

  void refactor() {
    Eigen::MatrixXd B(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(m_));
    for (std::size_t i = 0; i < m_; ++i) {
      column_of(basis_[i], work_m_);
      B.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(work_m_.data(), static_cast<Eigen::Index>(m_));
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    Binv_ = lu.inverse();
    since_refactor_ = 0;
    recompute_primal();
  }

  void recompute_primal() {
    // x_B = -B^{-1} (sum over nonbasic of a_j x_j)
    std::vector<double> xs(n_);
    for (std::size_t j = 0; j < n_; ++j) xs[j] = pos_[j] == npos ? x_[j] : 0.0;
    std::vector<double> r(m_);
    M_.apply(xs, r);
    for (std::size_t i = 0; i < m_; ++i) {
      if (pos_[n_ + i] == npos) r[i] -= x_[n_ + i];
    }
    Eigen::VectorXd xb = -(Binv_ * Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(m_)));
    for (std::size_t i = 0; i < m_; ++i) x_[basis_[i]] = xb(static_cast<Eigen::Index>(i));
  }

  void compute_duals() {
    Eigen::VectorXd cb(static_cast<Eigen::Index>(m_));
    for (std::size_t i = 0; i < m_; ++i) cb(static_cast<Eigen::Index>(i)) = cost_[basis_[i]];
    y_ = Binv_.transpose() * cb;
    row_products(std::span<const double>(y_.data(), m_), alpha_);
    for (std::size_t j = 0; j < N_; ++j) d_[j] = pos_[j] == npos ? cost_[j] - alpha_[j] : 0.0;
  }

  /// Moves boxed nonbasics whose reduced cost has the wrong sign to the other bound.
  bool repair_dual_feasibility() {
    bool changed = false;
    for (std::size_t j = 0; j < N_; ++j) {
      if (pos_[j] != npos || fixed(j) || !boxed(j)) continue;
      if (!at_upper_[j] && d_[j] < -opt_.dual_tolerance) {
        at_upper_[j] = true;
        x_[j] = up_[j];
        changed = true;
      } else if (at_upper_[j] && d_[j] > opt_.dual_tolerance) {
        at_upper_[j] = false;
        x_[j] = lo_[j];
        changed = true;
      }
    }
    return changed;
  }

  void pivot(std::size_t r, std::size_t q, const Eigen::VectorXd& col) {
    const std::size_t p = basis_[r];
    const double piv = col(static_cast<Eigen::Index>(r));
    Binv_.row(static_cast<Eigen::Index>(r)) /= piv;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r) continue;
      const double f = col(static_cast<Eigen::Index>(i));
      if (f != 0.0) Binv_.row(static_cast<Eigen::Index>(i)) -= f * Binv_.row(static_cast<Eigen::Index>(r));
    }
    basis_[r] = q;
    pos_[q] = r;
    pos_[p] = npos;
    ++since_refactor_;
  }

  Eigen::VectorXd ftran(std::size_t j) {
    column_of(j, work_m_);
    return Binv_ * Eigen::Map<const Eigen::VectorXd>(work_m_.data(), static_cast<Eigen::Index>(m_));
  }

  Status dual_phase(std::size_t& iterations) {
    struct Candidate {
      std::size_t var;
      double ratio;
      double weight;
    };
    std::vector<Candidate> cand;
    std::vector<std::size_t> flips;
    for (;;) {
      if (iterations >= opt_.max_iterations) return Status::iteration_limit;
      if (since_refactor_ >= opt_.refactor_interval) {
        refactor();
        compute_duals();
        if (repair_dual_feasibility()) recompute_primal();
      }

      // Leaving row: dual steepest edge with exact weights ||e_r^T B^{-1}||^2.
      std::size_t r = npos;
      double worst = 0.0;
      for (std::size_t i = 0; i < m_; ++i) {
        const std::size_t v = basis_[i];
        const double viol = std::max(lo_[v] - x_[v], x_[v] - up_[v]);
        if (viol <= opt_.primal_tolerance) continue;
        const double score = viol * viol / Binv_.row(static_cast<Eigen::Index>(i)).squaredNorm();
        if (score > worst) {
          worst = score;
          r = i;
        }
      }
      if (r == npos) return Status::optimal;
      ++iterations;

      const std::size_t p = basis_[r];
      const bool to_lower = x_[p] < lo_[p];
      const double target = to_lower ? lo_[p] : up_[p];
      Eigen::VectorXd rho = Binv_.row(static_cast<Eigen::Index>(r)).transpose();
      row_products(std::span<const double>(rho.data(), m_), alpha_);
      const double sgn = to_lower ? -1.0 : 1.0;

      cand.clear();
      for (std::size_t j = 0; j < N_; ++j) {
        if (pos_[j] != npos || fixed(j)) continue;
        const double a = sgn * alpha_[j];
        if ((!at_upper_[j] && a > opt_.pivot_tolerance) || (at_upper_[j] && a < -opt_.pivot_tolerance)) {
          cand.push_back({j, std::max(0.0, d_[j] / a), std::abs(a)});
        }
      }
      if (cand.empty()) return Status::infeasible;
      // Breakpoints are consumed in ratio order from a heap; usually only a few are needed.
      const auto later = [](const Candidate& a, const Candidate& b) {
        if (a.ratio != b.ratio) return a.ratio > b.ratio;
        if (a.weight != b.weight) return a.weight < b.weight;
        return a.var > b.var;
      };
      std::make_heap(cand.begin(), cand.end(), later);

      // Long-step ratio test: pass breakpoints while the dual slope stays positive.
      double slope = std::abs(x_[p] - target);
      flips.clear();
      Candidate entering{};
      for (auto end = cand.end(); end != cand.begin(); --end) {
        std::pop_heap(cand.begin(), end, later);
        const Candidate c = *(end - 1);
        if (boxed(c.var)) {
          const double next = slope - c.weight * (up_[c.var] - lo_[c.var]);
          if (next > 0.0 && end - 1 != cand.begin()) {
            slope = next;
            flips.push_back(c.var);
            continue;
          }
          if (next > 0.0) return Status::infeasible;  // dual ray: all breakpoints passed
        }
        entering = c;
        break;
      }
      const std::size_t q = entering.var;
      const double theta_d = entering.ratio;

      // Dual update.
      if (theta_d != 0.0) {
        for (std::size_t j = 0; j < N_; ++j) {
          if (pos_[j] == npos) d_[j] -= theta_d * sgn * alpha_[j];
        }
      }
      d_[q] = 0.0;
      d_[p] = to_lower ? theta_d : -theta_d;

      // Bound flips.
      if (!flips.empty()) {
        std::fill(work_m2_.begin(), work_m2_.end(), 0.0);
        for (std::size_t j : flips) {
          const double old = x_[j];
          at_upper_[j] = !at_upper_[j];
          x_[j] = at_upper_[j] ? up_[j] : lo_[j];
          column_of(j, work_m_);
          const double delta = x_[j] - old;
          for (std::size_t i = 0; i < m_; ++i) work_m2_[i] += work_m_[i] * delta;
        }
        Eigen::VectorXd dx = Binv_ * Eigen::Map<const Eigen::VectorXd>(work_m2_.data(), static_cast<Eigen::Index>(m_));
        for (std::size_t i = 0; i < m_; ++i) x_[basis_[i]] -= dx(static_cast<Eigen::Index>(i));
      }

      // Primal pivot.
      Eigen::VectorXd col = ftran(q);
      const double piv = col(static_cast<Eigen::Index>(r));
      if (std::abs(piv - alpha_[q]) > 1e-7 * (1.0 + std::abs(piv)) || std::abs(piv) < 1e-14) {
        // Inconsistent pivot: rebuild from scratch and retry this iteration.
        refactor();
        compute_duals();
        if (repair_dual_feasibility()) recompute_primal();
        continue;
      }
      const double theta_p = (x_[p] - target) / piv;
      for (std::size_t i = 0; i < m_; ++i) x_[basis_[i]] -= theta_p * col(static_cast<Eigen::Index>(i));
      x_[q] += theta_p;
      x_[p] = target;
      at_upper_[p] = !to_lower;
      pivot(r, q, col);
    }
  }

  Status primal_phase(std::size_t& iterations) {
    std::size_t degenerate_run = 0;
    for (;;) {
      if (iterations >= opt_.max_iterations) return Status::iteration_limit;
      if (since_refactor_ >= opt_.refactor_interval) {
        refactor();
      }
      compute_duals();
      const bool bland = degenerate_run >= opt_.bland_after;

      std::size_t q = npos;
      double best = 0.0;
      for (std::size_t j = 0; j < N_; ++j) {
        if (pos_[j] != npos || fixed(j)) continue;
        double gain = 0.0;
        if (!at_upper_[j] && d_[j] < -opt_.dual_tolerance) gain = -d_[j];
        if (at_upper_[j] && d_[j] > opt_.dual_tolerance) gain = d_[j];
        if (gain <= 0.0) continue;
        if (bland) {
          q = j;
          break;
        }
        if (gain > best) {
          best = gain;
          q = j;
        }
      }
      if (q == npos) return Status::optimal;
      ++iterations;

      const double dir = d_[q] < 0.0 ? 1.0 : -1.0;
      Eigen::VectorXd col = ftran(q);
      double theta = up_[q] - lo_[q];
      std::size_t r = npos;
      double r_weight = 0.0;
      for (std::size_t i = 0; i < m_; ++i) {
        const double rate = -dir * col(static_cast<Eigen::Index>(i));  // d x_B[i] / d theta
        const std::size_t v = basis_[i];
        double limit = kInf;
        if (rate < -opt_.pivot_tolerance && std::isfinite(lo_[v])) {
          limit = std::max(0.0, (x_[v] - lo_[v]) / -rate);
        } else if (rate > opt_.pivot_tolerance && std::isfinite(up_[v])) {
          limit = std::max(0.0, (up_[v] - x_[v]) / rate);
        } else {
          continue;
        }
        const bool better = bland ? (limit < theta || (limit == theta && r != npos && v < basis_[r]))
                                  : (limit < theta || (limit == theta && std::abs(rate) > r_weight));
        if (better) {
          theta = limit;
          r = i;
          r_weight = std::abs(rate);
        }
      }
      if (!std::isfinite(theta)) return Status::unbounded;
      degenerate_run = theta <= opt_.primal_tolerance ? degenerate_run + 1 : 0;

      for (std::size_t i = 0; i < m_; ++i) x_[basis_[i]] -= dir * theta * col(static_cast<Eigen::Index>(i));
      x_[q] += dir * theta;
      if (r == npos) {
        at_upper_[q] = !at_upper_[q];
        x_[q] = at_upper_[q] ? up_[q] : lo_[q];
        continue;
      }
      const std::size_t p = basis_[r];
      const double rate = -dir * col(static_cast<Eigen::Index>(r));
      at_upper_[p] = rate > 0.0;
      x_[p] = at_upper_[p] ? up_[p] : lo_[p];
      pivot(r, q, col);
    }
  }

  void fill(Solution& sol) const {
    sol.x.assign(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(n_));
    sol.row_activity.resize(m_);
    M_.apply(sol.x, sol.row_activity);
    sol.row_duals.assign(y_.data(), y_.data() + m_);
    sol.reduced_costs.assign(d_.begin(), d_.begin() + static_cast<std::ptrdiff_t>(n_));
    sol.objective = 0.0;
    for (std::size_t j = 0; j < n_; ++j) sol.objective += true_cost_[j] * sol.x[j];
  }

  const S& M_;
  Options opt_;
  std::size_t n_, m_, N_;
  std::vector<double> lo_, up_, cost_, true_cost_;
  std::vector<double> x_, d_, alpha_;
  std::vector<bool> at_upper_;
  std::vector<std::size_t> basis_, pos_;
  Eigen::MatrixXd Binv_;
  Eigen::VectorXd y_;
  std::vector<double> work_m_, work_m2_;
  std::size_t since_refactor_ = 0;
};

}  // namespace detail

/// Solves min c^T x subject to the row and column bounds (column bounds must be finite).
template <ColumnSource S>
Solution solve(const S& M, const Bounds& bounds, const Options& options = {}) {
  detail::BoundedSimplex<S> solver(M, bounds, options);
  return solver.run();
}

}  // namespace topicinf::lp
