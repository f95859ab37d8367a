#pragma once

// δ-biased minimum-variance inverses and condition-number certificates.
//
// Row i of the inverse solves
//
//     min ||b||_inf   s.t.   | <b, A e_j> - 1{i=j} | <= delta   for all j.
//
// Substituting beta = b / t and sigma = 1 / t turns it into an LP whose
// only general constraints are the 2k (k when delta = 0) topic rows:
//
//     max sigma   s.t.   -delta*sigma <= (A^T beta)_j - sigma*1{i=j} <= delta*sigma,
//                        -1 <= beta_w <= 1,   0 <= sigma <= 2 / (1 - delta).
//
// (t >= 1 - delta for any column-stochastic A, so the sigma box is never
// active.) The problem is solved by the bounded dual simplex in simplex.hpp;
// its row duals give a vector x with
//
//     t_i >= (x_i - delta*||x||_1) / ||A x||_1,
//
// an independent lower bound used to certify optimality of every row.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "topicinf/core.hpp"
#include "topicinf/error.hpp"
#include "topicinf/parallel.hpp"
#include "topicinf/rng.hpp"
#include "topicinf/simplex.hpp"

namespace topicinf {

namespace detail {

/// Bit-pattern form of a matrix whose columns each take a single nonzero
/// value (the random half-support instances). A u is then evaluated from
/// per-byte lookup tables over a D x ceil(k/8) byte array that fits in cache.
class ColumnPattern {
 public:
  static std::optional<ColumnPattern> detect(const TopicMatrix& A) {
    const std::size_t D = A.vocab_size(), k = A.topics();
    std::vector<double> value(k, 0.0);
    for (std::size_t w = 0; w < D; ++w) {
      const auto a = A.row(w);
      for (std::size_t j = 0; j < k; ++j) {
        if (a[j] == 0.0) continue;
        if (value[j] == 0.0) value[j] = a[j];
        if (a[j] != value[j]) return std::nullopt;
      }
    }
    ColumnPattern p;
    p.D_ = D;
    p.k_ = k;
    p.bytes_ = (k + 7) / 8;
    p.value_ = std::move(value);
    p.codes_.assign(D * p.bytes_, 0);
    for (std::size_t w = 0; w < D; ++w) {
      const auto a = A.row(w);
      for (std::size_t j = 0; j < k; ++j) {
        if (a[j] != 0.0) p.codes_[w * p.bytes_ + j / 8] |= static_cast<std::uint8_t>(1u << (j % 8));
      }
    }
    return p;
  }

  /// out := A u; `table` is caller-owned scratch space.
  void apply(std::span<const double> u, std::span<double> out, std::vector<double>& table) const {
    table.resize(bytes_ * 256);
    for (std::size_t b = 0; b < bytes_; ++b) {
      double* t = table.data() + b * 256;
      t[0] = 0.0;
      for (unsigned m = 1; m < 256; ++m) {
        const std::size_t j = 8 * b + static_cast<std::size_t>(std::countr_zero(m));
        t[m] = t[m & (m - 1)] + (j < k_ ? u[j] * value_[j] : 0.0);
      }
    }
    for (std::size_t w = 0; w < D_; ++w) {
      const std::uint8_t* code = codes_.data() + w * bytes_;
      double s = 0.0;
      for (std::size_t b = 0; b < bytes_; ++b) s += table[b * 256 + code[b]];
      out[w] = s;
    }
  }

 private:
  std::size_t D_ = 0, k_ = 0, bytes_ = 0;
  std::vector<double> value_;
  std::vector<std::uint8_t> codes_;
};

/// Per-matrix data shared by all row programs.
struct RowLpContext {
  /// Pseudo-inverse of A^T A, used to pick the starting sign pattern of each
  /// row: the signs of the least-squares inverse row are usually close to optimal.
  Eigen::MatrixXd gram_pinv;
  std::optional<ColumnPattern> pattern;

  explicit RowLpContext(const TopicMatrix& A) : pattern(ColumnPattern::detect(A)) {
    const Eigen::MatrixXd gram = A.dense().transpose() * A.dense();
    gram_pinv = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(gram).pseudoInverse();
  }
};

/// Constraint matrix of the scaled row program for row `target`.
class RowProgramColumns {
 public:
  RowProgramColumns(const TopicMatrix& A, std::size_t target, double delta, const ColumnPattern* pattern = nullptr)
      : A_(A), pattern_(pattern), target_(target), delta_(delta), k_(A.topics()), D_(A.vocab_size()),
        split_(delta > 0.0) {}

  std::size_t rows() const noexcept { return split_ ? 2 * k_ : k_; }
  std::size_t cols() const noexcept { return D_ + 1; }
  std::size_t sigma_index() const noexcept { return D_; }

  void column(std::size_t j, std::span<double> out) const {
    if (j < D_) {
      const auto a = A_.row(j);
      std::copy(a.begin(), a.end(), out.begin());
      if (split_) std::copy(a.begin(), a.end(), out.begin() + static_cast<std::ptrdiff_t>(k_));
      return;
    }
    for (std::size_t r = 0; r < rows(); ++r) out[r] = sigma_coefficient(r);
  }

  void transpose_apply(std::span<const double> v, std::span<double> out) const {
    combined_.resize(k_);
    for (std::size_t j = 0; j < k_; ++j) combined_[j] = split_ ? v[j] + v[k_ + j] : v[j];
    if (pattern_) {
      pattern_->apply(combined_, out.first(D_), table_);
    } else {
      const Eigen::Map<const Eigen::VectorXd> u(combined_.data(), static_cast<Eigen::Index>(k_));
      Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(D_)) = A_.dense() * u;
    }
    double s = 0.0;
    for (std::size_t r = 0; r < rows(); ++r) s += v[r] * sigma_coefficient(r);
    out[D_] = s;
  }

  void apply(std::span<const double> x, std::span<double> out) const {
    const Eigen::Map<const Eigen::VectorXd> beta(x.data(), static_cast<Eigen::Index>(D_));
    Eigen::VectorXd atb = A_.dense().transpose() * beta;
    for (std::size_t r = 0; r < rows(); ++r) {
      out[r] = atb(static_cast<Eigen::Index>(r % k_)) + sigma_coefficient(r) * x[D_];
    }
  }

  /// Coefficient of sigma in constraint row r.
  double sigma_coefficient(std::size_t r) const noexcept {
    const std::size_t j = r % k_;
    const double unit = j == target_ ? 1.0 : 0.0;
    if (!split_) return -unit;
    return r < k_ ? -(unit + delta_) : -(unit - delta_);
  }

 private:
  const TopicMatrix& A_;
  const ColumnPattern* pattern_;
  std::size_t target_;
  double delta_;
  std::size_t k_, D_;
  bool split_;
  mutable std::vector<double> combined_, table_;
};

inline double l1_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

inline double linf_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

}  // namespace detail

struct LpOptions {
  /// Duality-gap tolerance for declaring a row optimal.
  double tolerance = 1e-7;
  std::size_t max_iterations = 200000;
  /// Worker threads for independent rows (0 = all cores).
  std::size_t threads = 0;
};

/// One row of the minimum-variance inverse.
struct RowLP {
  std::size_t row = 0;
  RowStatus status = RowStatus::optimal;
  double objective = std::numeric_limits<double>::infinity();  // max |b_w|
  std::vector<double> b;                                       // length D
  std::vector<double> dual_witness;                            // length k
  double dual_bound = 0.0;  // certified lower bound on the objective
  double bias = 0.0;        // max_j |<b, A e_j> - 1{i=j}|
  std::size_t iterations = 0;
};

/// Solves row `row` of the δ-biased minimum-variance inverse with precomputed per-matrix data.
inline RowLP solve_row_lp(const TopicMatrix& A, std::size_t row, double delta, const LpOptions& opts,
                          const detail::RowLpContext& context) {
  if (row >= A.topics()) throw ValidationError("row index " + std::to_string(row) + " out of range");
  if (!(delta >= 0.0 && delta < 1.0)) throw ValidationError("delta must lie in [0, 1)");
  if (!(opts.tolerance > 0.0)) throw ValidationError("LP tolerance must be positive");

  const std::size_t D = A.vocab_size();
  const std::size_t k = A.topics();
  detail::RowProgramColumns M(A, row, delta, context.pattern ? &*context.pattern : nullptr);

  lp::Bounds bounds;
  bounds.cost.assign(D + 1, 0.0);
  bounds.cost[D] = -1.0;
  bounds.col_lower.assign(D + 1, -1.0);
  bounds.col_upper.assign(D + 1, 1.0);
  bounds.col_lower[D] = 0.0;
  bounds.col_upper[D] = 2.0 / (1.0 - delta);
  if (delta > 0.0) {
    bounds.row_lower.assign(2 * k, 0.0);
    bounds.row_upper.assign(2 * k, 0.0);
    std::fill(bounds.row_lower.begin(), bounds.row_lower.begin() + static_cast<std::ptrdiff_t>(k), -lp::kInf);
    std::fill(bounds.row_upper.begin() + static_cast<std::ptrdiff_t>(k), bounds.row_upper.end(), lp::kInf);
  } else {
    bounds.row_lower.assign(k, 0.0);
    bounds.row_upper.assign(k, 0.0);
  }

  lp::Options lp_opts;
  lp_opts.max_iterations = opts.max_iterations;
  lp_opts.perturbation = 1e-6 / static_cast<double>(D);
  lp_opts.perturbation_seed = derive_seed(0, "row-lp", {row});
  {
    const Eigen::VectorXd ls_row = A.dense() * context.gram_pinv.col(static_cast<Eigen::Index>(row));
    lp_opts.start_hint.assign(ls_row.data(), ls_row.data() + ls_row.size());
  }
  const lp::Solution sol = lp::solve(M, bounds, lp_opts);

  RowLP out;
  out.row = row;
  out.iterations = sol.dual_iterations + sol.primal_iterations;
  if (sol.status == lp::Status::iteration_limit) {
    throw NumericalError("row " + std::to_string(row) + ": simplex iteration limit reached");
  }

  out.dual_witness.assign(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    out.dual_witness[j] = delta > 0.0 ? sol.row_duals[j] + sol.row_duals[k + j] : sol.row_duals[j];
  }
  const double sigma = sol.x[D];
  if (sol.status == lp::Status::infeasible || !(sigma > 1e-9)) {
    out.status = RowStatus::infeasible;
    out.dual_bound = std::numeric_limits<double>::infinity();
    return out;
  }

  out.b.resize(D);
  for (std::size_t w = 0; w < D; ++w) out.b[w] = sol.x[w] / sigma;
  out.objective = detail::linf_norm(out.b);

  const Eigen::Map<const Eigen::VectorXd> b(out.b.data(), static_cast<Eigen::Index>(D));
  const Eigen::VectorXd atb = A.dense().transpose() * b;
  for (std::size_t j = 0; j < k; ++j) {
    out.bias = std::max(out.bias, std::abs(atb(static_cast<Eigen::Index>(j)) - (j == row ? 1.0 : 0.0)));
  }

  const auto& x = out.dual_witness;
  const std::vector<double> ax = A.apply(x);
  const double ax1 = detail::l1_norm(ax);
  if (ax1 > 0.0) out.dual_bound = (x[row] - delta * detail::l1_norm(x)) / ax1;
  const bool certified = out.objective - out.dual_bound <= opts.tolerance * std::max(1.0, out.objective);
  const bool feasible = out.bias <= delta + 1e-7;
  out.status = certified && feasible ? RowStatus::optimal : RowStatus::tolerance_limited;
  return out;
}

/// Solves row `row` of the δ-biased minimum-variance inverse.
inline RowLP solve_row_lp(const TopicMatrix& A, std::size_t row, double delta, const LpOptions& opts = {}) {
  return solve_row_lp(A, row, delta, opts, detail::RowLpContext(A));
}

/// Solves every row; infeasible rows are reported in their RowLP status.
inline std::vector<RowLP> solve_all_rows(const TopicMatrix& A, double delta, const LpOptions& opts = {}) {
  std::vector<RowLP> rows(A.topics());
  const detail::RowLpContext context(A);
  parallel_for(A.topics(), opts.threads, [&](std::size_t i) { rows[i] = solve_row_lp(A, i, delta, opts, context); });
  return rows;
}

inline LinearInverse assemble_inverse(const TopicMatrix& A, double delta, const std::vector<RowLP>& rows) {
  std::vector<std::size_t> failed;
  for (const auto& r : rows) {
    if (r.status == RowStatus::infeasible) failed.push_back(r.row);
  }
  if (!failed.empty()) {
    std::string list;
    for (std::size_t i : failed) list += (list.empty() ? "" : ", ") + std::to_string(i);
    throw InfeasibleError("minimum-variance inverse infeasible at delta=" + std::to_string(delta) + " for rows " + list,
                          failed);
  }
  RowMatrix B(static_cast<Eigen::Index>(A.topics()), static_cast<Eigen::Index>(A.vocab_size()));
  std::vector<RowSolveInfo> info;
  info.reserve(rows.size());
  for (const auto& r : rows) {
    B.row(static_cast<Eigen::Index>(r.row)) =
        Eigen::Map<const Eigen::RowVectorXd>(r.b.data(), static_cast<Eigen::Index>(r.b.size()));
    info.push_back({r.status, r.objective, r.dual_bound, r.iterations});
  }
  return LinearInverse(std::move(B), delta, std::move(info));
}

/// The δ-biased minimum-variance inverse B. Throws InfeasibleError naming the failed rows.
inline LinearInverse min_variance_inverse(const TopicMatrix& A, double delta, const LpOptions& opts = {}) {
  return assemble_inverse(A, delta, solve_all_rows(A, delta, opts));
}

inline double lambda_delta(const TopicMatrix& A, double delta, const LpOptions& opts = {}) {
  return min_variance_inverse(A, delta, opts).lambda_delta();
}

/// Value of the dual program at x, rescaled to ||Ax||_1 = 1: a lower bound on λ_δ(A).
struct DualBound {
  double value = 0.0;
  bool unbounded = false;  // Ax = 0 with ||x||_inf > delta ||x||_1: λ_δ(A) is infinite
};

inline DualBound dual_objective(const TopicMatrix& A, std::span<const double> x, double delta) {
  if (x.size() != A.topics()) throw ValidationError("dual vector length does not match topic count");
  const double x1 = detail::l1_norm(x);
  if (x1 == 0.0) throw ValidationError("dual vector must be nonzero");
  const double numerator = detail::linf_norm(x) - delta * x1;
  const double ax1 = detail::l1_norm(A.apply(x));
  if (ax1 <= 1e-14 * x1) {
    if (numerator > 0.0) return {std::numeric_limits<double>::infinity(), true};
    return {0.0, false};
  }
  return {numerator / ax1, false};
}

/// ||x||_1 / ||Ax||_1, a certified lower bound on κ(A) with x as witness.
struct KappaWitness {
  double value = 0.0;
  bool unbounded = false;
  std::vector<double> witness;
};

inline KappaWitness kappa_ratio(const TopicMatrix& A, std::span<const double> x) {
  if (x.size() != A.topics()) throw ValidationError("witness length does not match topic count");
  const double x1 = detail::l1_norm(x);
  if (x1 == 0.0) throw ValidationError("witness must be nonzero");
  KappaWitness out;
  out.witness.assign(x.begin(), x.end());
  const double ax1 = detail::l1_norm(A.apply(x));
  if (ax1 <= 1e-14 * x1) {
    out.value = std::numeric_limits<double>::infinity();
    out.unbounded = true;
  } else {
    out.value = x1 / ax1;
  }
  return out;
}

/// max(0, (λ(A) - λ_δ(A)) / δ), which lower-bounds κ(A) because λ_δ >= λ - δκ.
inline double kappa_lower_bound_via_delta(double lambda0, double lambda_delta_value, double delta) {
  if (!(delta > 0.0)) throw ValidationError("delta must be positive");
  return std::max(0.0, (lambda0 - lambda_delta_value) / delta);
}

inline double kappa_lower_bound_via_delta(const TopicMatrix& A, double delta, const LpOptions& opts = {}) {
  if (!(delta > 0.0)) throw ValidationError("delta must be positive");
  return kappa_lower_bound_via_delta(lambda_delta(A, 0.0, opts), lambda_delta(A, delta, opts), delta);
}

/// The ±1 vector with +1 on the first ceil(k/2) coordinates.
inline std::vector<double> half_split_vector(std::size_t k) {
  std::vector<double> x(k, -1.0);
  for (std::size_t j = 0; j < (k + 1) / 2; ++j) x[j] = 1.0;
  return x;
}

struct KappaCertificate {
  std::string method;
  double value = 0.0;
  std::vector<double> witness;  // empty for the delta-gap bound
  double delta = 0.0;           // delta-gap bound only
};

struct ConditionReport {
  std::vector<double> delta_grid;
  std::vector<double> lambda_values;
  double lambda0 = 0.0;
  std::vector<KappaCertificate> kappa_lower_bounds;  // best bound per method
  double kappa_lower_bound = 0.0;
  bool lambda_monotone = true;
  /// Set when a κ lower bound exceeds λ(A); consistent with λ <= κ, kept for inspection.
  bool kappa_exceeds_lambda = false;
  std::vector<std::vector<RowSolveInfo>> row_info;  // per delta
};

struct ConditionOptions {
  LpOptions lp;
  std::uint64_t seed = 0;
  std::size_t random_sign_vectors = 200;
};

inline const std::vector<double>& default_delta_grid() {
  static const std::vector<double> grid{0.0, 0.001, 0.01, 0.1};
  return grid;
}

inline ConditionReport condition_report(const TopicMatrix& A, const std::vector<double>& grid,
                                        const ConditionOptions& opts = {}) {
  if (grid.empty()) throw ValidationError("delta grid is empty");
  for (double d : grid) {
    if (!(d >= 0.0 && d < 1.0)) throw ValidationError("delta grid values must lie in [0, 1)");
  }
  ConditionReport report;
  report.delta_grid = grid;
  const std::size_t k = A.topics();

  std::optional<std::vector<RowLP>> exact_rows;
  for (double delta : grid) {
    auto rows = solve_all_rows(A, delta, opts.lp);
    const LinearInverse B = assemble_inverse(A, delta, rows);
    report.lambda_values.push_back(B.lambda_delta());
    report.row_info.push_back(B.row_status());
    if (delta == 0.0 && !exact_rows) exact_rows = std::move(rows);
  }
  if (!exact_rows) exact_rows = solve_all_rows(A, 0.0, opts.lp);
  report.lambda0 = assemble_inverse(A, 0.0, *exact_rows).lambda_delta();

  // Grid order is caller-defined; monotonicity is checked after sorting by delta.
  std::vector<std::size_t> order(grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return grid[a] < grid[b]; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (report.lambda_values[order[i]] > report.lambda_values[order[i - 1]] + opts.lp.tolerance) {
      report.lambda_monotone = false;
    }
  }

  auto consider = [&](const std::string& method, const KappaWitness& w) {
    auto it = std::find_if(report.kappa_lower_bounds.begin(), report.kappa_lower_bounds.end(),
                           [&](const KappaCertificate& c) { return c.method == method; });
    if (it == report.kappa_lower_bounds.end()) {
      report.kappa_lower_bounds.push_back({method, w.value, w.witness, 0.0});
    } else if (w.value > it->value) {
      it->value = w.value;
      it->witness = w.witness;
    }
  };

  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> e(k, 0.0);
    e[j] = 1.0;
    consider("coordinate", kappa_ratio(A, e));
  }
  if (k >= 2) consider("half_split", kappa_ratio(A, half_split_vector(k)));
  Rng rng(opts.seed, "condition-random-signs");
  for (std::size_t s = 0; s < opts.random_sign_vectors; ++s) {
    std::vector<double> x(k);
    for (auto& v : x) v = rng.coin() ? 1.0 : -1.0;
    consider("random_sign", kappa_ratio(A, x));
  }
  for (const auto& row : *exact_rows) {
    if (detail::l1_norm(row.dual_witness) > 0.0) consider("lp_dual_witness", kappa_ratio(A, row.dual_witness));
  }

  KappaCertificate gap{"delta_gap", 0.0, {}, 0.0};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] <= 0.0) continue;
    const double bound = kappa_lower_bound_via_delta(report.lambda0, report.lambda_values[i], grid[i]);
    if (gap.delta == 0.0 || bound > gap.value) {
      gap.value = bound;
      gap.delta = grid[i];
    }
  }
  if (gap.delta > 0.0) report.kappa_lower_bounds.push_back(gap);

  for (const auto& c : report.kappa_lower_bounds) report.kappa_lower_bound = std::max(report.kappa_lower_bound, c.value);
  report.kappa_exceeds_lambda = report.kappa_lower_bound > report.lambda0 + opts.lp.tolerance;
  return report;
}

}  // namespace topicinf
