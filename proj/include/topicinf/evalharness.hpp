#pragma once

// Error-versus-length experiments, top-t overlap and timing.
//
// A run draws, for every (length, trial) pair, a topic vector x* from the
// prior and a document of that length, and runs each requested method on
// it. All randomness comes from streams derived from (seed, length index,
// trial index), so tables do not depend on the thread count.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iterator>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "topicinf/condition.hpp"
#include "topicinf/core.hpp"
#include "topicinf/error.hpp"
#include "topicinf/gibbs.hpp"
#include "topicinf/io.hpp"
#include "topicinf/mle.hpp"
#include "topicinf/parallel.hpp"
#include "topicinf/rng.hpp"
#include "topicinf/synth.hpp"
#include "topicinf/tli.hpp"

namespace topicinf {

enum class Method { tli, tli_unnormalized, tli_mle, tli_map, gibbs };

inline const char* to_string(Method m) noexcept {
  switch (m) {
    case Method::tli: return "TLI";
    case Method::tli_unnormalized: return "TLI-Unnormalized";
    case Method::tli_mle: return "TLI+MLE";
    case Method::tli_map: return "TLI+MAP";
    case Method::gibbs: return "Gibbs";
  }
  return "unknown";
}

inline Method parse_method(std::string_view s) {
  for (Method m : {Method::tli, Method::tli_unnormalized, Method::tli_mle, Method::tli_map, Method::gibbs}) {
    if (s == to_string(m)) return m;
  }
  throw ValidationError("unknown method '" + std::string(s) + "' (TLI, TLI-Unnormalized, TLI+MLE, TLI+MAP, Gibbs)");
}

enum class PriorKind { uniform_sparse, dirichlet };

struct ExperimentConfig {
  std::filesystem::path matrix;  // empty: generate a hard instance
  std::size_t hard_D = 5000;
  std::size_t hard_k = 50;
  std::uint64_t matrix_seed = 1;

  PriorKind prior = PriorKind::uniform_sparse;
  std::size_t r = 5;             // sparsity of x*, and the support size handed to MLE/MAP
  std::optional<double> alpha;   // Dirichlet prior; defaults to r / k

  std::vector<std::size_t> lengths{400, 800, 1600, 3200, 6400};
  std::size_t trials = 200;
  std::vector<Method> methods{Method::tli};
  std::uint64_t seed = 0;

  double delta = 0.0;
  ThresholdMode threshold = ThresholdMode::scaled;
  double divisor = 4.5;
  bool true_support = false;        // MLE/MAP on supp(x*) instead of TLI's top r
  std::optional<double> map_alpha;  // defaults to r / k
  std::size_t gibbs_burnin = 200;
  std::size_t gibbs_samples = 1000;

  void validate() const {
    if (lengths.empty()) throw ValidationError("experiment needs at least one document length");
    if (methods.empty()) throw ValidationError("experiment needs at least one method");
    if (trials < 1) throw ValidationError("trials must be >= 1");
    if (r < 1) throw ValidationError("r must be >= 1");
    for (std::size_t n : lengths) {
      if (n < 1) throw ValidationError("document lengths must be >= 1");
    }
    if (!(delta >= 0.0 && delta < 1.0)) throw ValidationError("delta must lie in [0, 1)");
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = s.find(',', start);
    const std::string item = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

/// Parses flat "key = value" text; '#' starts a comment. Relative matrix
/// paths are resolved against base_dir.
inline ExperimentConfig parse_experiment_config(std::istream& in, const std::string& source,
                                                const std::filesystem::path& base_dir = {}) {
  ExperimentConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (detail::trim(line).empty()) continue;
    const std::string ctx = detail::where(source, line_no);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(ctx + ": expected 'key = value'");
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    auto index = [&] { return detail::parse_index(value, ctx); };
    auto real = [&] { return detail::parse_real(value, ctx); };
    try {
      if (key == "matrix") {
        cfg.matrix = value.empty() ? std::filesystem::path{} : base_dir / value;
      } else if (key == "hard_D") {
        cfg.hard_D = index();
      } else if (key == "hard_k") {
        cfg.hard_k = index();
      } else if (key == "matrix_seed") {
        cfg.matrix_seed = index();
      } else if (key == "prior") {
        if (value == "uniform-sparse") {
          cfg.prior = PriorKind::uniform_sparse;
        } else if (value == "dirichlet") {
          cfg.prior = PriorKind::dirichlet;
        } else {
          throw ValidationError("prior must be uniform-sparse or dirichlet");
        }
      } else if (key == "r") {
        cfg.r = index();
      } else if (key == "alpha") {
        cfg.alpha = real();
      } else if (key == "lengths") {
        cfg.lengths.clear();
        for (const auto& item : detail::split_list(value)) cfg.lengths.push_back(detail::parse_index(item, ctx));
      } else if (key == "trials") {
        cfg.trials = index();
      } else if (key == "methods") {
        cfg.methods.clear();
        for (const auto& item : detail::split_list(value)) cfg.methods.push_back(parse_method(item));
      } else if (key == "seed") {
        cfg.seed = index();
      } else if (key == "delta") {
        cfg.delta = real();
      } else if (key == "threshold") {
        cfg.threshold = parse_threshold_mode(value);
      } else if (key == "divisor") {
        cfg.divisor = real();
      } else if (key == "support") {
        if (value != "tli" && value != "truth") throw ValidationError("support must be tli or truth");
        cfg.true_support = value == "truth";
      } else if (key == "map_alpha") {
        cfg.map_alpha = real();
      } else if (key == "gibbs_burnin") {
        cfg.gibbs_burnin = index();
      } else if (key == "gibbs_samples") {
        cfg.gibbs_samples = index();
      } else {
        throw ParseError("unknown key '" + key + "'");
      }
    } catch (const ParseError& e) {
      const std::string what = e.what();
      throw ParseError(what.rfind(ctx, 0) == 0 ? what : ctx + ": " + what);
    } catch (const ValidationError& e) {
      throw ValidationError(ctx + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  return parse_experiment_config(in, path.string(), path.parent_path());
}

/// Key/value echo of a config, in a fixed order (for manifests).
inline std::vector<std::pair<std::string, std::string>> describe(const ExperimentConfig& cfg) {
  auto join = [](const auto& items, auto fmt) {
    std::string s;
    for (const auto& v : items) s += (s.empty() ? "" : ",") + fmt(v);
    return s;
  };
  std::vector<std::pair<std::string, std::string>> out;
  out.emplace_back("matrix", cfg.matrix.string());
  out.emplace_back("hard_D", std::to_string(cfg.hard_D));
  out.emplace_back("hard_k", std::to_string(cfg.hard_k));
  out.emplace_back("matrix_seed", std::to_string(cfg.matrix_seed));
  out.emplace_back("prior", cfg.prior == PriorKind::uniform_sparse ? "uniform-sparse" : "dirichlet");
  out.emplace_back("r", std::to_string(cfg.r));
  out.emplace_back("alpha", cfg.alpha ? format_real(*cfg.alpha) : "r/k");
  out.emplace_back("lengths", join(cfg.lengths, [](std::size_t n) { return std::to_string(n); }));
  out.emplace_back("trials", std::to_string(cfg.trials));
  out.emplace_back("methods", join(cfg.methods, [](Method m) { return std::string(to_string(m)); }));
  out.emplace_back("seed", std::to_string(cfg.seed));
  out.emplace_back("delta", format_real(cfg.delta));
  out.emplace_back("threshold", to_string(cfg.threshold));
  out.emplace_back("divisor", format_real(cfg.divisor));
  out.emplace_back("support", cfg.true_support ? "truth" : "tli");
  out.emplace_back("map_alpha", cfg.map_alpha ? format_real(*cfg.map_alpha) : "r/k");
  out.emplace_back("gibbs_burnin", std::to_string(cfg.gibbs_burnin));
  out.emplace_back("gibbs_samples", std::to_string(cfg.gibbs_samples));
  return out;
}

// ---------------------------------------------------------------- metrics

/// |top-t_est(est) ∩ top-t_ref(ref)| / t_ref; ties prefer the lower index.
inline double top_overlap(std::span<const double> est, std::span<const double> ref, std::size_t t_est,
                          std::size_t t_ref) {
  if (t_est < 1 || t_ref < 1) throw ValidationError("top-t sizes must be >= 1");
  const auto a = top_indices(est, t_est);
  const auto b = top_indices(ref, t_ref);
  std::vector<std::size_t> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
  return static_cast<double>(both.size()) / static_cast<double>(t_ref);
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

inline double mean(std::span<const double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("slope needs at least two paired points");
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ValidationError("log-log slope needs positive values");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const double mx = mean(lx), my = mean(ly);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

// ---------------------------------------------------------------- error curves

struct TrialOutcome {
  bool ok = false;
  double l1 = 0.0, linf = 0.0;
  double word_l1 = 0.0;  // ||A x_hat - A x*||_1
  double precision = 0.0, recall = 0.0;
  bool exact_support = false;
  double seconds = 0.0;
};

struct ErrorRow {
  Method method = Method::tli;
  std::size_t length = 0;
  std::size_t trials = 0;
  std::size_t failed = 0;
  double median_l1 = 0.0, mean_l1 = 0.0;
  double pessimistic_median_l1 = 0.0;  // failed trials counted as error 2
  double median_linf = 0.0, mean_linf = 0.0;
  double median_word_l1 = 0.0;
  double precision = 0.0, recall = 0.0;  // means over successful trials
  double exact_support_rate = 0.0;
  double median_seconds = 0.0, mean_seconds = 0.0;
};

struct ErrorTable {
  std::vector<ErrorRow> rows;  // method-major, lengths in config order
  double lambda_delta = 0.0;   // of the inverse used by the TLI variants

  const ErrorRow& at(Method m, std::size_t length) const {
    for (const auto& r : rows) {
      if (r.method == m && r.length == length) return r;
    }
    throw ValidationError(std::string("no row for ") + to_string(m) + " at length " + std::to_string(length));
  }
};

namespace detail {

inline TrialOutcome score(const TopicMatrix& A, const TopicVector& truth, std::span<const double> est,
                          const std::vector<double>& truth_words) {
  TrialOutcome o;
  o.ok = true;
  o.l1 = l1_distance(est, truth.values());
  o.linf = linf_distance(est, truth.values());
  o.word_l1 = l1_distance(A.apply(est), truth_words);
  const auto true_support = truth.support();
  std::vector<std::size_t> est_support;
  for (std::size_t i = 0; i < est.size(); ++i) {
    if (est[i] > 0.0) est_support.push_back(i);
  }
  std::vector<std::size_t> both;
  std::set_intersection(est_support.begin(), est_support.end(), true_support.begin(), true_support.end(),
                        std::back_inserter(both));
  o.precision = est_support.empty() ? 0.0 : static_cast<double>(both.size()) / static_cast<double>(est_support.size());
  o.recall = static_cast<double>(both.size()) / static_cast<double>(true_support.size());
  o.exact_support = est_support == true_support;
  return o;
}

inline TopicMatrix experiment_matrix(const ExperimentConfig& cfg) {
  if (!cfg.matrix.empty()) return load_topic_matrix(cfg.matrix);
  return gen_hard_matrix(cfg.hard_D, cfg.hard_k, cfg.matrix_seed).A;
}

}  // namespace detail

/// Draws x* for trial (length index li, trial t).
inline TopicVector experiment_truth(const ExperimentConfig& cfg, std::size_t k, std::size_t li, std::size_t t) {
  const std::uint64_t s = derive_seed(cfg.seed, "trial-x", {li, t});
  if (cfg.prior == PriorKind::uniform_sparse) return gen_uniform_sparse_x(k, cfg.r, s);
  return gen_dirichlet_x(k, cfg.alpha.value_or(static_cast<double>(cfg.r) / static_cast<double>(k)), s);
}

/// Runs one trial of every configured method against a precomputed inverse.
inline std::vector<TrialOutcome> run_trial(const ExperimentConfig& cfg, const TopicMatrix& A, const LinearInverse& B,
                                           std::size_t li, std::size_t t) {
  using Clock = std::chrono::steady_clock;
  const std::size_t k = A.topics();
  const std::size_t n = cfg.lengths[li];
  const TopicVector truth = experiment_truth(cfg, k, li, t);
  const SparseDocument doc = gen_document(A, truth, n, derive_seed(cfg.seed, "trial-doc", {li, t}));
  const std::vector<double> truth_words = A.apply(truth.values());
  const double sparse_alpha = static_cast<double>(cfg.r) / static_cast<double>(k);

  TLIOptions tli_opts;
  tli_opts.mode = cfg.threshold;
  tli_opts.scale_divisor = cfg.divisor;
  tli_opts.r = cfg.r;

  std::vector<TrialOutcome> out;
  for (Method m : cfg.methods) {
    const auto start = Clock::now();
    std::vector<double> est;
    try {
      switch (m) {
        case Method::tli:
        case Method::tli_unnormalized: {
          TLIOptions o = tli_opts;
          o.normalize = m == Method::tli;
          const auto res = tli_estimate(B, doc, o);
          est.assign(res.thresholded.values().begin(), res.thresholded.values().end());
          break;
        }
        case Method::tli_mle:
        case Method::tli_map: {
          std::vector<std::size_t> support;
          if (cfg.true_support) {
            support = truth.support();
          } else {
            support = top_indices(linear_inverse_estimate(B, doc), cfg.r);
          }
          const TopicVector init = uniform_on(k, support);
          const AscentResult res = m == Method::tli_mle
                                       ? mle_on_support(A, doc, support, init)
                                       : map_on_support(A, doc, support, cfg.map_alpha.value_or(sparse_alpha), init);
          est.assign(res.x.values().begin(), res.x.values().end());
          break;
        }
        case Method::gibbs: {
          GibbsConfig g;
          g.alpha = cfg.alpha.value_or(sparse_alpha);
          g.burnin = cfg.gibbs_burnin;
          g.samples = cfg.gibbs_samples;
          g.seed = derive_seed(cfg.seed, "trial-gibbs", {li, t});
          est = gibbs_infer(A, doc, g).mean;
          break;
        }
      }
    } catch (const Error&) {
      out.push_back({});
      out.back().seconds = std::chrono::duration<double>(Clock::now() - start).count();
      continue;
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    out.push_back(detail::score(A, truth, est, truth_words));
    out.back().seconds = seconds;
  }
  return out;
}

inline ErrorTable aggregate(const ExperimentConfig& cfg, const std::vector<std::vector<TrialOutcome>>& outcomes) {
  ErrorTable table;
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    for (std::size_t li = 0; li < cfg.lengths.size(); ++li) {
      ErrorRow row;
      row.method = cfg.methods[mi];
      row.length = cfg.lengths[li];
      row.trials = cfg.trials;
      std::vector<double> l1, pessimistic, linf, word, precision, recall, seconds;
      std::size_t exact = 0;
      for (std::size_t t = 0; t < cfg.trials; ++t) {
        const TrialOutcome& o = outcomes[li * cfg.trials + t][mi];
        seconds.push_back(o.seconds);
        if (!o.ok) {
          ++row.failed;
          pessimistic.push_back(2.0);
          continue;
        }
        l1.push_back(o.l1);
        pessimistic.push_back(o.l1);
        linf.push_back(o.linf);
        word.push_back(o.word_l1);
        precision.push_back(o.precision);
        recall.push_back(o.recall);
        if (o.exact_support) ++exact;
      }
      row.median_l1 = median(l1);
      row.mean_l1 = mean(l1);
      row.pessimistic_median_l1 = median(pessimistic);
      row.median_linf = median(linf);
      row.mean_linf = mean(linf);
      row.median_word_l1 = median(word);
      row.precision = mean(precision);
      row.recall = mean(recall);
      row.exact_support_rate = static_cast<double>(exact) / static_cast<double>(cfg.trials);
      row.median_seconds = median(seconds);
      row.mean_seconds = mean(seconds);
      table.rows.push_back(row);
    }
  }
  return table;
}

inline ErrorTable run_error_curve(const ExperimentConfig& cfg, const TopicMatrix& A, const LinearInverse& B,
                                  std::size_t threads = 0) {
  cfg.validate();
  if (B.vocab_size() != A.vocab_size() || B.topics() != A.topics()) {
    throw ValidationError("inverse shape does not match the topic matrix");
  }
  if (cfg.r > A.topics()) throw ValidationError("r exceeds the topic count");
  const std::size_t total = cfg.lengths.size() * cfg.trials;
  std::vector<std::vector<TrialOutcome>> outcomes(total);
  parallel_for(total, threads, [&](std::size_t i) {
    outcomes[i] = run_trial(cfg, A, B, i / cfg.trials, i % cfg.trials);
  });
  ErrorTable table = aggregate(cfg, outcomes);
  table.lambda_delta = B.lambda_delta();
  return table;
}

inline ErrorTable run_error_curve(const ExperimentConfig& cfg, std::size_t threads = 0) {
  cfg.validate();
  const TopicMatrix A = detail::experiment_matrix(cfg);
  LpOptions lp;
  lp.threads = threads;
  const LinearInverse B = min_variance_inverse(A, cfg.delta, lp);
  return run_error_curve(cfg, A, B, threads);
}

/// errors.csv: deterministic columns only (no timings).
inline void write_error_csv(std::ostream& out, const ErrorTable& table) {
  out << "method,length,trials,failed,median_l1,mean_l1,pessimistic_median_l1,median_linf,mean_linf,"
         "median_word_l1,precision,recall,exact_support_rate\n";
  for (const auto& r : table.rows) {
    out << to_string(r.method) << ',' << r.length << ',' << r.trials << ',' << r.failed << ','
        << format_real(r.median_l1) << ',' << format_real(r.mean_l1) << ',' << format_real(r.pessimistic_median_l1)
        << ',' << format_real(r.median_linf) << ',' << format_real(r.mean_linf) << ','
        << format_real(r.median_word_l1) << ',' << format_real(r.precision) << ',' << format_real(r.recall) << ','
        << format_real(r.exact_support_rate) << '\n';
  }
}

inline void write_timing_csv(std::ostream& out, const ErrorTable& table) {
  out << "method,length,median_seconds_per_doc,mean_seconds_per_doc\n";
  for (const auto& r : table.rows) {
    out << to_string(r.method) << ',' << r.length << ',' << format_real(r.median_seconds) << ','
        << format_real(r.mean_seconds) << '\n';
  }
}

// ---------------------------------------------------------------- bench

struct BenchConfig {
  std::vector<std::size_t> lengths{400, 800, 1600, 3200};
  std::size_t repetitions = 10;
  std::size_t gibbs_sweeps = 20;
  std::size_t r = 5;
  std::uint64_t seed = 0;
};

struct BenchRow {
  std::size_t length = 0;
  double tli_seconds = 0.0;    // median per document
  double gibbs_seconds = 0.0;  // median per document for gibbs_sweeps sweeps
  double gibbs_seconds_per_sweep = 0.0;
  double ratio = 0.0;  // gibbs / tli
};

/// Wall times of TLI and of a fixed number of Gibbs sweeps on the same documents.
inline std::vector<BenchRow> bench(const BenchConfig& cfg, const TopicMatrix& A, const LinearInverse& B) {
  using Clock = std::chrono::steady_clock;
  if (cfg.gibbs_sweeps < 2) throw ValidationError("bench needs at least two Gibbs sweeps");
  if (cfg.repetitions < 1) throw ValidationError("bench needs at least one repetition");
  const std::size_t k = A.topics();
  std::vector<BenchRow> rows;
  for (std::size_t li = 0; li < cfg.lengths.size(); ++li) {
    std::vector<double> tli_times, gibbs_times;
    for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
      const TopicVector x = gen_uniform_sparse_x(k, std::min(cfg.r, k), derive_seed(cfg.seed, "bench-x", {li, rep}));
      const SparseDocument doc = gen_document(A, x, cfg.lengths[li], derive_seed(cfg.seed, "bench-doc", {li, rep}));

      TLIOptions o;
      o.mode = ThresholdMode::scaled;
      auto start = Clock::now();
      const auto est = tli_estimate(B, doc, o);
      tli_times.push_back(std::chrono::duration<double>(Clock::now() - start).count());
      if (est.raw.size() != k) throw NumericalError("unexpected estimate size");

      GibbsConfig g;
      g.alpha = static_cast<double>(cfg.r) / static_cast<double>(k);
      g.burnin = cfg.gibbs_sweeps - 1;
      g.samples = 1;
      g.seed = derive_seed(cfg.seed, "bench-gibbs", {li, rep});
      start = Clock::now();
      const auto trace = gibbs_infer(A, doc, g);
      gibbs_times.push_back(std::chrono::duration<double>(Clock::now() - start).count());
      if (trace.estimates.empty()) throw NumericalError("Gibbs produced no sample");
    }
    BenchRow row;
    row.length = cfg.lengths[li];
    row.tli_seconds = median(tli_times);
    row.gibbs_seconds = median(gibbs_times);
    row.gibbs_seconds_per_sweep = row.gibbs_seconds / static_cast<double>(cfg.gibbs_sweeps);
    row.ratio = row.gibbs_seconds / row.tli_seconds;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace topicinf
