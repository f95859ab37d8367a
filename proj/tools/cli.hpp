#pragma once

// Subcommand wiring for the topicinf binary. dispatch() never exits the
// process, so tests can drive it directly.
//
// Exit codes: 0 success, 1 usage error, 2 data or validation error,
// 3 numerical failure (infeasible LP, iteration limit, degenerate estimate).

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "topicinf/topicinf.hpp"

namespace topicinf::cli {

using nlohmann::json;

enum class LogLevel { error, warn, info, debug };

struct GlobalOptions {
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::size_t threads = 0;  // 0: all cores
  LogLevel log_level = LogLevel::warn;
};

class Logger {
 public:
  Logger(std::ostream& err, const LogLevel& level) : err_(err), level_(level) {}
  void info(const std::string& msg) const { emit(LogLevel::info, "info", msg); }
  void warn(const std::string& msg) const { emit(LogLevel::warn, "warning", msg); }
  void error(const std::string& msg) const { emit(LogLevel::error, "error", msg); }

 private:
  void emit(LogLevel at, const char* tag, const std::string& msg) const {
    if (static_cast<int>(at) <= static_cast<int>(level_)) err_ << "topicinf: " << tag << ": " << msg << '\n';
  }
  std::ostream& err_;
  const LogLevel& level_;
};

namespace detail {

/// JSON number, or null for non-finite values.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(std::span<const double> v) {
  json a = json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

inline void write_json(const std::string& path, const json& j, std::ostream& out) {
  if (path.empty()) {
    out << j.dump(2) << '\n';
    return;
  }
  auto f = topicinf::detail::open_out(path);
  f << j.dump(2) << '\n';
}

inline std::vector<std::vector<std::size_t>> load_supports(const std::filesystem::path& path, std::size_t k) {
  const std::string source = path.string();
  auto in = topicinf::detail::open_in(path);
  std::vector<std::vector<std::size_t>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string ctx = topicinf::detail::where(source, line_no);
    std::string_view body = line;
    if (const auto tab = body.find('\t'); tab != std::string_view::npos) body.remove_prefix(tab + 1);
    std::string cleaned(body);
    for (auto& ch : cleaned) {
      if (ch == ',') ch = ' ';
    }
    std::vector<std::size_t> support;
    for (auto token : topicinf::detail::split_ws(cleaned)) support.push_back(topicinf::detail::parse_index(token, ctx));
    if (support.empty()) throw ParseError(ctx + ": empty support");
    for (std::size_t j : support) {
      if (j >= k) throw ValidationError(ctx + ": topic " + std::to_string(j) + " out of range for k=" + std::to_string(k));
    }
    out.push_back(std::move(support));
  }
  return out;
}

inline void save_supports(const std::filesystem::path& path, const std::vector<std::vector<std::size_t>>& supports) {
  auto out = topicinf::detail::open_out(path);
  for (std::size_t d = 0; d < supports.size(); ++d) {
    out << d << '\t';
    for (std::size_t i = 0; i < supports[d].size(); ++i) out << (i ? " " : "") << supports[d][i];
    out << '\n';
  }
}

inline json report_to_json(const ConditionReport& r) {
  json j;
  j["delta_grid"] = to_json(r.delta_grid);
  j["lambda_values"] = to_json(r.lambda_values);
  j["lambda0"] = number(r.lambda0);
  j["kappa_lower_bound"] = number(r.kappa_lower_bound);
  j["lambda_monotone"] = r.lambda_monotone;
  j["kappa_exceeds_lambda"] = r.kappa_exceeds_lambda;
  json certs = json::array();
  for (const auto& c : r.kappa_lower_bounds) {
    json e{{"method", c.method}, {"value", number(c.value)}};
    if (!c.witness.empty()) e["witness"] = to_json(c.witness);
    if (c.delta > 0.0) e["delta"] = c.delta;
    certs.push_back(e);
  }
  j["kappa_lower_bounds"] = certs;
  json rows = json::array();
  for (const auto& per_delta : r.row_info) {
    json a = json::array();
    for (const auto& info : per_delta) {
      a.push_back({{"status", to_string(info.status)},
                   {"objective", number(info.objective)},
                   {"lower_bound", number(info.lower_bound)},
                   {"iterations", info.iterations}});
    }
    rows.push_back(a);
  }
  j["rows"] = rows;
  return j;
}

}  // namespace detail

/// Parses and runs one command line. `args` excludes the program name.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  GlobalOptions g;
  Logger log(err, g.log_level);
  CLI::App app{"Sparse topic-proportion inference with minimum-variance linear inverses", "topicinf"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.fallthrough();
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (default: all cores)")->check(CLI::PositiveNumber);
  const std::map<std::string, LogLevel> levels{
      {"error", LogLevel::error}, {"warn", LogLevel::warn}, {"info", LogLevel::info}, {"debug", LogLevel::debug}};
  app.add_option("--log-level", g.log_level, "error, warn, info or debug")
      ->transform(CLI::CheckedTransformer(levels, CLI::ignore_case));

  std::function<int()> action;

  // ------------------------------------------------------------ condition
  std::string matrix_path, out_path;
  std::vector<double> deltas = default_delta_grid();
  std::size_t random_signs = 200;
  double tolerance = 1e-7;
  auto* condition = app.add_subcommand("condition", "Report lambda_delta over a delta grid and kappa lower bounds");
  condition->add_option("--matrix", matrix_path, "Topic matrix file")->required();
  condition->add_option("--deltas", deltas, "Comma-separated delta grid")->delimiter(',');
  condition->add_option("--random-signs", random_signs, "Random sign vectors tried as kappa witnesses");
  condition->add_option("--tolerance", tolerance, "Duality-gap tolerance");
  condition->add_option("--out", out_path, "Report JSON (default: stdout)");
  condition->callback([&] {
    action = [&] {
      const TopicMatrix A = load_topic_matrix(matrix_path);
      ConditionOptions opts;
      opts.lp.tolerance = tolerance;
      opts.lp.threads = g.threads;
      opts.seed = g.seed;
      opts.random_sign_vectors = random_signs;
      const ConditionReport report = condition_report(A, deltas, opts);
      json j = detail::report_to_json(report);
      j["seed"] = g.seed;
      j["version"] = kVersion;
      detail::write_json(out_path, j, out);
      return 0;
    };
  });

  // ------------------------------------------------------------ invert
  double delta = 0.0;
  auto* invert = app.add_subcommand("invert", "Compute the delta-biased minimum-variance inverse");
  invert->add_option("--matrix", matrix_path, "Topic matrix file")->required();
  invert->add_option("--delta", delta, "Bias level in [0, 1)")->capture_default_str();
  invert->add_option("--tolerance", tolerance, "Duality-gap tolerance");
  invert->add_option("--out", out_path, "Inverse file")->required();
  invert->callback([&] {
    action = [&] {
      const TopicMatrix A = load_topic_matrix(matrix_path);
      LpOptions lp;
      lp.tolerance = tolerance;
      lp.threads = g.threads;
      const LinearInverse B = min_variance_inverse(A, delta, lp);
      std::size_t limited = 0;
      for (const auto& r : B.row_status()) limited += r.status == RowStatus::tolerance_limited;
      if (limited > 0) log.warn(std::to_string(limited) + " rows were not certified optimal within tolerance");
      log.info("lambda_delta = " + format_real(B.lambda_delta()));
      save_inverse(out_path, B);
      return 0;
    };
  });

  // ------------------------------------------------------------ infer
  std::string inverse_path, docs_path, mode_name = "theoretical", supports_out, raw_out;
  double divisor = 4.5;
  bool normalize = false;
  std::size_t top_r = 0;
  auto* infer = app.add_subcommand("infer", "Thresholded linear inverse estimates for a document file");
  infer->add_option("--matrix", matrix_path, "Topic matrix file (checked against the inverse)");
  infer->add_option("--inverse", inverse_path, "Inverse file")->required();
  infer->add_option("--docs", docs_path, "Document file")->required();
  auto* mode_opt = infer->add_option("--mode", mode_name, "theoretical, scaled or top_r")->capture_default_str();
  infer->add_option("--divisor", divisor, "Threshold divisor for scaled mode")->capture_default_str();
  infer->add_flag("--normalize", normalize, "Clip negatives and rescale survivors to sum 1");
  infer->add_option("--top-r", top_r, "Keep the r largest coordinates (implies --mode top_r)");
  infer->add_option("--out", out_path, "Estimates TSV")->required();
  infer->add_option("--raw-out", raw_out, "Unthresholded estimates TSV");
  infer->add_option("--supports-out", supports_out, "Supports of the thresholded estimates");
  infer->callback([&] {
    action = [&] {
      const LinearInverse B = load_inverse(inverse_path);
      if (!matrix_path.empty()) {
        const TopicMatrix A = load_topic_matrix(matrix_path);
        if (A.vocab_size() != B.vocab_size() || A.topics() != B.topics()) {
          throw ValidationError("inverse " + inverse_path + " does not match matrix " + matrix_path);
        }
      }
      TLIOptions opts;
      opts.mode = parse_threshold_mode(mode_name);
      if (top_r > 0 && mode_opt->count() == 0) opts.mode = ThresholdMode::top_r;
      opts.r = top_r;
      opts.scale_divisor = divisor;
      opts.normalize = normalize;
      const auto docs = load_documents(docs_path, B.vocab_size());
      std::vector<TLIResult> results(docs.size());
      parallel_for(docs.size(), g.threads, [&](std::size_t d) {
        try {
          results[d] = tli_estimate(B, docs[d], opts);
        } catch (const NumericalError& e) {
          throw NumericalError("document " + std::to_string(d) + ": " + e.what());
        }
      });
      std::vector<std::vector<double>> est, raw;
      std::vector<std::vector<std::size_t>> supports;
      for (const auto& r : results) {
        est.emplace_back(r.thresholded.values().begin(), r.thresholded.values().end());
        raw.emplace_back(r.raw.values().begin(), r.raw.values().end());
        supports.push_back(r.thresholded.support());
      }
      save_vectors(out_path, est);
      if (!raw_out.empty()) save_vectors(raw_out, raw);
      if (!supports_out.empty()) {
        for (std::size_t d = 0; d < supports.size(); ++d) {
          if (supports[d].empty()) throw NumericalError("document " + std::to_string(d) + ": empty support");
        }
        detail::save_supports(supports_out, supports);
      }
      return 0;
    };
  });

  // ------------------------------------------------------------ refine
  std::string supports_path, refine_mode = "mle";
  std::optional<double> alpha;
  auto* refine = app.add_subcommand("refine", "Likelihood or posterior ascent on given supports");
  refine->add_option("--matrix", matrix_path, "Topic matrix file")->required();
  refine->add_option("--docs", docs_path, "Document file")->required();
  refine->add_option("--supports", supports_path, "One support per document: [docid<TAB>]t1 t2 ...")->required();
  refine->add_option("--mode", refine_mode, "mle or map")->check(CLI::IsMember({"mle", "map"}))->capture_default_str();
  refine->add_option("--alpha", alpha, "Dirichlet concentration for map mode (default r/k)");
  refine->add_option("--out", out_path, "Estimates TSV")->required();
  refine->callback([&] {
    action = [&] {
      const TopicMatrix A = load_topic_matrix(matrix_path);
      const auto docs = load_documents(docs_path, A.vocab_size());
      const auto supports = detail::load_supports(supports_path, A.topics());
      if (supports.size() != docs.size()) {
        throw ValidationError(supports_path + " has " + std::to_string(supports.size()) + " supports for " +
                              std::to_string(docs.size()) + " documents");
      }
      std::vector<AscentResult> results(docs.size());
      parallel_for(docs.size(), g.threads, [&](std::size_t d) {
        try {
          const TopicVector init = uniform_on(A.topics(), supports[d]);
          if (refine_mode == "mle") {
            results[d] = mle_on_support(A, docs[d], supports[d], init);
          } else {
            const double a = alpha.value_or(static_cast<double>(supports[d].size()) / static_cast<double>(A.topics()));
            results[d] = map_on_support(A, docs[d], supports[d], a, init);
          }
        } catch (const ValidationError& e) {
          throw ValidationError("document " + std::to_string(d) + ": " + e.what());
        } catch (const NumericalError& e) {
          throw NumericalError("document " + std::to_string(d) + ": " + e.what());
        }
      });
      std::vector<std::vector<double>> est;
      for (std::size_t d = 0; d < results.size(); ++d) {
        const auto& r = results[d];
        if (!r.excluded_words.empty()) {
          log.warn("document " + std::to_string(d) + ": " + std::to_string(r.excluded_words.size()) +
                   " words impossible under the support were left out");
        }
        if (!r.converged) log.info("document " + std::to_string(d) + ": ascent stopped before convergence");
        est.emplace_back(r.x.values().begin(), r.x.values().end());
      }
      save_vectors(out_path, est);
      return 0;
    };
  });

  // ------------------------------------------------------------ fisher
  std::string x_path, doc_line;
  auto* fisher = app.add_subcommand("fisher", "Expected and empirical Fisher matrices at a point");
  fisher->add_option("--matrix", matrix_path, "Topic matrix file")->required();
  fisher->add_option("--x", x_path, "File holding one k-vector; its support is used")->required();
  fisher->add_option("--doc", doc_line, "Document as 'word:count ...'")->required();
  fisher->add_option("--out", out_path, "JSON output (default: stdout)");
  fisher->callback([&] {
    action = [&] {
      const TopicMatrix A = load_topic_matrix(matrix_path);
      const auto rows = load_vectors(x_path, A.topics());
      if (rows.size() != 1) throw ValidationError(x_path + " must hold exactly one vector");
      const TopicVector x = TopicVector::simplex_point(rows[0]);
      const SparseDocument y = parse_document(doc_line, "--doc");
      y.check_vocab(A.vocab_size());
      const SupportRestriction R(A, x.support());
      const FisherDiagnostics f = fisher_psd_check(R, R.restrict_vector(x.values()), y);
      auto matrix_json = [](const Eigen::MatrixXd& M) {
        json a = json::array();
        for (Eigen::Index i = 0; i < M.rows(); ++i) {
          json row = json::array();
          for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(detail::number(M(i, j)));
          a.push_back(row);
        }
        return a;
      };
      json j{{"support", x.support()},
             {"Q", matrix_json(f.Q)},
             {"Q_hat", matrix_json(f.Q_hat)},
             {"psd_ratio", detail::number(f.psd_ratio)},
             {"min_eig_Q", detail::number(f.min_eig_Q)},
             {"Q_rank_deficient", f.Q_rank_deficient}};
      detail::write_json(out_path, j, out);
      return 0;
    };
  });

  // ------------------------------------------------------------ gibbs
  GibbsConfig gibbs_cfg;
  std::string trace_out;
  auto* gibbs = app.add_subcommand("gibbs", "Collapsed Gibbs sampling with the topic matrix fixed");
  gibbs->add_option("--matrix", matrix_path, "Topic matrix file")->required();
  gibbs->add_option("--docs", docs_path, "Document file")->required();
  gibbs->add_option("--alpha", gibbs_cfg.alpha, "Dirichlet concentration (usually r/k)")->required();
  gibbs->add_option("--burnin", gibbs_cfg.burnin, "Burn-in sweeps")->capture_default_str();
  gibbs->add_option("--samples", gibbs_cfg.samples, "Retained sweeps")->capture_default_str();
  gibbs->add_option("--thin", gibbs_cfg.thin, "Keep every t-th sweep")->capture_default_str();
  gibbs->add_option("--out", out_path, "Mean estimates TSV")->required();
  gibbs->add_option("--trace-out", trace_out, "Per-sweep estimates: docid, sweep, k values");
  gibbs->callback([&] {
    action = [&] {
      const TopicMatrix A = load_topic_matrix(matrix_path);
      const auto docs = load_documents(docs_path, A.vocab_size());
      std::vector<GibbsTrace> traces(docs.size());
      parallel_for(docs.size(), g.threads, [&](std::size_t d) {
        GibbsConfig c = gibbs_cfg;
        c.seed = derive_seed(g.seed, "gibbs-document", {d});
        try {
          traces[d] = gibbs_infer(A, docs[d], c);
        } catch (const ValidationError& e) {
          throw ValidationError("document " + std::to_string(d) + ": " + e.what());
        }
      });
      std::vector<std::vector<double>> means;
      for (const auto& t : traces) means.push_back(t.mean);
      save_vectors(out_path, means);
      if (!trace_out.empty()) {
        auto f = topicinf::detail::open_out(trace_out);
        for (std::size_t d = 0; d < traces.size(); ++d) {
          for (std::size_t s = 0; s < traces[d].estimates.size(); ++s) {
            write_vector_line(f, std::to_string(d) + '\t' + std::to_string(s), traces[d].estimates[s]);
          }
        }
      }
      return 0;
    };
  });

  // ------------------------------------------------------------ generate
  auto* generate = app.add_subcommand("generate", "Synthetic matrices, corpora and indistinguishable pairs");
  generate->require_subcommand(1);

  std::size_t D = 0, k = 0;
  bool hard = false;
  std::string explicit_out;
  auto* gen_matrix = generate->add_subcommand("matrix", "Random half-support topic matrix");
  gen_matrix->add_flag("--hard", hard, "Random half-support construction (the only generator)")->required();
  gen_matrix->add_option("--D", D, "Vocabulary size")->required();
  gen_matrix->add_option("--k", k, "Topic count")->required();
  gen_matrix->add_option("--out", out_path, "Matrix file")->required();
  gen_matrix->add_option("--explicit-out", explicit_out, "Also write the ±1 inverse as an inverse file (delta = its bias)");
  gen_matrix->callback([&] {
    action = [&] {
      const HardInstance h = gen_hard_matrix(D, k, g.seed);
      save_topic_matrix(out_path, h.A);
      if (!explicit_out.empty()) save_inverse(explicit_out, LinearInverse(h.B_explicit, explicit_inverse_bias(h)));
      return 0;
    };
  });

  std::string prior_name = "uniform-sparse", truth_out;
  std::size_t r = 5, n_docs = 0, n_words = 0;
  auto* gen_corpus = generate->add_subcommand("corpus", "Documents drawn from A x with x from a prior");
  gen_corpus->add_option("--matrix", matrix_path, "Topic matrix file")->required();
  gen_corpus->add_option("--prior", prior_name, "uniform-sparse or dirichlet")
      ->check(CLI::IsMember({"uniform-sparse", "dirichlet"}))
      ->capture_default_str();
  gen_corpus->add_option("--r", r, "Sparsity (uniform-sparse) and default alpha = r/k (dirichlet)")->capture_default_str();
  gen_corpus->add_option("--alpha", alpha, "Dirichlet concentration");
  gen_corpus->add_option("--docs", n_docs, "Number of documents")->required()->check(CLI::PositiveNumber);
  gen_corpus->add_option("--words", n_words, "Words per document")->required()->check(CLI::PositiveNumber);
  gen_corpus->add_option("--out", out_path, "Document file")->required();
  gen_corpus->add_option("--truth", truth_out, "True topic vectors TSV");
  gen_corpus->callback([&] {
    action = [&] {
      const TopicMatrix A = load_topic_matrix(matrix_path);
      const std::size_t kk = A.topics();
      std::vector<TopicVector> truth(n_docs);
      std::vector<std::optional<SparseDocument>> docs(n_docs);
      parallel_for(n_docs, g.threads, [&](std::size_t d) {
        const std::uint64_t xs = derive_seed(g.seed, "corpus-x", {d});
        truth[d] = prior_name == "uniform-sparse"
                       ? gen_uniform_sparse_x(kk, r, xs)
                       : gen_dirichlet_x(kk, alpha.value_or(static_cast<double>(r) / static_cast<double>(kk)), xs);
        docs[d] = gen_document(A, truth[d], n_words, derive_seed(g.seed, "corpus-doc", {d}));
      });
      std::vector<SparseDocument> plain;
      plain.reserve(n_docs);
      for (auto& d : docs) plain.push_back(std::move(*d));
      save_documents(out_path, plain);
      if (!truth_out.empty()) {
        std::vector<std::vector<double>> rows;
        for (const auto& t : truth) rows.emplace_back(t.values().begin(), t.values().end());
        save_vectors(truth_out, rows);
      }
      return 0;
    };
  });

  auto* gen_pair = generate->add_subcommand("pair", "Uniform vectors on nested supports and their divergences");
  gen_pair->add_option("--matrix", matrix_path, "Topic matrix file")->required();
  gen_pair->add_option("--r", r, "Support size")->required();
  gen_pair->add_option("--out", out_path, "JSON output (default: stdout)");
  gen_pair->callback([&] {
    action = [&] {
      const TopicMatrix A = load_topic_matrix(matrix_path);
      const IndistinguishablePair p = gen_indistinguishable_pair(A, r, g.seed);
      json j{{"x", detail::to_json(p.x.values())},
             {"x_minus", detail::to_json(p.x_minus.values())},
             {"support", p.support},
             {"removed", p.removed},
             {"chi_square", detail::number(p.chi_square)},
             {"chi_square_infinite", std::isinf(p.chi_square)},
             {"kl", detail::number(p.kl)},
             {"kl_infinite", std::isinf(p.kl)},
             {"balanced_chi_square", detail::number(p.balanced_chi_square)},
             {"balanced_kl", detail::number(p.balanced_kl)},
             {"balanced_mass", detail::number(p.balanced_mass)},
             {"seed", g.seed}};
      detail::write_json(out_path, j, out);
      return 0;
    };
  });

  // ------------------------------------------------------------ evaluate
  std::string config_path, out_dir;
  auto* evaluate = app.add_subcommand("evaluate", "Error-versus-length experiment from a config file");
  evaluate->add_option("--config", config_path, "Flat key = value config")->required();
  evaluate->add_option("--out-dir", out_dir, "Directory for errors.csv, timing.csv, manifest.json")->required();
  evaluate->callback([&] {
    action = [&] {
      ExperimentConfig cfg = load_experiment_config(config_path);
      if (g.seed_given) cfg.seed = g.seed;
      const ErrorTable table = run_error_curve(cfg, g.threads);
      std::filesystem::create_directories(out_dir);
      const std::filesystem::path dir(out_dir);
      {
        auto f = topicinf::detail::open_out(dir / "errors.csv");
        write_error_csv(f, table);
      }
      {
        auto f = topicinf::detail::open_out(dir / "timing.csv");
        write_timing_csv(f, table);
      }
      json config = json::object();
      for (const auto& [key, value] : describe(cfg)) config[key] = value;
      json manifest{{"version", kVersion},
                    {"seed", cfg.seed},
                    {"config", config},
                    {"lambda_delta", detail::number(table.lambda_delta)},
                    {"outputs", {"errors.csv", "timing.csv"}}};
      auto f = topicinf::detail::open_out(dir / "manifest.json");
      f << manifest.dump(2) << '\n';
      return 0;
    };
  });

  // ------------------------------------------------------------ bench
  BenchConfig bench_cfg;
  auto* bench_cmd = app.add_subcommand("bench", "Wall time of TLI against a fixed number of Gibbs sweeps");
  bench_cmd->add_option("--matrix", matrix_path, "Topic matrix file (default: hard instance D=5000, k=50, seed 1)");
  bench_cmd->add_option("--delta", delta, "Bias level of the inverse")->capture_default_str();
  bench_cmd->add_option("--lengths", bench_cfg.lengths, "Document lengths")->delimiter(',');
  bench_cmd->add_option("--reps", bench_cfg.repetitions, "Documents per length")->capture_default_str();
  bench_cmd->add_option("--sweeps", bench_cfg.gibbs_sweeps, "Gibbs sweeps per document")->capture_default_str();
  bench_cmd->add_option("--r", bench_cfg.r, "Sparsity of the sampled topic vectors")->capture_default_str();
  bench_cmd->add_option("--out", out_path, "CSV output (default: stdout)");
  bench_cmd->callback([&] {
    action = [&] {
      const TopicMatrix A = matrix_path.empty() ? gen_hard_matrix(5000, 50, 1).A : load_topic_matrix(matrix_path);
      LpOptions lp;
      lp.threads = g.threads;
      const LinearInverse B = min_variance_inverse(A, delta, lp);
      bench_cfg.seed = g.seed;
      const auto rows = topicinf::bench(bench_cfg, A, B);
      std::ostringstream csv;
      csv << "length,tli_seconds,gibbs_seconds,gibbs_seconds_per_sweep,ratio\n";
      for (const auto& row : rows) {
        csv << row.length << ',' << format_real(row.tli_seconds) << ',' << format_real(row.gibbs_seconds) << ','
            << format_real(row.gibbs_seconds_per_sweep) << ',' << format_real(row.ratio) << '\n';
      }
      if (out_path.empty()) {
        out << csv.str();
      } else {
        auto f = topicinf::detail::open_out(out_path);
        f << csv.str();
      }
      return 0;
    };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    g.seed_given = app.get_option("--seed")->count() > 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  }

  try {
    return action ? action() : 1;
  } catch (const NumericalError& e) {
    log.error(e.what());
    return 3;
  } catch (const Error& e) {
    log.error(e.what());
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    log.error(e.what());
    return 2;
  }
}

inline int dispatch(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, out, err);
}

}  // namespace topicinf::cli
