#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "support/tempdir.hpp"

namespace topicinf {
namespace {

using nlohmann::json;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  test::TempDir dir;
  std::string id2 = dir.file("id2.mat", "2 2\n1 0\n0 1\n").string();
  std::string dup = dir.file("dup.mat", "3 2\n0.5 0.5\n0.5 0.5\n0 0\n").string();
  std::string at(const std::string& name) const { return (dir.path() / name).string(); }
};

TEST_F(Cli, ConditionOnIdentity) {
  const Outcome r = run({"condition", "--matrix", id2, "--deltas", "0,0.1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  ASSERT_EQ(j["lambda_values"].size(), 2u);
  EXPECT_NEAR(j["lambda_values"][0].get<double>(), 1.0, 1e-9);
  EXPECT_NEAR(j["lambda_values"][1].get<double>(), 0.9, 1e-9);
  EXPECT_TRUE(j["lambda_monotone"].get<bool>());
  EXPECT_EQ(j["version"], kVersion);
}

TEST_F(Cli, UnknownFlagIsUsageError) {
  const Outcome r = run({"condition", "--matrix", id2, "--bogus", "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--bogus"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("Usage"), std::string::npos) << r.err;
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"invert", "--matrix", id2}).code, 1);
  EXPECT_EQ(run({"--threads", "0", "condition", "--matrix", id2}).code, 1);
}

TEST_F(Cli, DuplicateColumnsAreInfeasible) {
  const Outcome r = run({"invert", "--matrix", dup, "--delta", "0.1", "--out", at("B.inv")});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("0"), std::string::npos);
  EXPECT_NE(r.err.find("1"), std::string::npos);
  EXPECT_NE(r.err.find("infeasible"), std::string::npos) << r.err;
  EXPECT_FALSE(std::filesystem::exists(at("B.inv")));
}

TEST_F(Cli, DataErrorsNameTheFile) {
  const Outcome missing = run({"condition", "--matrix", at("nope.mat")});
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("nope.mat"), std::string::npos) << missing.err;
  const std::string bad = dir.file("bad.mat", "2 2\n1 0\n0 x\n").string();
  const Outcome parse = run({"condition", "--matrix", bad});
  EXPECT_EQ(parse.code, 2);
  EXPECT_NE(parse.err.find("bad.mat:3"), std::string::npos) << parse.err;
  EXPECT_EQ(run({"invert", "--matrix", id2, "--delta", "1.5", "--out", at("B.inv")}).code, 2);
}

TEST_F(Cli, VersionAndHelp) {
  const Outcome v = run({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find(kVersion), std::string::npos);
  const Outcome h = run({"--help"});
  EXPECT_EQ(h.code, 0);
  for (const char* sub : {"condition", "invert", "infer", "refine", "gibbs", "generate", "evaluate", "bench"}) {
    EXPECT_NE(h.out.find(sub), std::string::npos) << sub;
  }
}

TEST_F(Cli, InvertThenInferOnIdentity) {
  ASSERT_EQ(run({"invert", "--matrix", id2, "--out", at("B.inv")}).code, 0);
  const std::string docs = dir.file("docs.txt", "a\t0:7 1:3\nb\t1:4\n").string();
  const Outcome r = run({"infer", "--matrix", id2, "--inverse", at("B.inv"), "--docs", docs, "--mode", "top_r",
                         "--top-r", "2", "--out", at("est.tsv"), "--raw-out", at("raw.tsv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto est = load_vectors(at("est.tsv"), 2);
  ASSERT_EQ(est.size(), 2u);
  EXPECT_NEAR(est[0][0], 0.7, 1e-15);
  EXPECT_NEAR(est[0][1], 0.3, 1e-15);
  EXPECT_NEAR(est[1][1], 1.0, 1e-15);
}

TEST_F(Cli, RefineAndFisher) {
  const std::string docs = dir.file("docs.txt", "0:7 1:3\n").string();
  const std::string sup = dir.file("sup.tsv", "0\t0 1\n").string();
  const Outcome r = run({"refine", "--matrix", id2, "--docs", docs, "--supports", sup, "--out", at("mle.tsv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto x = load_vectors(at("mle.tsv"), 2);
  EXPECT_NEAR(x[0][0], 0.7, 1e-6);

  const std::string xf = dir.file("x.tsv", "0.5\t0.5\n").string();
  const Outcome f = run({"fisher", "--matrix", id2, "--x", xf, "--doc", "0:5 1:5"});
  ASSERT_EQ(f.code, 0) << f.err;
  const json j = json::parse(f.out);
  EXPECT_NEAR(j["psd_ratio"].get<double>(), 1.0, 1e-12);
}

TEST_F(Cli, GeneratorsAndPair) {
  ASSERT_EQ(run({"--seed", "3", "generate", "matrix", "--hard", "--D", "200", "--k", "6", "--out", at("h.mat")}).code,
            0);
  const TopicMatrix A = load_topic_matrix(at("h.mat"));
  EXPECT_EQ(A.vocab_size(), 200u);
  EXPECT_EQ(A.topics(), 6u);
  const Outcome c = run({"--seed", "3", "generate", "corpus", "--matrix", at("h.mat"), "--r", "2", "--docs", "5",
                         "--words", "40", "--out", at("docs.txt"), "--truth", at("truth.tsv")});
  ASSERT_EQ(c.code, 0) << c.err;
  const auto docs = load_documents(at("docs.txt"), 200);
  ASSERT_EQ(docs.size(), 5u);
  for (const auto& d : docs) EXPECT_EQ(d.length(), 40u);
  EXPECT_EQ(load_vectors(at("truth.tsv"), 6).size(), 5u);
  const Outcome p = run({"generate", "pair", "--matrix", at("h.mat"), "--r", "3"});
  ASSERT_EQ(p.code, 0) << p.err;
  const json j = json::parse(p.out);
  EXPECT_EQ(j["support"].size(), 3u);
}

TEST_F(Cli, SeedAndThreadsDoNotLeakIntoResults) {
  ASSERT_EQ(run({"--seed", "9", "generate", "matrix", "--hard", "--D", "300", "--k", "8", "--out", at("h.mat")}).code,
            0);
  ASSERT_EQ(run({"--seed", "9", "generate", "corpus", "--matrix", at("h.mat"), "--r", "3", "--docs", "6", "--words",
                 "200", "--out", at("docs.txt")})
                .code,
            0);
  std::vector<std::string> outputs;
  for (const char* threads : {"1", "4"}) {
    const std::string t = threads;
    ASSERT_EQ(run({"--threads", t, "invert", "--matrix", at("h.mat"), "--out", at("B" + t + ".inv")}).code, 0);
    ASSERT_EQ(run({"--threads", t, "infer", "--inverse", at("B" + t + ".inv"), "--docs", at("docs.txt"), "--out",
                   at("est" + t + ".tsv")})
                  .code,
              0);
    ASSERT_EQ(run({"--threads", t, "--seed", "2", "gibbs", "--matrix", at("h.mat"), "--docs", at("docs.txt"),
                   "--alpha", "0.3", "--burnin", "5", "--samples", "20", "--out", at("g" + t + ".tsv")})
                  .code,
              0);
    outputs.push_back(slurp(at("B" + t + ".inv")) + slurp(at("est" + t + ".tsv")) + slurp(at("g" + t + ".tsv")));
  }
  EXPECT_EQ(outputs[0], outputs[1]);
}

TEST_F(Cli, EvaluateWritesArtifactsOnlyUnderOutDir) {
  const std::string cfg = dir.file("run.cfg",
                                   "hard_D = 200\nhard_k = 5\nr = 2\nlengths = 100, 400\ntrials = 4\n"
                                   "methods = TLI, TLI+MLE\nseed = 3\n")
                              .string();
  const Outcome r = run({"evaluate", "--config", cfg, "--out-dir", at("res")});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"errors.csv", "timing.csv", "manifest.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "res" / f)) << f;
  }
  const json m = json::parse(slurp(dir.path() / "res" / "manifest.json"));
  EXPECT_EQ(m["seed"], 3);
  EXPECT_EQ(m["version"], kVersion);
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++entries;
  EXPECT_EQ(entries, 4u);  // id2.mat, dup.mat, run.cfg, res/
  const std::string errors = slurp(dir.path() / "res" / "errors.csv");
  EXPECT_EQ(errors.substr(0, errors.find(',')), "method");
  const Outcome again = run({"--seed", "4", "evaluate", "--config", cfg, "--out-dir", at("res2")});
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(json::parse(slurp(dir.path() / "res2" / "manifest.json"))["seed"], 4);
}

}  // namespace
}  // namespace topicinf
