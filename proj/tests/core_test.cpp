#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "support/tempdir.hpp"
#include "topicinf/core.hpp"
#include "topicinf/io.hpp"
#include "topicinf/rng.hpp"
#include "topicinf/synth.hpp"

namespace topicinf {
namespace {

TEST(Rng, SameSeedSameStream) {
  Rng a(42, "x", {1, 2});
  Rng b(42, "x", {1, 2});
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(Rng, DerivedStreamsDiffer) {
  EXPECT_NE(derive_seed(1, "a"), derive_seed(1, "b"));
  EXPECT_NE(derive_seed(1, "a", {0}), derive_seed(1, "a", {1}));
  EXPECT_NE(derive_seed(1, "a", {0, 1}), derive_seed(1, "a", {1, 0}));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(2, "a"));
}

TEST(Rng, UniformMoments) {
  Rng rng(7);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    s2 += u * u;
  }
  EXPECT_NEAR(s / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
  EXPECT_NEAR(s2 / n, 1.0 / 3.0, 0.005);
}

TEST(Rng, BelowIsUnbiased) {
  Rng rng(3);
  std::vector<int> hist(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++hist[rng.below(7)];
  for (int h : hist) EXPECT_NEAR(h, n / 7.0, 5.0 * std::sqrt(n / 7.0));
}

TEST(Rng, GammaMeanAndVariance) {
  for (double shape : {0.1, 0.5, 1.0, 3.0}) {
    Rng rng(11, "gamma");
    const int n = 100000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double g = rng.gamma(shape);
      s += g;
      s2 += g * g;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    EXPECT_NEAR(mean, shape, 5.0 * std::sqrt(shape / n)) << shape;
    EXPECT_NEAR(var, shape, 0.05 * shape + 0.02) << shape;
  }
}

TEST(Rng, NormalMoments) {
  Rng rng(5);
  const int n = 100000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.02);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, SampleWithoutReplacementDistinct) {
  Rng rng(9);
  for (int rep = 0; rep < 100; ++rep) {
    const auto s = sample_without_replacement(rng, 20, 7);
    EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), 7u);
    for (auto v : s) EXPECT_LT(v, 20u);
  }
}

TEST(Rng, SampleCumulativeSkipsZeroBuckets) {
  const std::vector<double> c{0.0, 0.5, 0.5, 1.0};
  EXPECT_EQ(sample_cumulative(c, 0.0), 1u);
  EXPECT_EQ(sample_cumulative(c, 0.49), 1u);
  EXPECT_EQ(sample_cumulative(c, 0.5), 3u);
  EXPECT_EQ(sample_cumulative(c, 0.999), 3u);
}

TEST(TopicMatrix, IdentityLoads) {
  test::TempDir dir;
  const auto path = dir.file("id2.mat", "2 2\n1 0\n0 1\n");
  const TopicMatrix A = load_topic_matrix(path);
  EXPECT_EQ(A.vocab_size(), 2u);
  EXPECT_EQ(A.topics(), 2u);
  EXPECT_EQ(A(0, 0), 1.0);
  EXPECT_EQ(A(0, 1), 0.0);
  EXPECT_EQ(A(1, 1), 1.0);
}

TEST(TopicMatrix, HalfColumnRejected) {
  test::TempDir dir;
  const auto path = dir.file("bad.mat", "2 2\n0.25 0.5\n0.25 0.5\n");
  EXPECT_THROW(load_topic_matrix(path), ValidationError);
}

TEST(TopicMatrix, SmallDriftRenormalized) {
  const TopicMatrix A(2, 1, {0.50003, 0.5});
  EXPECT_NEAR(A(0, 0) + A(1, 0), 1.0, 1e-15);
  EXPECT_THROW(TopicMatrix(2, 1, {0.6, 0.5}), ValidationError);
}

TEST(TopicMatrix, RejectsNegativeAndShape) {
  EXPECT_THROW(TopicMatrix(2, 1, {1.5, -0.5}), ValidationError);
  EXPECT_THROW(TopicMatrix(1, 2, {1.0, 1.0}), ValidationError);
  EXPECT_THROW(TopicMatrix(2, 2, {1.0, 0.0, 0.0}), ValidationError);
}

TEST(TopicMatrix, ParseErrorsNameTheLine) {
  test::TempDir dir;
  const auto path = dir.file("junk.mat", "2 2\n1 0\n0 x\n");
  try {
    load_topic_matrix(path);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_topic_matrix(dir.file("short.mat", "3 2\n1 0\n0 1\n")), ParseError);
  EXPECT_THROW(load_topic_matrix(dir.path() / "missing.mat"), Error);
}

TEST(TopicMatrix, HardInstanceRoundTripIsBitExact) {
  test::TempDir dir;
  const HardInstance h = gen_hard_matrix(100, 10, 7);
  save_topic_matrix(dir.path() / "h.mat", h.A);
  const TopicMatrix back = load_topic_matrix(dir.path() / "h.mat");
  EXPECT_TRUE(back == h.A);
  save_topic_matrix(dir.path() / "h2.mat", back);
  std::ifstream a(dir.path() / "h.mat"), b(dir.path() / "h2.mat");
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(TopicMatrix, RandomRoundTripIsBitExact) {
  Rng rng(1);
  std::vector<double> v(40 * 6);
  for (auto& x : v) x = rng.uniform();
  RowMatrix M = Eigen::Map<RowMatrix>(v.data(), 40, 6);
  for (Eigen::Index j = 0; j < 6; ++j) M.col(j) /= M.col(j).sum();
  const TopicMatrix A(M);
  std::stringstream s;
  write_topic_matrix(s, A);
  EXPECT_TRUE(read_topic_matrix(s) == A);
}

TEST(FormatReal, RoundTrips) {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(rng.uniform() - 0.5, static_cast<int>(rng.below(40)) - 20);
    EXPECT_EQ(std::stod(format_real(v)), v);
  }
}

TEST(SparseDocument, ParsesCounts) {
  const SparseDocument d = parse_document("0:3 5:2");
  EXPECT_EQ(d.length(), 5u);
  ASSERT_EQ(d.entries().size(), 2u);
  EXPECT_EQ(d.entries()[0].word, 0u);
  EXPECT_EQ(d.entries()[0].count, 3u);
  EXPECT_EQ(d.entries()[1].word, 5u);
  EXPECT_EQ(d.entries()[1].count, 2u);
  EXPECT_NO_THROW(d.check_vocab(6));
  EXPECT_THROW(d.check_vocab(5), ValidationError);
}

TEST(SparseDocument, IgnoresDocId) {
  EXPECT_EQ(parse_document("doc7\t1:2 3:1"), parse_document("1:2 3:1"));
}

TEST(SparseDocument, RejectsBadInput) {
  EXPECT_THROW(parse_document(""), Error);
  EXPECT_THROW(parse_document("   "), Error);
  EXPECT_THROW(parse_document("1:0"), Error);
  EXPECT_THROW(parse_document("1:2 1:3"), Error);
  EXPECT_THROW(parse_document("1-2"), ParseError);
  EXPECT_THROW(parse_document("a:2"), ParseError);
}

TEST(SparseDocument, UnsortedInputIsSorted) {
  const SparseDocument d = parse_document("9:1 2:4");
  EXPECT_EQ(d.entries()[0].word, 2u);
  EXPECT_EQ(format_document(d), "2:4 9:1");
}

TEST(SparseDocument, GeneratedCorpusRoundTrips) {
  test::TempDir dir;
  const HardInstance h = gen_hard_matrix(60, 6, 3);
  std::vector<SparseDocument> docs;
  for (std::size_t d = 0; d < 50; ++d) {
    const TopicVector x = gen_uniform_sparse_x(6, 3, derive_seed(5, "x", {d}));
    docs.push_back(gen_document(h.A, x, 30 + d, derive_seed(5, "doc", {d})));
  }
  save_documents(dir.path() / "docs.txt", docs);
  EXPECT_EQ(load_documents(dir.path() / "docs.txt", 60), docs);
  EXPECT_THROW(load_documents(dir.path() / "docs.txt", 10), ValidationError);
}

TEST(SparseDocument, EmptyLineInFileRejected) {
  test::TempDir dir;
  EXPECT_THROW(load_documents(dir.file("d.txt", "0:1\n\n1:1\n")), Error);
}

TEST(SparseDocument, MergeAddsCounts) {
  const auto m = merge(parse_document("0:1 4:2"), parse_document("4:1 7:3"));
  EXPECT_EQ(m, parse_document("0:1 4:3 7:3"));
}

TEST(TopicVector, SimplexFlag) {
  EXPECT_TRUE(TopicVector::simplex_point({0.25, 0.75}).on_simplex());
  EXPECT_THROW(TopicVector::simplex_point({0.5, 0.6}), ValidationError);
  EXPECT_THROW(TopicVector::simplex_point({-0.1, 1.1}), ValidationError);
  const auto raw = TopicVector::raw({-0.1, 1.1, 0.0});
  EXPECT_FALSE(raw.on_simplex());
  EXPECT_EQ(raw.support(), (std::vector<std::size_t>{0, 1}));
}

TEST(Restriction, IdentitySelection) {
  const TopicMatrix I(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const auto R1 = restrict(I, {1});
  for (std::size_t w = 0; w < 3; ++w) EXPECT_EQ(R1.row(w)[0], w == 1 ? 1.0 : 0.0);
  const auto full = restrict(I, {0, 1, 2});
  EXPECT_EQ(full.dense(), I.dense());
}

TEST(Restriction, MatchesDirectIndexing) {
  Rng rng(4);
  std::vector<double> v(24);
  for (auto& x : v) x = rng.uniform();
  RowMatrix M = Eigen::Map<RowMatrix>(v.data(), 6, 4);
  for (Eigen::Index j = 0; j < 4; ++j) M.col(j) /= M.col(j).sum();
  const TopicMatrix A(M);
  const auto R = restrict(A, {1, 3});
  for (std::size_t w = 0; w < 6; ++w) {
    EXPECT_EQ(R.row(w)[0], A(w, 1));
    EXPECT_EQ(R.row(w)[1], A(w, 3));
  }
}

TEST(Restriction, RejectsBadSupports) {
  const TopicMatrix I(2, 2, {1, 0, 0, 1});
  EXPECT_THROW(restrict(I, {}), ValidationError);
  EXPECT_THROW(restrict(I, {2}), ValidationError);
  EXPECT_THROW(restrict(I, {1, 1}), ValidationError);
}

TEST(Restriction, ExpandThenRestrictIsIdentity) {
  const TopicMatrix A = gen_hard_matrix(30, 8, 2).A;
  const auto R = restrict(A, {6, 1, 3});
  const std::vector<double> v{0.2, 0.5, 0.3};
  const auto full = R.expand(v);
  EXPECT_EQ(full[6], 0.2);
  EXPECT_EQ(full[1], 0.5);
  EXPECT_EQ(full[0], 0.0);
  EXPECT_EQ(R.restrict_vector(full), v);
}

TEST(Inverse, SaveLoadRoundTrip) {
  test::TempDir dir;
  RowMatrix B(2, 3);
  B << 1.5, -0.25, 0.1, 0.0, 2.0, -1.0 / 3.0;
  const LinearInverse inv(B, 0.01);
  EXPECT_EQ(inv.lambda_delta(), 2.0);
  save_inverse(dir.path() / "B.mat", inv);
  const LinearInverse back = load_inverse(dir.path() / "B.mat");
  EXPECT_EQ(back.matrix(), B);
  EXPECT_EQ(back.delta(), 0.01);
  EXPECT_EQ(back.lambda_delta(), 2.0);
}

TEST(Inverse, HeaderLambdaMustMatch) {
  test::TempDir dir;
  EXPECT_THROW(load_inverse(dir.file("B.mat", "1 2 0 5\n1 -1\n")), Error);
}

TEST(Vectors, RoundTrip) {
  test::TempDir dir;
  const std::vector<std::vector<double>> rows{{0.1, 0.9}, {1.0 / 3.0, 2.0 / 3.0}};
  save_vectors(dir.path() / "v.tsv", rows);
  EXPECT_EQ(load_vectors(dir.path() / "v.tsv", 2), rows);
  EXPECT_THROW(load_vectors(dir.path() / "v.tsv", 4), ParseError);
}

TEST(Vocab, RoundTrip) {
  test::TempDir dir;
  const std::vector<std::string> words{"alpha", "beta gamma", ""};
  save_vocab(dir.path() / "vocab.txt", words);
  EXPECT_EQ(load_vocab(dir.path() / "vocab.txt"), words);
}

}  // namespace
}  // namespace topicinf
