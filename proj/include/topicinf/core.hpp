#pragma once

// Domain types shared by every module: the word-topic matrix, bag-of-words
// documents, topic vectors, linear inverses and support restrictions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "topicinf/error.hpp"

namespace topicinf {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// D x k column-stochastic word-topic matrix, stored row-major so that the
/// per-word profile a_w is contiguous.
class TopicMatrix {
 public:
  /// Columns must sum to 1 within this tolerance after construction.
  static constexpr double kColumnSumTolerance = 1e-6;
  /// Columns off by more than this are rejected instead of renormalized.
  static constexpr double kRenormalizeTolerance = 1e-4;
  /// Columns closer to 1 than this are left untouched, so that serialized
  /// matrices reload bit-for-bit.
  static constexpr double kExactSumSlack = 1e-9;

  TopicMatrix(std::size_t vocab_size, std::size_t topics, std::vector<double> row_major)
      : data_(static_cast<Eigen::Index>(vocab_size), static_cast<Eigen::Index>(topics)) {
    if (topics == 0 || vocab_size == 0) throw ValidationError("topic matrix must have D >= 1 and k >= 1");
    if (topics > vocab_size) {
      throw ValidationError("topic matrix needs k <= D (got D=" + std::to_string(vocab_size) +
                            ", k=" + std::to_string(topics) + ")");
    }
    if (row_major.size() != vocab_size * topics) {
      throw ValidationError("topic matrix expects " + std::to_string(vocab_size * topics) + " entries, got " +
                            std::to_string(row_major.size()));
    }
    std::copy(row_major.begin(), row_major.end(), data_.data());
    validate_and_normalize();
  }

  explicit TopicMatrix(RowMatrix dense) : data_(std::move(dense)) {
    if (data_.cols() == 0 || data_.rows() == 0) throw ValidationError("topic matrix must have D >= 1 and k >= 1");
    if (data_.cols() > data_.rows()) throw ValidationError("topic matrix needs k <= D");
    validate_and_normalize();
  }

  std::size_t vocab_size() const noexcept { return static_cast<std::size_t>(data_.rows()); }
  std::size_t topics() const noexcept { return static_cast<std::size_t>(data_.cols()); }

  double operator()(std::size_t word, std::size_t topic) const noexcept {
    return data_(static_cast<Eigen::Index>(word), static_cast<Eigen::Index>(topic));
  }

  /// The topic profile a_w of one word (length k).
  std::span<const double> row(std::size_t word) const noexcept {
    return {data_.data() + word * topics(), topics()};
  }

  std::vector<double> column(std::size_t topic) const {
    std::vector<double> out(vocab_size());
    for (std::size_t w = 0; w < out.size(); ++w) out[w] = (*this)(w, topic);
    return out;
  }

  const RowMatrix& dense() const noexcept { return data_; }

  /// The word distribution A x.
  std::vector<double> apply(std::span<const double> x) const {
    if (x.size() != topics()) throw ValidationError("vector length does not match topic count");
    std::vector<double> out(vocab_size(), 0.0);
    Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size())) =
        data_ * Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    return out;
  }

  bool operator==(const TopicMatrix& other) const noexcept {
    return data_.rows() == other.data_.rows() && data_.cols() == other.data_.cols() &&
           std::equal(data_.data(), data_.data() + data_.size(), other.data_.data());
  }

 private:
  void validate_and_normalize() {
    const std::size_t D = vocab_size();
    const std::size_t k = topics();
    for (std::size_t w = 0; w < D; ++w) {
      for (std::size_t j = 0; j < k; ++j) {
        const double v = (*this)(w, j);
        if (!std::isfinite(v) || v < 0.0) {
          throw ValidationError("negative or non-finite entry at row " + std::to_string(w) + ", column " +
                                std::to_string(j));
        }
      }
    }
    for (std::size_t j = 0; j < k; ++j) {
      const double sum = data_.col(static_cast<Eigen::Index>(j)).sum();
      if (std::abs(sum - 1.0) > kRenormalizeTolerance) {
        throw ValidationError("column " + std::to_string(j) + " sums to " + std::to_string(sum) +
                              ", expected 1 (tolerance 1e-4)");
      }
      if (std::abs(sum - 1.0) > kExactSumSlack) data_.col(static_cast<Eigen::Index>(j)) /= sum;
    }
  }

  RowMatrix data_;
};

struct WordCount {
  std::size_t word = 0;
  std::size_t count = 0;

  bool operator==(const WordCount&) const = default;
};

/// Bag-of-words document: distinct word ids in increasing order with
/// positive counts; n is the total number of tokens.
class SparseDocument {
 public:
  explicit SparseDocument(std::vector<WordCount> counts) : counts_(std::move(counts)) {
    if (counts_.empty()) throw ValidationError("document has no words (n must be >= 1)");
    std::sort(counts_.begin(), counts_.end(),
              [](const WordCount& a, const WordCount& b) { return a.word < b.word; });
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      if (counts_[i].count == 0) {
        throw ValidationError("word " + std::to_string(counts_[i].word) + " has zero count");
      }
      if (i > 0 && counts_[i].word == counts_[i - 1].word) {
        throw ValidationError("word " + std::to_string(counts_[i].word) + " listed twice");
      }
      length_ += counts_[i].count;
    }
  }

  /// Builds a document from a dense count vector; zero entries are skipped.
  static SparseDocument from_dense(std::span<const std::size_t> dense) {
    std::vector<WordCount> counts;
    for (std::size_t w = 0; w < dense.size(); ++w) {
      if (dense[w] > 0) counts.push_back({w, dense[w]});
    }
    return SparseDocument(std::move(counts));
  }

  const std::vector<WordCount>& entries() const noexcept { return counts_; }
  std::size_t length() const noexcept { return length_; }
  std::size_t distinct_words() const noexcept { return counts_.size(); }
  std::size_t max_word() const noexcept { return counts_.back().word; }

  void check_vocab(std::size_t vocab_size) const {
    if (max_word() >= vocab_size) {
      throw ValidationError("word id " + std::to_string(max_word()) + " out of range for vocabulary of size " +
                            std::to_string(vocab_size));
    }
  }

  bool operator==(const SparseDocument&) const = default;

 private:
  std::vector<WordCount> counts_;
  std::size_t length_ = 0;
};

/// Concatenation of two documents (counts added word by word).
inline SparseDocument merge(const SparseDocument& a, const SparseDocument& b) {
  std::vector<WordCount> out;
  auto ia = a.entries().begin();
  auto ib = b.entries().begin();
  while (ia != a.entries().end() || ib != b.entries().end()) {
    if (ib == b.entries().end() || (ia != a.entries().end() && ia->word < ib->word)) {
      out.push_back(*ia++);
    } else if (ia == a.entries().end() || ib->word < ia->word) {
      out.push_back(*ib++);
    } else {
      out.push_back({ia->word, ia->count + ib->count});
      ++ia;
      ++ib;
    }
  }
  return SparseDocument(std::move(out));
}

/// A length-k vector of topic weights. Simplex points are validated on
/// construction; raw estimates (e.g. unthresholded linear-inverse output)
/// may be negative.
class TopicVector {
 public:
  static constexpr double kSimplexTolerance = 1e-9;

  TopicVector() = default;

  static TopicVector raw(std::vector<double> values) { return TopicVector(std::move(values), false); }

  static TopicVector simplex_point(std::vector<double> values) {
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!(values[i] >= 0.0)) throw ValidationError("simplex point has negative entry at " + std::to_string(i));
      sum += values[i];
    }
    if (std::abs(sum - 1.0) > kSimplexTolerance) {
      throw ValidationError("simplex point sums to " + std::to_string(sum));
    }
    return TopicVector(std::move(values), true);
  }

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }
  bool on_simplex() const noexcept { return simplex_; }

  std::vector<std::size_t> support() const {
    std::vector<std::size_t> s;
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (values_[i] != 0.0) s.push_back(i);
    }
    return s;
  }

  bool operator==(const TopicVector&) const = default;

 private:
  TopicVector(std::vector<double> values, bool simplex) : values_(std::move(values)), simplex_(simplex) {}

  std::vector<double> values_;
  bool simplex_ = false;
};

inline double l1_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

inline double linf_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
  return s;
}

enum class RowStatus { optimal, infeasible, tolerance_limited };

inline const char* to_string(RowStatus s) noexcept {
  switch (s) {
    case RowStatus::optimal: return "optimal";
    case RowStatus::infeasible: return "infeasible";
    case RowStatus::tolerance_limited: return "tolerance_limited";
  }
  return "unknown";
}

struct RowSolveInfo {
  RowStatus status = RowStatus::optimal;
  double objective = 0.0;    // max |b_i| achieved by the row
  double lower_bound = 0.0;  // certified by the dual witness
  std::size_t iterations = 0;
};

/// k x D matrix B with its bias level. lambda_delta is always max |B_ij|.
class LinearInverse {
 public:
  LinearInverse(RowMatrix B, double delta, std::vector<RowSolveInfo> rows = {})
      : B_(std::move(B)), delta_(delta), rows_(std::move(rows)) {
    if (delta_ < 0.0) throw ValidationError("bias level delta must be >= 0");
    if (!rows_.empty() && rows_.size() != static_cast<std::size_t>(B_.rows())) {
      throw ValidationError("row status count does not match inverse rows");
    }
    lambda_ = B_.size() == 0 ? 0.0 : B_.cwiseAbs().maxCoeff();
  }

  std::size_t topics() const noexcept { return static_cast<std::size_t>(B_.rows()); }
  std::size_t vocab_size() const noexcept { return static_cast<std::size_t>(B_.cols()); }
  double delta() const noexcept { return delta_; }
  double lambda_delta() const noexcept { return lambda_; }
  const RowMatrix& matrix() const noexcept { return B_; }
  const std::vector<RowSolveInfo>& row_status() const noexcept { return rows_; }

  /// max_ij |(BA - I)_ij|.
  double bias(const TopicMatrix& A) const {
    if (A.vocab_size() != vocab_size() || A.topics() != topics()) {
      throw ValidationError("inverse shape does not match topic matrix");
    }
    Eigen::MatrixXd BA = B_ * A.dense();
    BA -= Eigen::MatrixXd::Identity(BA.rows(), BA.cols());
    return BA.cwiseAbs().maxCoeff();
  }

 private:
  RowMatrix B_;
  double delta_ = 0.0;
  double lambda_ = 0.0;
  std::vector<RowSolveInfo> rows_;
};

/// Columns R of a topic matrix: restricted rows \hat a_w in R^r.
class SupportRestriction {
 public:
  SupportRestriction(const TopicMatrix& parent, std::vector<std::size_t> support)
      : parent_(&parent), support_(std::move(support)) {
    if (support_.empty()) throw ValidationError("support must be nonempty");
    std::vector<bool> seen(parent.topics(), false);
    for (std::size_t j : support_) {
      if (j >= parent.topics()) throw ValidationError("support index " + std::to_string(j) + " out of range");
      if (seen[j]) throw ValidationError("support index " + std::to_string(j) + " repeated");
      seen[j] = true;
    }
    const std::size_t D = parent.vocab_size();
    const std::size_t r = support_.size();
    rows_.resize(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(r));
    for (std::size_t w = 0; w < D; ++w) {
      for (std::size_t j = 0; j < r; ++j) {
        rows_(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(j)) = parent(w, support_[j]);
      }
    }
  }

  const TopicMatrix& parent() const noexcept { return *parent_; }
  std::span<const std::size_t> support() const noexcept { return support_; }
  std::size_t size() const noexcept { return support_.size(); }
  std::size_t vocab_size() const noexcept { return static_cast<std::size_t>(rows_.rows()); }

  std::span<const double> row(std::size_t word) const noexcept {
    return {rows_.data() + word * size(), size()};
  }

  const RowMatrix& dense() const noexcept { return rows_; }

  /// Embeds an r-vector into R^k with zeros off the support.
  std::vector<double> expand(std::span<const double> restricted) const {
    if (restricted.size() != size()) throw ValidationError("restricted vector has wrong length");
    std::vector<double> full(parent_->topics(), 0.0);
    for (std::size_t j = 0; j < size(); ++j) full[support_[j]] = restricted[j];
    return full;
  }

  /// Coordinates of a k-vector on the support.
  std::vector<double> restrict_vector(std::span<const double> full) const {
    if (full.size() != parent_->topics()) throw ValidationError("vector length does not match topic count");
    std::vector<double> out(size());
    for (std::size_t j = 0; j < size(); ++j) out[j] = full[support_[j]];
    return out;
  }

 private:
  const TopicMatrix* parent_;
  std::vector<std::size_t> support_;
  RowMatrix rows_;
};

inline SupportRestriction restrict(const TopicMatrix& A, std::vector<std::size_t> support) {
  return SupportRestriction(A, std::move(support));
}

}  // namespace topicinf
