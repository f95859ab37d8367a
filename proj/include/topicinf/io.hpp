#pragma once

// Text formats.
//
//   matrix    "D k" then D lines of k values (row-major)
//   inverse   "k D delta lambda_delta" then k lines of D values
//   documents one document per line, "[docid<TAB>]word:count word:count ..."
//   vocab     one word per line; line number is the word id
//   vectors   "docid<TAB>v_0<TAB>...<TAB>v_{k-1}" (estimates, truth files)
//
// Reals are written with 17 significant digits, which round-trips IEEE
// doubles exactly.

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "topicinf/core.hpp"
#include "topicinf/error.hpp"

namespace topicinf {

inline std::string format_real(double value) {
  char buf[40];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  if (ec != std::errc{}) throw Error("cannot format value");
  return std::string(buf, end);
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

inline std::string where(const std::string& source, std::size_t line_no) {
  return source + ":" + std::to_string(line_no);
}

inline double parse_real(std::string_view token, const std::string& context) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw ParseError(context + ": cannot parse number '" + std::string(token) + "'");
  }
  return value;
}

inline std::size_t parse_index(std::string_view token, const std::string& context) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size() || token.empty()) {
    throw ParseError(context + ": cannot parse integer '" + std::string(token) + "'");
  }
  return value;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

/// Reads a "rows cols" header followed by `rows` lines of `cols` reals.
inline std::vector<double> read_grid(std::istream& in, const std::string& source, std::size_t rows,
                                     std::size_t cols, std::size_t& line_no) {
  std::vector<double> values;
  values.reserve(rows * cols);
  std::string line;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) {
      throw ParseError(source + ": expected " + std::to_string(rows) + " data lines, found " + std::to_string(r));
    }
    ++line_no;
    const auto tokens = split_ws(line);
    if (tokens.size() != cols) {
      throw ParseError(where(source, line_no) + ": expected " + std::to_string(cols) + " values, found " +
                       std::to_string(tokens.size()));
    }
    for (auto t : tokens) values.push_back(parse_real(t, where(source, line_no)));
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!split_ws(line).empty()) throw ParseError(where(source, line_no) + ": trailing data after matrix");
  }
  return values;
}

}  // namespace detail

// ---------------------------------------------------------------- matrices

inline void write_topic_matrix(std::ostream& out, const TopicMatrix& A) {
  out << A.vocab_size() << ' ' << A.topics() << '\n';
  for (std::size_t w = 0; w < A.vocab_size(); ++w) {
    const auto row = A.row(w);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << ' ';
      out << format_real(row[j]);
    }
    out << '\n';
  }
}

inline void save_topic_matrix(const std::filesystem::path& path, const TopicMatrix& A) {
  auto out = detail::open_out(path);
  write_topic_matrix(out, A);
}

inline TopicMatrix read_topic_matrix(std::istream& in, const std::string& source = "<matrix>") {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError(source + ": empty file");
  const auto header = detail::split_ws(line);
  if (header.size() != 2) throw ParseError(source + ":1: header must be 'D k'");
  const std::size_t D = detail::parse_index(header[0], source + ":1");
  const std::size_t k = detail::parse_index(header[1], source + ":1");
  auto values = detail::read_grid(in, source, D, k, line_no);
  try {
    return TopicMatrix(D, k, std::move(values));
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
}

inline TopicMatrix load_topic_matrix(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  return read_topic_matrix(in, path.string());
}

// ---------------------------------------------------------------- inverses

inline void save_inverse(const std::filesystem::path& path, const LinearInverse& B) {
  auto out = detail::open_out(path);
  out << B.topics() << ' ' << B.vocab_size() << ' ' << format_real(B.delta()) << ' '
      << format_real(B.lambda_delta()) << '\n';
  const auto& M = B.matrix();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index w = 0; w < M.cols(); ++w) {
      if (w) out << ' ';
      out << format_real(M(i, w));
    }
    out << '\n';
  }
}

inline LinearInverse load_inverse(const std::filesystem::path& path) {
  const std::string source = path.string();
  auto in = detail::open_in(path);
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError(source + ": empty file");
  const auto header = detail::split_ws(line);
  if (header.size() != 4) throw ParseError(source + ":1: header must be 'k D delta lambda_delta'");
  const std::size_t k = detail::parse_index(header[0], source + ":1");
  const std::size_t D = detail::parse_index(header[1], source + ":1");
  const double delta = detail::parse_real(header[2], source + ":1");
  const double lambda = detail::parse_real(header[3], source + ":1");
  const auto values = detail::read_grid(in, source, k, D, line_no);
  RowMatrix M(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(D));
  std::copy(values.begin(), values.end(), M.data());
  LinearInverse B(std::move(M), delta);
  if (B.lambda_delta() != lambda) {
    throw ValidationError(source + ":1: lambda_delta " + format_real(lambda) +
                          " does not equal the largest |entry| " + format_real(B.lambda_delta()));
  }
  return B;
}

// ---------------------------------------------------------------- documents

/// Parses "word:count word:count ..." (an optional "docid<TAB>" prefix is skipped).
inline SparseDocument parse_document(std::string_view line, const std::string& context = "<document>") {
  if (const auto tab = line.find('\t'); tab != std::string_view::npos) {
    const auto prefix = line.substr(0, tab);
    if (prefix.find(':') == std::string_view::npos) line.remove_prefix(tab + 1);
  }
  std::vector<WordCount> counts;
  for (auto token : detail::split_ws(line)) {
    const auto colon = token.find(':');
    if (colon == std::string_view::npos) {
      throw ParseError(context + ": token '" + std::string(token) + "' is not word:count");
    }
    counts.push_back({detail::parse_index(token.substr(0, colon), context),
                      detail::parse_index(token.substr(colon + 1), context)});
  }
  try {
    return SparseDocument(std::move(counts));
  } catch (const ValidationError& e) {
    throw ValidationError(context + ": " + e.what());
  }
}

inline std::string format_document(const SparseDocument& doc) {
  std::string out;
  for (const auto& [word, count] : doc.entries()) {
    if (!out.empty()) out += ' ';
    out += std::to_string(word);
    out += ':';
    out += std::to_string(count);
  }
  return out;
}

inline void save_documents(const std::filesystem::path& path, const std::vector<SparseDocument>& docs) {
  auto out = detail::open_out(path);
  for (std::size_t d = 0; d < docs.size(); ++d) out << d << '\t' << format_document(docs[d]) << '\n';
}

/// Reads a document file; when vocab_size > 0, word ids are range-checked.
inline std::vector<SparseDocument> load_documents(const std::filesystem::path& path, std::size_t vocab_size = 0) {
  const std::string source = path.string();
  auto in = detail::open_in(path);
  std::vector<SparseDocument> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string ctx = detail::where(source, line_no);
    docs.push_back(parse_document(line, ctx));
    if (vocab_size > 0) {
      try {
        docs.back().check_vocab(vocab_size);
      } catch (const ValidationError& e) {
        throw ValidationError(ctx + ": " + e.what());
      }
    }
  }
  return docs;
}

// ---------------------------------------------------------------- vocab

inline std::vector<std::string> load_vocab(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    words.push_back(line);
  }
  return words;
}

inline void save_vocab(const std::filesystem::path& path, const std::vector<std::string>& words) {
  auto out = detail::open_out(path);
  for (const auto& w : words) out << w << '\n';
}

// ---------------------------------------------------------------- vectors

inline void write_vector_line(std::ostream& out, std::string_view id, std::span<const double> values) {
  out << id;
  for (double v : values) out << '\t' << format_real(v);
  out << '\n';
}

inline void save_vectors(const std::filesystem::path& path, const std::vector<std::vector<double>>& rows) {
  auto out = detail::open_out(path);
  for (std::size_t d = 0; d < rows.size(); ++d) write_vector_line(out, std::to_string(d), rows[d]);
}

/// Reads "id<TAB>v...v" lines; a line without a leading id column is also accepted
/// when every field parses as a number and expected_size matches.
inline std::vector<std::vector<double>> load_vectors(const std::filesystem::path& path, std::size_t expected_size) {
  const std::string source = path.string();
  auto in = detail::open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = detail::split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() == expected_size + 1) tokens.erase(tokens.begin());
    if (tokens.size() != expected_size) {
      throw ParseError(detail::where(source, line_no) + ": expected " + std::to_string(expected_size) + " values");
    }
    std::vector<double> row;
    for (auto t : tokens) row.push_back(detail::parse_real(t, detail::where(source, line_no)));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace topicinf
