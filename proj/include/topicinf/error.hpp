#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace topicinf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (matrix, inverse, document, config files).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed: infeasible LP, iteration limit, degenerate data.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// One or more row programs of the minimum-variance inverse are infeasible.
class InfeasibleError : public NumericalError {
 public:
  InfeasibleError(const std::string& what, std::vector<std::size_t> rows)
      : NumericalError(what), rows_(std::move(rows)) {}

  const std::vector<std::size_t>& rows() const noexcept { return rows_; }

 private:
  std::vector<std::size_t> rows_;
};

}  // namespace topicinf
