#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fninv {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got, const std::string& what)
      : Error(what + ": expected dimension " + std::to_string(expected) + ", got " +
              std::to_string(got)),
        expected_(expected),
        got_(got) {}

  std::size_t expected() const noexcept { return expected_; }
  std::size_t got() const noexcept { return got_; }

 private:
  std::size_t expected_;
  std::size_t got_;
};

/// The evaluator produced NaN or Inf; treated as leaving the map's domain.
class NonFiniteOutput : public Error {
 public:
  using Error::Error;
};

/// log/sqrt/fractional power evaluated outside its real domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

class PreconditionViolation : public Error {
 public:
  using Error::Error;
};

class SamplingFailed : public Error {
 public:
  using Error::Error;
};

/// Parse failure with a 1-based source position.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t line, std::size_t column)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + msg),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class SyntaxError : public ParseError {
 public:
  SyntaxError(const std::string& msg, std::size_t line, std::size_t column,
              std::vector<std::string> expected)
      : ParseError(msg + expected_suffix(expected), line, column), expected_(std::move(expected)) {}

  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  static std::string expected_suffix(const std::vector<std::string>& expected) {
    if (expected.empty()) return {};
    std::string s = " (expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) s += ", ";
      s += expected[i];
    }
    return s + ")";
  }

  std::vector<std::string> expected_;
};

class UnknownIdentifier : public ParseError {
 public:
  UnknownIdentifier(const std::string& name, std::size_t line, std::size_t column)
      : ParseError("unknown identifier '" + name + "'", line, column), name_(name) {}

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class ArityError : public ParseError {
 public:
  using ParseError::ParseError;
};

/// Component count differs from the highest variable index.
class NonSquareDefinition : public Error {
 public:
  NonSquareDefinition(std::size_t components, std::size_t max_variable)
      : Error("map defines " + std::to_string(components) + " components but uses " +
              std::to_string(max_variable) + " variables"),
        components_(components),
        max_variable_(max_variable) {}

  std::size_t components() const noexcept { return components_; }
  std::size_t max_variable() const noexcept { return max_variable_; }

 private:
  std::size_t components_;
  std::size_t max_variable_;
};

}  // namespace fninv
