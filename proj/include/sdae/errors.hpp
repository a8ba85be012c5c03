#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace sdae {

// Base of every error raised by the library. Numerical failures (non-convergence,
// singular systems) derive from NumericalError so front ends can map them to a
// distinct exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class SvdNonConvergence : public NumericalError {
 public:
  explicit SvdNonConvergence(int sweeps)
      : NumericalError("svd: Jacobi iteration did not converge after " + std::to_string(sweeps) +
                       " sweeps"),
        sweeps_(sweeps) {}
  int sweeps() const noexcept { return sweeps_; }

 private:
  int sweeps_;
};

class SingularMatrix : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class PreconditionViolated : public Error {
 public:
  PreconditionViolated(std::string what, std::size_t intersection_dim)
      : Error(std::move(what)), intersection_dim_(intersection_dim) {}
  std::size_t intersection_dimension() const noexcept { return intersection_dim_; }

 private:
  std::size_t intersection_dim_;
};

class DomainError : public Error {
 public:
  DomainError(const std::string& what, std::string subexpression)
      : Error(what + " in '" + subexpression + "'"), subexpression_(std::move(subexpression)) {}
  const std::string& subexpression() const noexcept { return subexpression_; }

 private:
  std::string subexpression_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t position, std::string expected, std::string found)
      : Error("parse error at byte " + std::to_string(position) + ": expected " + expected +
              ", found " + found),
        position_(position),
        expected_(std::move(expected)),
        found_(std::move(found)) {}

  std::size_t position() const noexcept { return position_; }
  const std::string& expected() const noexcept { return expected_; }
  const std::string& found() const noexcept { return found_; }

 private:
  std::size_t position_;
  std::string expected_;
  std::string found_;
};

class UnknownVariable : public ParseError {
 public:
  UnknownVariable(std::size_t position, std::string name, std::size_t n)
      : ParseError(position, "t or x1..x" + std::to_string(n), "'" + name + "'"),
        name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

// Problem-file errors carry the 1-based line and the byte column inside that line.
class ConfigError : public Error {
 public:
  ConfigError(std::size_t line, std::size_t column, const std::string& what)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace sdae
