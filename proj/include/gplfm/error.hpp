#pragma once

#include <stdexcept>
#include <string>

namespace gplfm {

/// Error classes. The CLI maps each class to a fixed process exit code.
enum class ErrorKind {
  InvalidInput = 3,
  Parse = 4,
  Numerical = 5,
  Tuning = 6,
  UndefinedMetric = 8,
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

struct InvalidInput : Error {
  explicit InvalidInput(const std::string& what) : Error(ErrorKind::InvalidInput, what) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& what) : Error(ErrorKind::Parse, what) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

struct TuningError : Error {
  explicit TuningError(const std::string& what) : Error(ErrorKind::Tuning, what) {}
};

struct UndefinedMetric : Error {
  explicit UndefinedMetric(const std::string& what) : Error(ErrorKind::UndefinedMetric, what) {}
};

}  // namespace gplfm
