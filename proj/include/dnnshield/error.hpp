#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dnnshield {

enum class ErrorKind {
  ShapeMismatch,
  NumericalError,
  PlanMismatch,
  UnsupportedLayer,
  DivergenceError,
  FormatError,
  EmptyFilter,
  TooFewClasses,
  DomainError,
  EmptyCorpus,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace dnnshield
