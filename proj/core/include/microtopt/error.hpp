#pragma once

#include <stdexcept>
#include <string>

namespace microtopt {

enum class ErrorKind {
  InvalidArgument,
  DegenerateElement,
  InadmissibleStrain,
  InadmissibleKinematics,
  StructuralSingularity,
  RankDeficiency,
  StepFailure,
  PathFailure,
  StaleState,
  OracleFailure,
  Io,
};

const char* to_string(ErrorKind kind) noexcept;

/// Base exception for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_error(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool condition, const std::string& what) {
  if (!condition) throw Error(ErrorKind::InvalidArgument, what);
}

}  // namespace microtopt
