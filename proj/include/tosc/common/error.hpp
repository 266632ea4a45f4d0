#pragma once

#include <stdexcept>
#include <string>

namespace tosc {

enum class ErrorCode {
  InvalidArgument,
  InvalidState,
  DegenerateGeometry,
  CategoryNotFound,
  UnknownTask,
  NoCandidate,
  NumericFailure,
  UnsupportedObject,
  Io,
  Config,
};

const char* to_string(ErrorCode code);

/// Base exception for everything the library throws on contract violations.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::InvalidArgument, what);
}

}  // namespace tosc
