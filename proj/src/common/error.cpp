#include "tosc/common/error.hpp"

namespace tosc {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::InvalidState: return "invalid-state";
    case ErrorCode::DegenerateGeometry: return "degenerate-geometry";
    case ErrorCode::CategoryNotFound: return "category-not-found";
    case ErrorCode::UnknownTask: return "unknown-task";
    case ErrorCode::NoCandidate: return "no-candidate";
    case ErrorCode::NumericFailure: return "numeric-failure";
    case ErrorCode::UnsupportedObject: return "unsupported-object";
    case ErrorCode::Io: return "io";
    case ErrorCode::Config: return "config";
  }
  return "unknown";
}

}  // namespace tosc
