#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pencillab {

/// Failure categories shared by every module. The CLI maps these to exit codes.
enum class ErrorKind {
  Parse,
  Precondition,
  AxisProximity,
  DegenerateGradient,
  ProjectionFailure,
  SearchFailure,
  GramSingular,
  CompletenessViolation,
  RadialMonotonicity,
  AxisApproach,
  BallExit,
  StepCollapse,
  DegenerateAfterRetries,
  Unstable,
  Overflow,
  Io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::Precondition: return "Precondition";
    case ErrorKind::AxisProximity: return "AxisProximity";
    case ErrorKind::DegenerateGradient: return "DegenerateGradient";
    case ErrorKind::ProjectionFailure: return "ProjectionFailure";
    case ErrorKind::SearchFailure: return "SearchFailure";
    case ErrorKind::GramSingular: return "GramSingular";
    case ErrorKind::CompletenessViolation: return "CompletenessViolation";
    case ErrorKind::RadialMonotonicity: return "RadialMonotonicity";
    case ErrorKind::AxisApproach: return "AxisApproach";
    case ErrorKind::BallExit: return "BallExit";
    case ErrorKind::StepCollapse: return "StepCollapse";
    case ErrorKind::DegenerateAfterRetries: return "DegenerateAfterRetries";
    case ErrorKind::Unstable: return "Unstable";
    case ErrorKind::Overflow: return "Overflow";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Syntax errors carry the 0-based character offset into the source text.
class ParseError : public Error {
 public:
  ParseError(std::size_t position, const std::string& what)
      : Error(ErrorKind::Parse, what + " at position " + std::to_string(position)),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

inline void require(bool condition, const std::string& what) {
  if (!condition) throw Error(ErrorKind::Precondition, what);
}

}  // namespace pencillab
