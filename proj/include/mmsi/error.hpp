#pragma once

#include <stdexcept>
#include <string>

namespace mmsi {

enum class ErrorCode {
  // input / validation
  Schema,
  InvalidArgument,
  DegenerateSubset,
  EmptyCell,
  InconsistentTotals,
  IncompatibleMethod,
  MismatchedSubjectAxis,
  // numerical
  ZeroVariance,
  Separation,
  NoConvergence,
  NotPSD,
  DegenerateVariance,
};

const char* to_string(ErrorCode code) noexcept;

// True for failures of the numerical machinery rather than of the input.
bool is_numerical(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mmsi
