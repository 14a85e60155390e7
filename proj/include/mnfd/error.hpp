#pragma once

#include <stdexcept>
#include <string>

namespace mnfd {

enum class ErrorCode {
  EmptyInput,
  InvalidArgument,
  DimensionMismatch,
  InsufficientData,
  UnderdeterminedTangent,
  Degenerate,
  OutOfDomain,
  DegenerateCover,
  InsufficientGap,
  EscapedDomain,
  NoConvergence,
  EmptyMesh,
  DecompositionFailed,
  BudgetExceeded,
  DuplicateSites,
  SiteMismatch,
  ZeroDenominator,
  Infeasible,
  NoValidPacket,
  Io,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mnfd
