#include "mnfd/error.hpp"

namespace mnfd {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyInput: return "empty-input";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::InsufficientData: return "insufficient-data";
    case ErrorCode::UnderdeterminedTangent: return "underdetermined-tangent";
    case ErrorCode::Degenerate: return "degenerate";
    case ErrorCode::OutOfDomain: return "out-of-domain";
    case ErrorCode::DegenerateCover: return "degenerate-cover";
    case ErrorCode::InsufficientGap: return "insufficient-gap";
    case ErrorCode::EscapedDomain: return "escaped-domain";
    case ErrorCode::NoConvergence: return "no-convergence";
    case ErrorCode::EmptyMesh: return "empty-mesh";
    case ErrorCode::DecompositionFailed: return "decomposition-failed";
    case ErrorCode::BudgetExceeded: return "budget-exceeded";
    case ErrorCode::DuplicateSites: return "duplicate-sites";
    case ErrorCode::SiteMismatch: return "site-mismatch";
    case ErrorCode::ZeroDenominator: return "zero-denominator";
    case ErrorCode::Infeasible: return "infeasible";
    case ErrorCode::NoValidPacket: return "no-valid-packet";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

}  // namespace mnfd
