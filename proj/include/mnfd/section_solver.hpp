#pragma once

#include <string>

#include "mnfd/error.hpp"
#include "mnfd/whitney.hpp"

namespace mnfd {

enum class SolverKind { InteriorPoint, CuttingPlane, ProjectedGradient };

SolverKind parse_solver(const std::string& name);
std::string to_string(SolverKind kind);

struct SolverResult {
  Mat x;                   ///< flattened feasible field
  double zeta = 0;         ///< objective at x
  double lower_bound = 0;  ///< Lagrangian dual bound on the optimum
  std::size_t iterations = 0;
  SolverKind used = SolverKind::InteriorPoint;

  double gap() const { return zeta - lower_bound; }
};

/// Raised when the iteration budget runs out before the duality gap closes.
class BudgetExceeded : public Error {
 public:
  BudgetExceeded(const std::string& what, SolverResult best)
      : Error(ErrorCode::BudgetExceeded, what), best_(std::move(best)) {}
  const SolverResult& best() const { return best_; }

 private:
  SolverResult best_;
};

/// Dual function of  min zeta  s.t.  ||alpha_i^T x||^2 <= beta_i  at multipliers lambda >= 0.
double lagrangian_lower_bound(const SketchedData& data, const ConstraintSet& cs, const Vec& lambda);

/// Multipliers fitted to the KKT stationarity condition at x, then improved by dual ascent.
Vec estimate_multipliers(const SketchedData& data, const ConstraintSet& cs, const Mat& x);

/// `budget` counts Newton steps for the interior-point solver and outer iterations otherwise.
/// Returns a feasible field whose objective is within `tolerance` of the optimum,
/// certified by the dual bound. Throws BudgetExceeded (with the best feasible field)
/// when `budget` iterations do not suffice.
SolverResult minimize_section(const SketchedData& data, const ConstraintSet& cs, double tolerance,
                              std::size_t budget, SolverKind kind = SolverKind::InteriorPoint);

}  // namespace mnfd
