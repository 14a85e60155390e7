#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "mnfd/geometry.hpp"

namespace mnfd {

struct BoundParams {
  double d = 1;
  double V = 1;
  double tau = 0.5;
  double eps = 0.1;
  double delta = 0.1;
  double C = 1;

  /// Throws InvalidArgument unless all positive, tau < 1, eps and delta in (0, 1).
  void validate() const;
};

/// Fat-shattering bound gamma -> value, zero above `support_ceiling`.
struct FatProfile {
  std::function<double(double)> evaluator;
  double support_ceiling = 0;
};

/// U_G(1/r) = C V (1/tau^d + 1/(tau r)^{d/2}).
double covering_bound(const BoundParams& p, double r);

/// s_G(eps, delta) with U = covering_bound(p, eps) and natural logarithms.
double sample_complexity(const BoundParams& p);

/// (C k l / gamma^2) log^2(C k l / gamma^2) with the log argument clamped below at e;
/// exactly 0 for gamma > 2.
double fat_bound_maxmin(std::uint64_t k, std::uint64_t l, double gamma, double C = 1.0);

/// eps + 12 * integral over [eps/4, ceiling / c] of sqrt(profile(c eta) / s) d eta.
double chaining_bound(const FatProfile& profile, double eps, std::uint64_t s, double c = 1.0);

/// Adaptive Simpson quadrature with relative tolerance `rel_tol`.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double rel_tol = 1e-8, int max_depth = 50);

struct RademacherEstimate {
  double value = 0;
  double std_error = 0;
};

/// `values` is F x s (one row per function). Monte-Carlo over sign vectors.
RademacherEstimate empirical_rademacher(const Mat& values, std::uint64_t trials, std::uint64_t seed);

struct JlProjection {
  PointCloud projected;  ///< ambient coordinates of the projections
  Mat frame;             ///< n x g orthonormal frame of the random subspace
  double scale = 1;      ///< n / g
};

JlProjection jl_project(const PointCloud& cloud, Eigen::Index g, std::uint64_t seed);

/// ceil(C ln(l) / gamma^2).
Eigen::Index jl_dimension(std::uint64_t l, double gamma, double C = 4.0);

struct LiftCheck {
  double lhs = 0;
  double rhs = 0;
  double psi_norm = 0;
  double max_phi_norm = 0;
};

/// Feature maps of the k-planes lifting with P the parallel projector of H and
/// c its point nearest the origin:
///   Phi(H) = (|c|^2, -P, -2c) / sqrt(d+5),  Psi(x) = (1, x x^T, x) / sqrt(3),
/// so that d(x, H)^2 = |x|^2 + sqrt(3(d+5)) Phi(H).Psi(x).
Vec lift_phi(const AffineSubspace& h, Eigen::Index d);
Vec lift_psi(const Eigen::Ref<const Vec>& x);

/// `d` defaults to the largest plane dimension.
LiftCheck lift_identity_check(const Eigen::Ref<const Vec>& x, const std::vector<AffineSubspace>& planes,
                              Eigen::Index d = -1);

/// sum_{i <= vc} binom(k, i), saturating at UINT64_MAX.
std::uint64_t sauer_shelah(std::uint64_t vc, std::uint64_t k);

}  // namespace mnfd
