#pragma once

#include <string>
#include <vector>

#include "mnfd/packet.hpp"

namespace mnfd {

/// Constants of the spectral projection and the Newton solver.
struct AsdfConstants {
  double cbar2 = 0.5;   ///< lower end of the normal eigenvalue band
  double Cbar3 = 4.0;   ///< upper end of the normal eigenvalue band
  double gap_tol = 0.25;
  double newton_tol = 1e-10;
  int max_steps = 50;
  int max_halvings = 20;
};

struct AsdfDerivatives {
  double value = 0;
  Vec gradient;
  Mat hessian;
  std::size_t active = 0;  ///< number of cylinders containing z
};

double asdf_eval(const CylinderPacket& packet, const Eigen::Ref<const Vec>& z);
AsdfDerivatives asdf_grad_hess(const CylinderPacket& packet, const Eigen::Ref<const Vec>& z);

struct SpectralProjection {
  Mat projector;
  Mat fiber_basis;  ///< n x codim, eigenvectors of the top eigenvalues
  Vec eigenvalues;  ///< ascending
  double gap = 0;
  bool in_band = false;  ///< top eigenvalues inside [cbar2, Cbar3]
};

SpectralProjection pi_hi(const Mat& hessian, Eigen::Index codim, double gap_tol,
                         const AsdfConstants& constants = {});

struct BundleChart {
  Vec base_point;
  Mat projector_hi;
  Mat fiber_basis;
  std::size_t owning_cylinder = 0;
  double residual = 0;
  int steps = 0;

  /// Orthonormal basis of the complement of the fiber.
  Mat tangent_basis() const;
};

BundleChart solve_base_point(const CylinderPacket& packet, const Eigen::Ref<const Vec>& z0,
                             const AsdfConstants& constants = {});

struct PutativeMesh {
  std::vector<BundleChart> charts;
  double tolerance = 0;
  std::size_t failures = 0;
  std::string first_failure;

  PointCloud base_points() const;
};

PutativeMesh extract_putative_manifold(const CylinderPacket& packet, const PointCloud& seeds,
                                       const AsdfConstants& constants = {});

struct BundleCoordinates {
  BundleChart base;
  Vec v;
  double residual = 0;
  int iterations = 0;
};

/// Writes z = base + v with v in the fiber at base, starting the search from `start`.
BundleCoordinates bundle_coordinates(const CylinderPacket& packet, const BundleChart& start,
                                     const Eigen::Ref<const Vec>& z, const AsdfConstants& constants = {});

struct AsdfThresholds {
  double c1_min = 0.1;
  double C1_max = 10.0;
  double C0 = 10.0;
};

struct AsdfConditionReport {
  double c1 = 0;
  double C1 = 0;
  double max_value = 0;
  double max_gradient = 0;
  double max_hessian = 0;
  std::size_t evaluated = 0;
  std::vector<std::size_t> escaped;  ///< sample indices whose grid left the domain
  bool lower_violated = false;
  bool upper_violated = false;
  bool derivative_violated = false;

  bool ok() const { return !lower_violated && !upper_violated && !derivative_violated; }
};

/// frames[i] is an n x n rotation whose first d columns span the tangent at sample i.
AsdfConditionReport check_asdf_conditions(const CylinderPacket& packet, const PointCloud& sample,
                                          const std::vector<Mat>& frames, double rho,
                                          const AsdfThresholds& thresholds = {}, double grid_step = 0.25);

}  // namespace mnfd
