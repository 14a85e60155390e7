#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mnfd/geometry.hpp"

namespace mnfd {

enum class ManifoldKind { Sphere, Torus, KPlanes, UniformBall };

ManifoldKind parse_manifold_kind(const std::string& name);
std::string to_string(ManifoldKind kind);

struct SyntheticParams {
  ManifoldKind kind = ManifoldKind::Sphere;
  Eigen::Index n = 3;
  Eigen::Index d = 1;   ///< intrinsic dimension (sphere and k-planes)
  double radius = 1.0;  ///< sphere radius
  double major = 0.6;   ///< torus center-circle radius
  double minor = 0.25;  ///< torus tube radius
  std::size_t planes = 2;
  double plane_extent = 0.5;  ///< radius of the disc sampled on each plane
  double noise = 0.0;         ///< isotropic Gaussian standard deviation
  std::size_t count = 1000;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  PointCloud cloud;
  Mat clean;                              ///< noise-free points before clipping
  std::vector<AffineSubspace> tangents;   ///< tangent at each clean point (empty for the ball)
  std::map<std::string, double> metadata; ///< ground-truth parameters
};

/// Deterministic samples near the chosen manifold, radially clipped into the closed unit ball.
SyntheticData generate_synthetic(const SyntheticParams& params);

}  // namespace mnfd
