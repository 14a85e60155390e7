#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "mnfd/geometry.hpp"

namespace mnfd {

/// Rigid motion o(w) = rotation * w + center; the first d columns of the rotation
/// span the central cross-section.
struct Cylinder {
  Mat rotation;
  Vec center;

  Vec to_local(const Eigen::Ref<const Vec>& z) const { return rotation.transpose() * (z - center); }
  Vec to_ambient(const Eigen::Ref<const Vec>& w) const { return rotation * w + center; }
};

/// Tolerances of the alignment conditions. The rotation-defect bound is c12 * tau_bar / tau
/// and the normal-offset bound is C * tau_bar^2 / tau.
struct AlignmentConstants {
  double c12 = 8.0;
  double C = 32.0;
};

class CylinderPacket {
 public:
  CylinderPacket() = default;
  CylinderPacket(std::vector<Cylinder> cylinders, Eigen::Index d, double tau, double tau_bar,
                 AlignmentConstants align = {});

  const std::vector<Cylinder>& cylinders() const { return cylinders_; }
  const Cylinder& cylinder(std::size_t i) const { return cylinders_[i]; }
  std::size_t size() const { return cylinders_.size(); }
  Eigen::Index n() const { return n_; }
  Eigen::Index d() const { return d_; }
  double tau() const { return tau_; }
  double tau_bar() const { return tau_bar_; }
  const AlignmentConstants& alignment() const { return align_; }
  /// n x N matrix of centers.
  const Mat& centers() const { return centers_; }

  /// Indices of cylinders whose center lies within `radius` of z, ascending.
  std::vector<std::size_t> near(const Eigen::Ref<const Vec>& z, double radius) const;

 private:
  std::vector<Cylinder> cylinders_;
  Mat centers_;
  Eigen::Index n_ = 0;
  Eigen::Index d_ = 0;
  double tau_ = 0;
  double tau_bar_ = 0;
  AlignmentConstants align_;
};

/// Completes an orthonormal n x d basis to a rotation whose first d columns equal it.
Mat frame_from_tangent(const Mat& basis);

/// One cylinder per point of a greedy tau_bar/2 net of the sample, centered at tangent(index).base()
/// and oriented by its basis.
CylinderPacket ideal_packet(const PointCloud& sample,
                            const std::function<AffineSubspace(std::size_t)>& tangent, Eigen::Index d,
                            double tau, double cbar12, AlignmentConstants align = {});

struct ConditionResult {
  bool passed = true;
  double worst = 0;  ///< largest measured quantity (uncovered fraction for coverage)
  double bound = 0;
  std::vector<std::size_t> failing;
};

struct PacketValidation {
  std::array<ConditionResult, 4> conditions;
  std::vector<std::size_t> neighbor_counts;

  bool valid() const;
  std::string summary() const;
};

PacketValidation validate_packet(const CylinderPacket& packet);

/// Coverage-grid points of B_d(0, 3 tau_bar), in the base coordinates of cylinder `index`,
/// that no neighboring cross-section covers.
std::vector<Vec> uncovered_base_points(const CylinderPacket& packet, std::size_t index);

}  // namespace mnfd
