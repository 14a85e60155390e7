#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "mnfd/types.hpp"

namespace mnfd {

/// Weighted finite point set in R^n. Points are stored one per column.
class PointCloud {
 public:
  PointCloud() = default;
  /// `points` is n x N. Weights default to uniform and are normalized to sum 1.
  explicit PointCloud(Mat points, std::optional<Vec> weights = std::nullopt,
                      bool unit_ball = false);

  std::size_t size() const { return static_cast<std::size_t>(points_.cols()); }
  bool empty() const { return points_.cols() == 0; }
  Eigen::Index dim() const { return points_.rows(); }
  auto point(std::size_t i) const { return points_.col(static_cast<Eigen::Index>(i)); }
  double weight(std::size_t i) const { return weights_(static_cast<Eigen::Index>(i)); }
  const Mat& points() const { return points_; }
  const Vec& weights() const { return weights_; }
  bool unit_ball() const { return unit_ball_; }

  /// Subset in the given order, weights renormalized.
  PointCloud subset(const std::vector<std::size_t>& indices) const;

 private:
  Mat points_;
  Vec weights_;
  bool unit_ball_ = false;
};

/// base + span(basis columns); basis is n x d with orthonormal columns.
class AffineSubspace {
 public:
  AffineSubspace() = default;
  AffineSubspace(Vec base, Mat basis);

  Eigen::Index ambient_dim() const { return base_.size(); }
  Eigen::Index dim() const { return basis_.cols(); }
  const Vec& base() const { return base_; }
  const Mat& basis() const { return basis_; }

  Vec project(const Eigen::Ref<const Vec>& x) const;
  /// Point of the subspace closest to the origin.
  Vec nearest_to_origin() const;

 private:
  Vec base_;
  Mat basis_;
};

struct ReachEstimate {
  double value = std::numeric_limits<double>::infinity();
  bool unbounded = true;
  std::optional<std::pair<std::size_t, std::size_t>> argpair;
};

std::vector<std::size_t> greedy_net(const PointCloud& cloud, double r);

AffineSubspace estimate_tangent(const PointCloud& cloud, std::size_t center_index, double radius,
                                Eigen::Index d);

/// Top-d principal directions of the centered covariance of the columns of `pts`,
/// with the sign convention "first nonzero coordinate positive".
Mat principal_directions(const Mat& pts, Eigen::Index d, const Vec* weights = nullptr);

/// Flips each column so that its first entry with magnitude > 1e-12 is positive.
void canonicalize_signs(Mat& basis);

/// tangents[i] is the tangent subspace at point i.
ReachEstimate federer_reach(const PointCloud& cloud, const std::vector<AffineSubspace>& tangents);

double dist_to_affine(const Eigen::Ref<const Vec>& x, const AffineSubspace& h);

double hausdorff_distance(const PointCloud& a, const PointCloud& b);

}  // namespace mnfd
