#include "mnfd/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "mnfd/error.hpp"

namespace mnfd {

PointCloud::PointCloud(Mat points, std::optional<Vec> weights, bool unit_ball)
    : points_(std::move(points)), unit_ball_(unit_ball) {
  const Eigen::Index n_points = points_.cols();
  if (n_points > 0 && points_.rows() < 1)
    throw Error(ErrorCode::InvalidArgument, "points must have dimension >= 1");
  if (!points_.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite coordinate");
  if (weights) {
    if (weights->size() != n_points)
      throw Error(ErrorCode::DimensionMismatch, "weight count differs from point count");
    if ((weights->array() < 0).any() || !weights->allFinite())
      throw Error(ErrorCode::InvalidArgument, "weights must be finite and nonnegative");
    const double total = weights->sum();
    if (n_points > 0 && total <= 0) throw Error(ErrorCode::InvalidArgument, "weights sum to zero");
    weights_ = *weights / total;
  } else {
    weights_ = Vec::Constant(n_points, n_points > 0 ? 1.0 / static_cast<double>(n_points) : 0.0);
  }
  if (unit_ball_) {
    for (Eigen::Index i = 0; i < n_points; ++i)
      if (points_.col(i).norm() > 1.0 + 1e-9)
        throw Error(ErrorCode::InvalidArgument, "point outside the unit ball");
  }
}

PointCloud PointCloud::subset(const std::vector<std::size_t>& indices) const {
  Mat pts(dim(), static_cast<Eigen::Index>(indices.size()));
  Vec w(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= size()) throw Error(ErrorCode::InvalidArgument, "subset index out of range");
    pts.col(static_cast<Eigen::Index>(k)) = point(indices[k]);
    w(static_cast<Eigen::Index>(k)) = weight(indices[k]);
  }
  if (indices.empty()) return PointCloud(Mat(dim(), 0));
  if (w.sum() <= 0) w.setOnes();
  return PointCloud(std::move(pts), std::move(w), unit_ball_);
}

AffineSubspace::AffineSubspace(Vec base, Mat basis) : base_(std::move(base)), basis_(std::move(basis)) {
  if (basis_.cols() == 0) basis_.resize(base_.size(), 0);
  if (basis_.rows() != base_.size())
    throw Error(ErrorCode::DimensionMismatch, "basis rows differ from base dimension");
  if (basis_.cols() > base_.size()) throw Error(ErrorCode::InvalidArgument, "subspace dimension exceeds n");
  const Mat gram = basis_.transpose() * basis_;
  if (basis_.cols() > 0 && (gram - Mat::Identity(basis_.cols(), basis_.cols())).cwiseAbs().maxCoeff() > 1e-10)
    throw Error(ErrorCode::InvalidArgument, "basis is not orthonormal");
}

Vec AffineSubspace::project(const Eigen::Ref<const Vec>& x) const {
  const Vec r = x - base_;
  return base_ + basis_ * (basis_.transpose() * r);
}

Vec AffineSubspace::nearest_to_origin() const {
  return base_ - basis_ * (basis_.transpose() * base_);
}

std::vector<std::size_t> greedy_net(const PointCloud& cloud, double r) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyInput, "greedy_net on empty cloud");
  if (!(r > 0)) throw Error(ErrorCode::InvalidArgument, "net radius must be positive");
  const double r2 = r * r;
  std::vector<std::size_t> selected;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    bool covered = false;
    for (std::size_t k = 0; k < selected.size() && !covered; ++k)
      covered = (cloud.point(selected[k]) - cloud.point(i)).squaredNorm() < r2;
    if (!covered) selected.push_back(i);
  }
  return selected;
}

void canonicalize_signs(Mat& basis) {
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    for (Eigen::Index i = 0; i < basis.rows(); ++i) {
      if (std::abs(basis(i, j)) > 1e-12) {
        if (basis(i, j) < 0) basis.col(j) = -basis.col(j);
        break;
      }
    }
  }
}

Mat principal_directions(const Mat& pts, Eigen::Index d, const Vec* weights) {
  const Eigen::Index n = pts.rows();
  Vec w = weights ? *weights : Vec::Constant(pts.cols(), 1.0);
  w /= w.sum();
  const Vec mean = pts * w;
  const Mat centered = pts.colwise() - mean;
  const Mat cov = centered * w.asDiagonal() * centered.transpose();
  Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
  // Eigenvalues ascend; take the last d columns in descending order.
  Mat basis(n, d);
  for (Eigen::Index k = 0; k < d; ++k) basis.col(k) = eig.eigenvectors().col(n - 1 - k);
  canonicalize_signs(basis);
  return basis;
}

AffineSubspace estimate_tangent(const PointCloud& cloud, std::size_t center_index, double radius,
                                Eigen::Index d) {
  if (center_index >= cloud.size()) throw Error(ErrorCode::InvalidArgument, "center index out of range");
  if (d < 0 || d > cloud.dim()) throw Error(ErrorCode::InvalidArgument, "tangent dimension out of range");
  const Vec c = cloud.point(center_index);
  std::vector<Eigen::Index> nbrs;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if ((cloud.point(i) - c).norm() <= radius) nbrs.push_back(static_cast<Eigen::Index>(i));
  if (static_cast<Eigen::Index>(nbrs.size()) < d + 1)
    throw Error(ErrorCode::UnderdeterminedTangent,
                "need " + std::to_string(d + 1) + " neighbors, found " + std::to_string(nbrs.size()));
  Mat pts(cloud.dim(), static_cast<Eigen::Index>(nbrs.size()));
  for (std::size_t k = 0; k < nbrs.size(); ++k) pts.col(static_cast<Eigen::Index>(k)) = cloud.points().col(nbrs[k]);
  const Vec mean = pts.rowwise().mean();
  const Mat centered = pts.colwise() - mean;
  if (d > 0 && centered.squaredNorm() <= 1e-300)
    throw Error(ErrorCode::Degenerate, "zero neighborhood covariance");
  return AffineSubspace(c, principal_directions(pts, d));
}

ReachEstimate federer_reach(const PointCloud& cloud, const std::vector<AffineSubspace>& tangents) {
  if (cloud.size() < 2) throw Error(ErrorCode::InsufficientData, "federer_reach needs two points");
  if (tangents.size() != cloud.size())
    throw Error(ErrorCode::DimensionMismatch, "one tangent per point is required");
  ReachEstimate best;
  const Mat& pts = cloud.points();
  for (std::size_t a = 0; a < cloud.size(); ++a) {
    const AffineSubspace& tan = tangents[a];
    if (tan.ambient_dim() != cloud.dim()) throw Error(ErrorCode::DimensionMismatch, "tangent dimension");
    const Mat rel = pts.colwise() - tan.base();
    const Mat normal = rel - tan.basis() * (tan.basis().transpose() * rel);
    const Vec pa = cloud.point(a);
    for (std::size_t b = 0; b < cloud.size(); ++b) {
      if (a == b) continue;
      const double dist = normal.col(static_cast<Eigen::Index>(b)).norm();
      if (dist < 1e-14) continue;
      const double value = (pts.col(static_cast<Eigen::Index>(b)) - pa).squaredNorm() / (2.0 * dist);
      if (best.unbounded || value < best.value) {
        best.value = value;
        best.unbounded = false;
        best.argpair = std::make_pair(a, b);
      }
    }
  }
  return best;
}

double dist_to_affine(const Eigen::Ref<const Vec>& x, const AffineSubspace& h) {
  if (x.size() != h.ambient_dim()) throw Error(ErrorCode::DimensionMismatch, "dist_to_affine");
  const Vec r = x - h.base();
  return (r - h.basis() * (h.basis().transpose() * r)).norm();
}

namespace {
double directed_hausdorff(const Mat& a, const Mat& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.cols(); ++i) {
    const double nearest = (b.colwise() - a.col(i)).colwise().squaredNorm().minCoeff();
    worst = std::max(worst, nearest);
  }
  return std::sqrt(worst);
}
}  // namespace

double hausdorff_distance(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyInput, "hausdorff_distance");
  if (a.dim() != b.dim()) throw Error(ErrorCode::DimensionMismatch, "hausdorff_distance");
  return std::max(directed_hausdorff(a.points(), b.points()), directed_hausdorff(b.points(), a.points()));
}

}  // namespace mnfd
