#include "mnfd/packet.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>
#include <sstream>

#include "mnfd/error.hpp"

namespace mnfd {

CylinderPacket::CylinderPacket(std::vector<Cylinder> cylinders, Eigen::Index d, double tau, double tau_bar,
                               AlignmentConstants align)
    : cylinders_(std::move(cylinders)), d_(d), tau_(tau), tau_bar_(tau_bar), align_(align) {
  if (cylinders_.empty()) throw Error(ErrorCode::EmptyInput, "packet has no cylinders");
  if (!(tau > 0) || !(tau_bar > 0)) throw Error(ErrorCode::InvalidArgument, "packet scales must be positive");
  n_ = cylinders_.front().center.size();
  if (d_ < 0 || d_ >= n_) throw Error(ErrorCode::InvalidArgument, "packet needs 0 <= d < n");
  centers_.resize(n_, static_cast<Eigen::Index>(cylinders_.size()));
  for (std::size_t i = 0; i < cylinders_.size(); ++i) {
    const Cylinder& c = cylinders_[i];
    if (c.center.size() != n_ || c.rotation.rows() != n_ || c.rotation.cols() != n_)
      throw Error(ErrorCode::DimensionMismatch, "cylinder dimensions differ");
    if ((c.rotation.transpose() * c.rotation - Mat::Identity(n_, n_)).cwiseAbs().maxCoeff() > 1e-10)
      throw Error(ErrorCode::InvalidArgument, "cylinder rotation is not orthogonal");
    if (c.rotation.determinant() < 0) throw Error(ErrorCode::InvalidArgument, "cylinder rotation has det -1");
    if (c.center.norm() > 1.0 + tau_bar_ + 1e-9)
      throw Error(ErrorCode::InvalidArgument, "cylinder center outside the unit ball");
    centers_.col(static_cast<Eigen::Index>(i)) = c.center;
  }
}

std::vector<std::size_t> CylinderPacket::near(const Eigen::Ref<const Vec>& z, double radius) const {
  std::vector<std::size_t> out;
  const double r2 = radius * radius;
  for (Eigen::Index i = 0; i < centers_.cols(); ++i)
    if ((centers_.col(i) - z).squaredNorm() <= r2) out.push_back(static_cast<std::size_t>(i));
  return out;
}

Mat frame_from_tangent(const Mat& basis) {
  const Eigen::Index n = basis.rows(), d = basis.cols();
  Mat stacked(n, d + n);
  stacked << basis, Mat::Identity(n, n);
  Eigen::HouseholderQR<Mat> qr(stacked);
  Mat q = qr.householderQ() * Mat::Identity(n, n);
  q.leftCols(d) = basis;
  if (q.determinant() < 0) q.col(n - 1) = -q.col(n - 1);
  return q;
}

CylinderPacket ideal_packet(const PointCloud& sample,
                            const std::function<AffineSubspace(std::size_t)>& tangent, Eigen::Index d,
                            double tau, double cbar12, AlignmentConstants align) {
  if (!(tau > 0) || !(cbar12 > 0)) throw Error(ErrorCode::InvalidArgument, "ideal_packet scales");
  const double tau_bar = cbar12 * tau;
  std::vector<Cylinder> cylinders;
  for (std::size_t idx : greedy_net(sample, tau_bar / 2)) {
    const AffineSubspace t = tangent(idx);
    if (t.dim() != d) throw Error(ErrorCode::DimensionMismatch, "tangent dimension differs from d");
    cylinders.push_back(Cylinder{frame_from_tangent(t.basis()), t.base()});
  }
  return CylinderPacket(std::move(cylinders), d, tau, tau_bar, align);
}

bool PacketValidation::valid() const {
  for (const auto& c : conditions)
    if (!c.passed) return false;
  return true;
}

std::string PacketValidation::summary() const {
  std::ostringstream os;
  for (int k = 0; k < 4; ++k) {
    const auto& c = conditions[static_cast<std::size_t>(k)];
    os << (k ? "; " : "") << "(" << k + 1 << ") " << (c.passed ? "pass" : "FAIL") << " worst=" << c.worst
       << " bound=" << c.bound;
    if (!c.failing.empty()) os << " failing=" << c.failing.size();
  }
  return os.str();
}

namespace {

/// Grid of points in B_d(0, radius) with the given spacing.
std::vector<Vec> ball_grid(Eigen::Index d, double radius, double spacing) {
  std::vector<Vec> out;
  const int half = static_cast<int>(std::floor(radius / spacing + 1e-9));
  const int side = 2 * half + 1;
  long total = 1;
  for (Eigen::Index k = 0; k < d; ++k) total *= side;
  Vec p(d);
  for (long idx = 0; idx < total; ++idx) {
    long rem = idx;
    for (Eigen::Index k = 0; k < d; ++k) {
      p(k) = spacing * static_cast<double>(rem % side - half);
      rem /= side;
    }
    if (p.norm() <= radius + 1e-12) out.push_back(p);
  }
  return out;
}

bool covered(const Vec& g, const std::vector<Vec>& offsets, double tau_bar) {
  for (const Vec& o : offsets)
    if ((g - o).norm() <= tau_bar * (1 + 1e-12)) return true;
  return false;
}

double coverage_spacing(Eigen::Index d, double tau_bar) { return d <= 2 ? tau_bar / 20 : tau_bar / 5; }

}  // namespace

PacketValidation validate_packet(const CylinderPacket& packet) {
  const Eigen::Index d = packet.d(), n = packet.n();
  const double tb = packet.tau_bar(), tau = packet.tau();
  PacketValidation report;
  report.conditions[0].bound = 1e-8;  // smallest cosine of a principal angle
  report.conditions[1].bound = packet.alignment().c12 * tb / tau;
  report.conditions[2].bound = packet.alignment().C * tb * tb / tau;
  report.conditions[3].bound = 0;
  report.conditions[0].worst = 1.0;
  // Bounding spheres of the doubled cylinders have radius 2 sqrt(2) tau_bar.
  const double reach_radius = 4.0 * std::sqrt(2.0) * tb;
  // Coverage grid: spacing tau_bar/20, coarsened in high base dimension to stay tractable.
  const std::vector<Vec> grid = d > 0 ? ball_grid(d, 3 * tb, coverage_spacing(d, tb)) : std::vector<Vec>{};
  for (std::size_t i = 0; i < packet.size(); ++i) {
    const Cylinder& ci = packet.cylinder(i);
    const Mat ti = ci.rotation.leftCols(d);
    const std::vector<std::size_t> nbrs = packet.near(ci.center, reach_radius);
    report.neighbor_counts.push_back(nbrs.size() - 1);
    bool f1 = false, f2 = false, f3 = false;
    std::vector<Vec> offsets;
    for (std::size_t j : nbrs) {
      const Cylinder& cj = packet.cylinder(j);
      const Vec w = ci.to_local(cj.center);
      offsets.push_back(w.head(d));
      if (j == i) continue;
      double min_cos = 1.0;
      if (d > 0) {
        Eigen::JacobiSVD<Mat> svd(ti.transpose() * cj.rotation.leftCols(d));
        min_cos = std::min(1.0, svd.singularValues().minCoeff());
      }
      report.conditions[0].worst = std::min(report.conditions[0].worst, min_cos);
      if (min_cos <= report.conditions[0].bound) f1 = true;
      const double defect = std::sqrt(std::max(0.0, 2.0 - 2.0 * min_cos));
      report.conditions[1].worst = std::max(report.conditions[1].worst, defect);
      if (defect > report.conditions[1].bound) f2 = true;
      const double offset = w.tail(n - d).norm();
      report.conditions[2].worst = std::max(report.conditions[2].worst, offset);
      if (offset > report.conditions[2].bound) f3 = true;
    }
    std::size_t uncovered = 0;
    for (const Vec& g : grid)
      if (!covered(g, offsets, tb)) ++uncovered;
    const double frac = grid.empty() ? 0.0 : static_cast<double>(uncovered) / static_cast<double>(grid.size());
    report.conditions[3].worst = std::max(report.conditions[3].worst, frac);
    if (f1) report.conditions[0].failing.push_back(i);
    if (f2) report.conditions[1].failing.push_back(i);
    if (f3) report.conditions[2].failing.push_back(i);
    if (uncovered > 0) report.conditions[3].failing.push_back(i);
  }
  for (auto& c : report.conditions) c.passed = c.failing.empty();
  return report;
}

std::vector<Vec> uncovered_base_points(const CylinderPacket& packet, std::size_t index) {
  const Eigen::Index d = packet.d();
  const double tb = packet.tau_bar();
  std::vector<Vec> out;
  if (d == 0) return out;
  const Cylinder& ci = packet.cylinder(index);
  std::vector<Vec> offsets;
  for (std::size_t j : packet.near(ci.center, 4.0 * std::sqrt(2.0) * tb))
    offsets.push_back(ci.to_local(packet.cylinder(j).center).head(d));
  for (const Vec& g : ball_grid(d, 3 * tb, coverage_spacing(d, tb)))
    if (!covered(g, offsets, tb)) out.push_back(g);
  return out;
}

}  // namespace mnfd
