#include "mnfd/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "mnfd/error.hpp"

namespace mnfd {

ManifoldKind parse_manifold_kind(const std::string& name) {
  if (name == "sphere") return ManifoldKind::Sphere;
  if (name == "torus") return ManifoldKind::Torus;
  if (name == "kplanes") return ManifoldKind::KPlanes;
  if (name == "uniform_ball") return ManifoldKind::UniformBall;
  throw Error(ErrorCode::InvalidArgument, "unknown manifold kind '" + name + "'");
}

std::string to_string(ManifoldKind kind) {
  switch (kind) {
    case ManifoldKind::Sphere: return "sphere";
    case ManifoldKind::Torus: return "torus";
    case ManifoldKind::KPlanes: return "kplanes";
    case ManifoldKind::UniformBall: break;
  }
  return "uniform_ball";
}

namespace {

void sample_sphere(const SyntheticParams& p, Rng& rng, SyntheticData& out) {
  if (p.d < 1 || p.d + 1 > p.n) throw Error(ErrorCode::InvalidArgument, "sphere needs 1 <= d < n");
  if (!(p.radius > 0)) throw Error(ErrorCode::InvalidArgument, "sphere radius must be positive");
  const Eigen::Index k = p.d + 1;
  for (std::size_t i = 0; i < p.count; ++i) {
    const Vec u = random_unit_vector(k, rng);
    Vec x = Vec::Zero(p.n);
    x.head(k) = p.radius * u;
    out.clean.col(static_cast<Eigen::Index>(i)) = x;
    // Tangent: orthogonal complement of u inside the first k coordinates.
    Mat frame = Mat::Zero(p.n, p.d);
    const Eigen::HouseholderQR<Mat> qr(u);
    const Mat q = qr.householderQ();
    frame.topRows(k) = q.rightCols(p.d);
    out.tangents.emplace_back(x, frame);
  }
  out.metadata = {{"radius", p.radius}, {"d", static_cast<double>(p.d)}, {"reach", p.radius}};
}

void sample_torus(const SyntheticParams& p, Rng& rng, SyntheticData& out) {
  if (p.n < 3) throw Error(ErrorCode::InvalidArgument, "torus needs n >= 3");
  if (!(p.minor > 0) || !(p.major > p.minor)) throw Error(ErrorCode::InvalidArgument, "torus needs major > minor > 0");
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi), unit(0.0, 1.0);
  for (std::size_t i = 0; i < p.count; ++i) {
    double u = 0, v = 0;
    // Rejection on the area element (major + minor cos v) gives the uniform surface measure.
    do {
      u = angle(rng);
      v = angle(rng);
    } while (unit(rng) * (p.major + p.minor) > p.major + p.minor * std::cos(v));
    Vec x = Vec::Zero(p.n);
    const double ring = p.major + p.minor * std::cos(v);
    x(0) = ring * std::cos(u);
    x(1) = ring * std::sin(u);
    x(2) = p.minor * std::sin(v);
    out.clean.col(static_cast<Eigen::Index>(i)) = x;
    Mat frame = Mat::Zero(p.n, 2);
    frame(0, 0) = -std::sin(u);
    frame(1, 0) = std::cos(u);
    frame(0, 1) = -std::sin(v) * std::cos(u);
    frame(1, 1) = -std::sin(v) * std::sin(u);
    frame(2, 1) = std::cos(v);
    out.tangents.emplace_back(x, frame);
  }
  out.metadata = {{"major", p.major}, {"minor", p.minor}, {"d", 2.0}, {"reach", p.minor}};
}

void sample_kplanes(const SyntheticParams& p, Rng& rng, SyntheticData& out) {
  if (p.d < 0 || p.d > p.n || p.planes == 0) throw Error(ErrorCode::InvalidArgument, "k-planes needs 0 <= d <= n, k >= 1");
  std::vector<AffineSubspace> planes;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t j = 0; j < p.planes; ++j) {
    const Mat rot = random_rotation(p.n, rng);
    const Vec base = 0.5 * std::pow(unit(rng), 1.0 / static_cast<double>(p.n)) * random_unit_vector(p.n, rng);
    planes.emplace_back(base, rot.leftCols(p.d));
  }
  std::uniform_int_distribution<std::size_t> pick(0, p.planes - 1);
  for (std::size_t i = 0; i < p.count; ++i) {
    const AffineSubspace& h = planes[pick(rng)];
    Vec coeff = Vec::Zero(p.d);
    if (p.d > 0)
      coeff = p.plane_extent * std::pow(unit(rng), 1.0 / static_cast<double>(p.d)) * random_unit_vector(p.d, rng);
    const Vec x = h.base() + h.basis() * coeff;
    out.clean.col(static_cast<Eigen::Index>(i)) = x;
    out.tangents.emplace_back(x, h.basis());
  }
  out.metadata = {{"k", static_cast<double>(p.planes)}, {"d", static_cast<double>(p.d)}, {"extent", p.plane_extent}};
}

void sample_ball(const SyntheticParams& p, Rng& rng, SyntheticData& out) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < p.count; ++i)
    out.clean.col(static_cast<Eigen::Index>(i)) =
        std::pow(unit(rng), 1.0 / static_cast<double>(p.n)) * random_unit_vector(p.n, rng);
  out.metadata = {{"radius", 1.0}};
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticParams& params) {
  if (params.n < 1) throw Error(ErrorCode::InvalidArgument, "ambient dimension must be positive");
  if (params.count == 0) throw Error(ErrorCode::InvalidArgument, "count must be positive");
  if (!(params.noise >= 0)) throw Error(ErrorCode::InvalidArgument, "noise must be nonnegative");
  Rng rng(params.seed);
  SyntheticData out;
  out.clean.resize(params.n, static_cast<Eigen::Index>(params.count));
  switch (params.kind) {
    case ManifoldKind::Sphere: sample_sphere(params, rng, out); break;
    case ManifoldKind::Torus: sample_torus(params, rng, out); break;
    case ManifoldKind::KPlanes: sample_kplanes(params, rng, out); break;
    case ManifoldKind::UniformBall: sample_ball(params, rng, out); break;
  }
  Mat pts = out.clean;
  if (params.noise > 0) {
    std::normal_distribution<double> gauss(0.0, params.noise);
    for (Eigen::Index j = 0; j < pts.cols(); ++j)
      for (Eigen::Index r = 0; r < pts.rows(); ++r) pts(r, j) += gauss(rng);
  }
  std::size_t clipped = 0;
  for (Eigen::Index j = 0; j < pts.cols(); ++j) {
    const double norm = pts.col(j).norm();
    if (norm > 1.0) {
      pts.col(j) /= norm;
      ++clipped;
    }
  }
  out.metadata["noise"] = params.noise;
  out.metadata["clipped"] = static_cast<double>(clipped);
  out.cloud = PointCloud(std::move(pts), std::nullopt, true);
  return out;
}

}  // namespace mnfd
