#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "mnfd/asdf.hpp"
#include "mnfd/bump.hpp"
#include "mnfd/error.hpp"
#include "mnfd/packet.hpp"

using namespace mnfd;

namespace {

Mat rotation2(double angle) {
  Mat r(2, 2);
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

CylinderPacket single_flat(double tau_bar) {
  return CylinderPacket({Cylinder{Mat::Identity(2, 2), Vec::Zero(2)}}, 1, 1.0, tau_bar);
}

/// Largest normwise relative error of the analytic gradient and Hessian against central differences.
std::pair<double, double> fd_errors(const CylinderPacket& packet, const Vec& z, double h) {
  const Eigen::Index n = z.size();
  const AsdfDerivatives a = asdf_grad_hess(packet, z);
  Vec g(n);
  Mat hess(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec zp = z, zm = z;
    zp(i) += h;
    zm(i) -= h;
    g(i) = (asdf_eval(packet, zp) - asdf_eval(packet, zm)) / (2 * h);
    hess.col(i) = (asdf_grad_hess(packet, zp).gradient - asdf_grad_hess(packet, zm).gradient) / (2 * h);
  }
  const double eg = (g - a.gradient).norm() / std::max(a.gradient.norm(), 1e-8);
  const double eh = (hess - a.hessian).norm() / std::max(a.hessian.norm(), 1e-8);
  return {eg, eh};
}

}  // namespace

TEST_CASE("bump function") {
  const Bump zero = bump_theta(Vec::Zero(2));
  CHECK(zero.value == 1.0);
  CHECK(zero.gradient.norm() == 0.0);
  Vec far(2);
  far << 1.5, 0;
  const Bump outside = bump_theta(far);
  CHECK(outside.value == 0.0);
  CHECK(outside.gradient.norm() == 0.0);
  CHECK(outside.hessian.norm() == 0.0);
  Vec x(2);
  x << 0.36, 0.48;
  const double h = 1e-6;
  const Bump b = bump_theta(x);
  for (Eigen::Index i = 0; i < 2; ++i) {
    Vec p = x, m = x;
    p(i) += h;
    m(i) -= h;
    CHECK(std::abs((bump_value(p) - bump_value(m)) / (2 * h) - b.gradient(i)) < 1e-6);
  }
  double prev = 1.0;
  for (double t = 0; t <= 1.2; t += 0.01) {
    const double v = bump_profile(t).value;
    CHECK(v >= 0);
    CHECK(v <= prev + 1e-15);
    prev = v;
  }
  CHECK(bump_profile(0.2).value == 1.0);
}

TEST_CASE("ideal packets") {
  const CylinderPacket flat = fixtures::flat_packet(3, 2, 0.5, 0.1, 0.2);
  for (const Cylinder& c : flat.cylinders()) CHECK((c.rotation - flat.cylinder(0).rotation).norm() == 0.0);

  const auto s = fixtures::circle(4000, 1.0, 7);
  const CylinderPacket circ = fixtures::circle_packet(0.5);
  const double expected = std::ceil(2 * std::numbers::pi / (0.05 / 2));
  CHECK(static_cast<double>(circ.size()) >= 0.5 * expected);
  CHECK(static_cast<double>(circ.size()) <= 1.5 * expected);
  for (const Cylinder& c : circ.cylinders()) {
    Vec t(2);
    t << -c.center(1), c.center(0);
    const double cosang = std::abs(c.rotation.col(0).dot(t.normalized()));
    CHECK(std::acos(std::min(1.0, cosang)) < 0.1);
  }
  const CylinderPacket one = ideal_packet(
      s.cloud.subset({3}), [&](std::size_t) { return s.tangents[3]; }, 1, 0.5, 0.1);
  CHECK(one.size() == 1);
  CHECK((one.cylinder(0).center - s.cloud.point(3)).norm() < 1e-15);
}

TEST_CASE("packet validation") {
  const CylinderPacket flat = fixtures::flat_packet(2, 1, 0.5, 0.1, 0.5);
  const PacketValidation ok = validate_packet(flat);
  for (int k = 0; k < 3; ++k) CHECK(ok.conditions[static_cast<std::size_t>(k)].passed);
  CHECK(ok.conditions[1].worst == 0.0);
  CHECK(ok.conditions[2].worst == 0.0);
  // A finite patch is uncovered only near its ends.
  for (std::size_t i : ok.conditions[3].failing) CHECK(std::abs(flat.cylinder(i).center(0)) > 0.5 - 3 * 0.05);

  std::vector<Cylinder> cyl = flat.cylinders();
  Mat rot = rotation2(std::numbers::pi / 6);
  cyl[cyl.size() / 2].rotation = rot;
  const CylinderPacket twisted(cyl, 1, 0.5, 0.05, AlignmentConstants{0.01, 32});
  const PacketValidation bad = validate_packet(twisted);
  CHECK_FALSE(bad.conditions[1].passed);

  std::vector<Cylinder> holed;
  for (const Cylinder& c : flat.cylinders())
    if (std::abs(c.center(0)) > 0.09) holed.push_back(c);
  const PacketValidation gap = validate_packet(CylinderPacket(holed, 1, 0.5, 0.05));
  CHECK_FALSE(gap.conditions[3].passed);
  const CylinderPacket holed_packet(holed, 1, 0.5, 0.05);
  const bool witness = !uncovered_base_points(holed_packet, holed.size() / 2).empty();
  CHECK(witness);
}

TEST_CASE("approximate squared distance values") {
  const CylinderPacket one = single_flat(1.0);
  Vec z(2);
  z << 0.1, 0.2;
  CHECK(asdf_eval(one, z) == doctest::Approx(0.04).epsilon(1e-14));
  const CylinderPacket twice({one.cylinder(0), one.cylinder(0)}, 1, 1.0, 1.0);
  CHECK(asdf_eval(twice, z) == doctest::Approx(0.04).epsilon(1e-14));
  Vec on(2);
  on << 0.3, 0;
  CHECK(asdf_eval(one, on) == 0.0);
  Vec out(2);
  out << 5, 0;
  try {
    (void)asdf_eval(one, out);
    FAIL("expected out-of-domain");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfDomain);
  }
}

TEST_CASE("approximate squared distance derivatives") {
  const CylinderPacket one = single_flat(1.0);
  Vec z(2);
  z << 0.1, 0.2;
  const AsdfDerivatives d = asdf_grad_hess(one, z);
  CHECK(std::abs(d.gradient(0)) < 1e-15);
  CHECK(d.gradient(1) == doctest::Approx(0.4));
  CHECK((d.hessian - Vec(Eigen::Vector2d(0, 2)).asDiagonal().toDenseMatrix()).norm() < 1e-14);

  Vec a(2), b(2);
  a << -0.04, 0;
  b << 0.04, 0;
  const CylinderPacket pair({Cylinder{rotation2(0.1), a}, Cylinder{rotation2(-0.1), b}}, 1, 0.5, 0.05);
  Vec axis(2);
  axis << 0, 0.03;
  CHECK(std::abs(asdf_grad_hess(pair, axis).gradient(0)) < 1e-12);

  const CylinderPacket circ = fixtures::circle_packet(0.5);
  Rng rng(3);
  std::uniform_real_distribution<double> u(0, 2 * std::numbers::pi), r(0.97, 1.03);
  for (int i = 0; i < 30; ++i) {
    const double t = u(rng);
    Vec p(2);
    p << std::cos(t), std::sin(t);
    p *= r(rng);
    const auto [eg, eh] = fd_errors(circ, p, 1e-6);
    CHECK(eg < 1e-5);
    CHECK(eh < 1e-5);
  }
}

TEST_CASE("spectral projection") {
  Mat h = Mat::Zero(2, 2);
  h(1, 1) = 2;
  CHECK((pi_hi(h, 1, 0.25).projector - Vec(Eigen::Vector2d(0, 1)).asDiagonal().toDenseMatrix()).norm() < 1e-14);
  Mat g = Mat::Zero(2, 2);
  g(0, 0) = 2;
  CHECK((pi_hi(g, 1, 0.25).projector - Vec(Eigen::Vector2d(1, 0)).asDiagonal().toDenseMatrix()).norm() < 1e-14);

  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat q = random_rotation(5, rng);
    Vec spec(5);
    spec << 0.01, 0.02, 1.9, 2.0, 2.1;
    const Mat m = q * spec.asDiagonal() * q.transpose();
    const SpectralProjection p = pi_hi(m, 3, 0.25);
    const Mat oracle = q.rightCols(3) * q.rightCols(3).transpose();
    CHECK((p.projector - oracle).norm() < 1e-8);
    CHECK((p.projector - p.projector.transpose()).norm() < 1e-9);
    CHECK((p.projector * p.projector - p.projector).norm() < 1e-9);
    CHECK(std::abs(p.projector.trace() - 3) < 1e-6);
    CHECK(p.in_band);
  }
  Mat flat = Mat::Identity(3, 3);
  try {
    (void)pi_hi(flat, 1, 0.25);
    FAIL("expected an insufficient gap");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientGap);
  }
}

TEST_CASE("base point solver") {
  const CylinderPacket one = single_flat(1.0);
  Vec z(2);
  z << 0.1, 0.2;
  const BundleChart c = solve_base_point(one, z);
  CHECK(std::abs(c.base_point(0) - 0.1) < 1e-10);
  CHECK(std::abs(c.base_point(1)) < 1e-10);
  CHECK(c.residual <= 1e-10);
  CHECK(std::abs(c.projector_hi.trace() - 1) < 1e-9);

  const CylinderPacket circ = fixtures::circle_packet(0.5);
  for (double phi : {0.0, 1.0, 2.5, 4.0}) {
    Vec p(2);
    p << std::cos(phi), std::sin(phi);
    const BundleChart b = solve_base_point(circ, 1.05 * p);
    CHECK(std::abs(b.base_point.norm() - 1.0) < 5e-3);
    const BundleChart again = solve_base_point(circ, b.base_point);
    CHECK((again.base_point - b.base_point).norm() < 1e-10);
  }
  Vec far(2);
  far << 3, 3;
  CHECK_THROWS_AS(solve_base_point(circ, far), Error);
}

TEST_CASE("putative manifold extraction") {
  const CylinderPacket flat = fixtures::flat_packet(3, 2, 0.5, 0.1, 0.2);
  Mat grid(3, 25);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) grid.col(i * 5 + j) << -0.1 + 0.05 * i, -0.1 + 0.05 * j, 0.02 * (i - j);
  const PutativeMesh fm = extract_putative_manifold(flat, PointCloud(grid));
  CHECK(fm.charts.size() == 25);
  for (const BundleChart& ch : fm.charts) CHECK(std::abs(ch.base_point(2)) < 1e-10);

  Mat dup(3, 3);
  dup.col(0) << 0.01, 0.02, 0.03;
  dup.col(1) = dup.col(0);
  dup.col(2) = dup.col(0);
  CHECK(extract_putative_manifold(flat, PointCloud(dup)).charts.size() == 1);

  const CylinderPacket circ = fixtures::circle_packet(0.5);
  Mat seeds(2, 200);
  Rng rng(1);
  for (Eigen::Index i = 0; i < 200; ++i) seeds.col(i) = random_unit_vector(2, rng) * 1.01;
  const PutativeMesh cm = extract_putative_manifold(circ, PointCloud(seeds));
  std::vector<AffineSubspace> tans;
  for (const BundleChart& ch : cm.charts) tans.emplace_back(ch.base_point, ch.tangent_basis());
  CHECK(federer_reach(cm.base_points(), tans).value >= 0.25);

  Mat far(2, 1);
  far << 3, 3;
  try {
    (void)extract_putative_manifold(circ, PointCloud(far));
    FAIL("expected an empty mesh");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyMesh);
  }
}

TEST_CASE("bundle coordinates") {
  const CylinderPacket one = single_flat(1.0);
  Vec z(2);
  z << 0.1, 0.2;
  const BundleChart c = solve_base_point(one, z);
  const BundleCoordinates self = bundle_coordinates(one, c, c.base_point);
  CHECK(self.v.norm() < 1e-12);
  Vec w(2);
  w << 0.25, -0.15;
  const BundleCoordinates flat = bundle_coordinates(one, c, w);
  CHECK(std::abs(flat.base.base_point(0) - 0.25) < 1e-10);
  CHECK(std::abs(flat.v(1) + 0.15) < 1e-10);

  const CylinderPacket circ = fixtures::circle_packet(0.5);
  Vec p(2);
  p << 1, 0;
  const BundleChart start = solve_base_point(circ, p);
  Rng rng(2);
  std::uniform_real_distribution<double> ang(-0.02, 0.02), rad(0.99, 1.01);
  for (int i = 0; i < 20; ++i) {
    const double t = ang(rng);
    Vec q(2);
    q << std::cos(t), std::sin(t);
    q *= rad(rng);
    const BundleCoordinates bc = bundle_coordinates(circ, start, q);
    CHECK((bc.base.base_point + bc.v - q).norm() <= 1e-8);
    CHECK((bc.base.projector_hi * bc.v - bc.v).norm() < 1e-10);
  }
}

TEST_CASE("quadratic comparability conditions") {
  const CylinderPacket flat = fixtures::flat_packet(2, 1, 0.5, 0.1, 0.3);
  Mat pts(2, 3);
  pts << -0.05, 0, 0.05, 0, 0, 0;
  const std::vector<Mat> frames(3, Mat::Identity(2, 2));
  const AsdfConditionReport rf = check_asdf_conditions(flat, PointCloud(pts), frames, 0.0);
  CHECK(rf.c1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rf.C1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rf.ok());

  const CylinderPacket circ = fixtures::circle_packet(0.5);
  const auto s = fixtures::circle(12, 1.0, 3);
  std::vector<Mat> cf;
  for (const auto& t : s.tangents) cf.push_back(frame_from_tangent(t.basis()));
  const AsdfConditionReport rc = check_asdf_conditions(circ, s.cloud, cf, 0.05);
  CHECK(rc.c1 >= 0.1);
  CHECK(rc.C1 <= 10);

  std::vector<Cylinder> cyl = flat.cylinders();
  for (Cylinder& c : cyl)
    if (std::abs(c.center(0)) < 1e-12) c.rotation = rotation2(std::numbers::pi / 2);
  const CylinderPacket turned(cyl, 1, 0.5, 0.05);
  Mat mid(2, 1);
  mid << 0, 0;
  const AsdfConditionReport rt = check_asdf_conditions(turned, PointCloud(mid), {Mat::Identity(2, 2)}, 0.05);
  CHECK_FALSE(rt.ok());
}
