#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "mnfd/error.hpp"
#include "mnfd/sections.hpp"
#include "mnfd/serialize.hpp"

using namespace mnfd;

namespace {

/// Quadratic map R^d -> R^m: a + B u + 0.5 u^T H_c u per component.
struct Quadratic {
  Vec a;
  Mat b;
  std::vector<Mat> h;

  Vec value(const Vec& u) const {
    Vec out = a + b * u;
    for (std::size_t c = 0; c < h.size(); ++c) out(static_cast<Eigen::Index>(c)) += 0.5 * u.dot(h[c] * u);
    return out;
  }
  Jet2 jet(const Vec& u) const {
    Jet2 j = Jet2::zero(u.size(), a.size());
    j.value = value(u);
    j.gradient = b;
    for (std::size_t c = 0; c < h.size(); ++c) {
      j.gradient.row(static_cast<Eigen::Index>(c)) += (h[c] * u).transpose();
      j.hessian[c] = h[c];
    }
    return j;
  }
};

Quadratic random_quadratic(Eigen::Index d, Eigen::Index m, double scale, Rng& rng) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Quadratic q;
  q.a = Vec::NullaryExpr(m, [&] { return u(rng); });
  q.b = Mat::NullaryExpr(m, d, [&] { return u(rng); });
  for (Eigen::Index c = 0; c < m; ++c) {
    Mat s = Mat::NullaryExpr(d, d, [&] { return u(rng); });
    q.h.push_back(0.5 * (s + s.transpose()));
  }
  return q;
}

WhitneyField field_of(const Quadratic& q, const Mat& sites) {
  WhitneyField f;
  f.sites = sites;
  for (Eigen::Index i = 0; i < sites.cols(); ++i) f.jets.push_back(q.jet(sites.col(i)));
  return f;
}

Mat uniform_sites(Eigen::Index d, Eigen::Index count, double half, Rng& rng) {
  std::uniform_real_distribution<double> u(-half, half);
  return Mat::NullaryExpr(d, count, [&] { return u(rng); });
}

/// Sites on a regular 1-D grid over [-half, half].
Mat grid_1d(Eigen::Index count, double half) {
  Mat s(1, count);
  for (Eigen::Index i = 0; i < count; ++i) s(0, i) = -half + 2 * half * static_cast<double>(i) / static_cast<double>(count - 1);
  return s;
}

/// Local section with a constant fiber value v in cylinder units.
LocalSection constant_section(std::size_t cylinder, double tau_bar, const Vec& v, Eigen::Index d) {
  LocalSection s;
  s.cylinder = cylinder;
  s.empty = false;
  s.tau_bar = tau_bar;
  s.field.sites = Mat::Zero(d, 1);
  Jet2 j = Jet2::zero(d, v.size());
  j.value = v;
  s.field.jets.push_back(j);
  s.extension = WhitneyExtension(s.field, 1.0);
  return s;
}

}  // namespace

TEST_CASE("sketch examples") {
  Mat two = Mat::Zero(2, 2);
  Mat vals(1, 2);
  vals << 0, 2;
  const SketchedData s = sketch(two, vals, 0.1);
  CHECK(s.reps.cols() == 1);
  CHECK(s.mu(0) == 1.0);
  CHECK(s.targets(0, 0) == 1.0);

  Mat far(1, 4);
  far << 0, 1, 2, 3;
  const SketchedData id = sketch(far, Mat::Ones(2, 4), 0.5);
  CHECK(id.reps == far);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(id.mu(i) == 0.25);

  Rng rng(3);
  Mat centers(2, 3);
  centers << -0.5, 0, 0.5, 0, 0.4, 0;
  Mat pts(2, 100), values(1, 100);
  std::vector<double> sums(3, 0);
  std::vector<int> counts(3, 0);
  for (Eigen::Index i = 0; i < 100; ++i) {
    const auto c = static_cast<std::size_t>(i % 3);
    pts.col(i) = centers.col(static_cast<Eigen::Index>(c)) + 0.02 * random_unit_vector(2, rng);
    values(0, i) = std::uniform_real_distribution<double>(-1, 1)(rng);
    sums[c] += values(0, i);
    ++counts[c];
  }
  const SketchedData clusters = sketch(pts, values, 0.1);
  REQUIRE(clusters.reps.cols() == 3);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(clusters.targets(0, static_cast<Eigen::Index>(c)) == doctest::Approx(sums[c] / counts[c]).epsilon(1e-12));
    CHECK(clusters.mu(static_cast<Eigen::Index>(c)) == doctest::Approx(counts[c] / 100.0));
  }

  CHECK_THROWS_AS(sketch(Mat(1, 0), Mat(1, 0), 0.1), Error);
  CHECK_THROWS_AS(sketch(far, Mat::Ones(1, 3), 0.1), Error);
}

TEST_CASE("sketch invariants on random data") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const Mat pts = uniform_sites(2, 300, 1.0, rng);
    const Mat vals = gaussian_matrix(2, 300, rng);
    const double eps_bar = 0.05 + 0.05 * static_cast<double>(seed);
    const SketchedData s = sketch(pts, vals, eps_bar);
    for (Eigen::Index i = 0; i < pts.cols(); ++i)
      CHECK((pts.col(i) - s.reps.col(static_cast<Eigen::Index>(s.assignment[static_cast<std::size_t>(i)]))).norm() <
            eps_bar);
    for (Eigen::Index a = 0; a < s.reps.cols(); ++a)
      for (Eigen::Index b = a + 1; b < s.reps.cols(); ++b) CHECK((s.reps.col(a) - s.reps.col(b)).norm() >= eps_bar);
    CHECK(s.mu.sum() == doctest::Approx(1.0).epsilon(1e-12));
    const Vec sketched_mean = s.targets * s.mu;
    const Vec mean = vals.rowwise().mean();
    CHECK((sketched_mean - mean).norm() < 1e-12);
  }
}

TEST_CASE("build_constraints feasibility examples") {
  Rng rng(5);
  const Mat sites = uniform_sites(2, 12, 1.0, rng);
  const double M = 2.0;
  const ConstraintSet cs = build_constraints(sites, M);
  CHECK(max_violation_ratio(cs, Mat::Zero(cs.layout.rows(), 3)) == 0.0);

  // Coefficients of size M/10 on the unit square keep every value, gradient and Hessian entry below M.
  const Quadratic q = random_quadratic(2, 3, M / 10 / std::sqrt(3.0), rng);
  CHECK(max_violation_ratio(cs, flatten(field_of(q, sites))) <= 1.0);

  Mat one(1, 1);
  one << 0.3;
  const ConstraintSet single = build_constraints(one, M);
  WhitneyField big;
  big.sites = one;
  Jet2 j = Jet2::zero(1, 1);
  j.value(0) = M + 1;
  big.jets.push_back(j);
  CHECK(max_violation_ratio(single, flatten(big)) > 1.0);

  Mat dup(1, 2);
  dup << 0.2, 0.2;
  try {
    (void)build_constraints(dup, M);
    FAIL("expected duplicate sites");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DuplicateSites);
  }
  CHECK_THROWS_AS(build_constraints(one, 0), Error);
}

TEST_CASE("global C2 functions within the budget are feasible") {
  Rng rng(8);
  const double M = 1.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Mat sites = grid_1d(25, 1.0);
    // f(u) = A sin(w u + p) has value, slope and curvature bounded by A max(1, w, w^2).
    const double w = 0.5 + 2.5 * std::uniform_real_distribution<double>(0, 1)(rng);
    const double p = std::uniform_real_distribution<double>(0, 2 * std::numbers::pi)(rng);
    const double amp = M / std::max({1.0, w, w * w});
    WhitneyField f;
    f.sites = sites;
    for (Eigen::Index i = 0; i < sites.cols(); ++i) {
      const double u = sites(0, i);
      Jet2 j = Jet2::zero(1, 1);
      j.value(0) = amp * std::sin(w * u + p);
      j.gradient(0, 0) = amp * w * std::cos(w * u + p);
      j.hessian[0](0, 0) = -amp * w * w * std::sin(w * u + p);
      f.jets.push_back(j);
    }
    CHECK(max_violation_ratio(build_constraints(sites, M), flatten(f)) <= 1.0);
  }
}

TEST_CASE("feasible fields extend with a bounded C2 norm") {
  const double M = 1.0;
  double kappa = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const Mat sites = grid_1d(15, 1.0);
    const ConstraintSet cs = build_constraints(sites, M);
    const Mat x = scale_into_feasible(cs, gaussian_matrix(cs.layout.rows(), 1, rng));
    REQUIRE(max_violation_ratio(cs, x) <= 1.0 + 1e-12);
    const WhitneyExtension ext(unflatten(sites, x), 2 * (sites(0, 1) - sites(0, 0)));
    const C2Norm norm = c2_norm_on(ext, grid_1d(301, 1.0));
    kappa = std::max(kappa, norm.max() / M);
  }
  MESSAGE("measured kappa = " << kappa);
  CHECK(kappa <= 10.0);
}

TEST_CASE("polish_jets restores the jets of a planted quadratic") {
  Rng rng(7);
  const Mat sites = uniform_sites(2, 20, 1.0, rng);
  const ConstraintSet cs = build_constraints(sites, 1.0);
  const Quadratic q = random_quadratic(2, 2, 0.05, rng);
  const Mat exact = flatten(field_of(q, sites));
  Mat values_only = Mat::Zero(exact.rows(), exact.cols());
  for (std::size_t s = 0; s < cs.layout.sites; ++s) values_only.row(cs.layout.value_row(s)) = exact.row(cs.layout.value_row(s));
  const Mat polished = polish_jets(cs, values_only);
  CHECK((polished - exact).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(max_violation_ratio(cs, polished) <= 1.0);

  // Values and feasibility are preserved on arbitrary feasible fields.
  for (int t = 0; t < 10; ++t) {
    const Mat field = scale_into_feasible(cs, gaussian_matrix(exact.rows(), 2, rng));
    const Mat p2 = polish_jets(cs, field);
    CHECK(max_violation_ratio(cs, p2) <= 1.0);
    for (std::size_t s = 0; s < cs.layout.sites; ++s) CHECK(p2.row(cs.layout.value_row(s)) == field.row(cs.layout.value_row(s)));
  }
}

TEST_CASE("objective examples") {
  Rng rng(2);
  const Mat pts = uniform_sites(2, 40, 1.0, rng);
  const Mat vals = gaussian_matrix(2, 40, rng);
  const SketchedData s = sketch(pts, vals, 0.2);
  const FieldLayout layout{static_cast<std::size_t>(s.reps.cols()), 2};
  double zero = 0;
  for (Eigen::Index i = 0; i < s.reps.cols(); ++i) zero += s.mu(i) * s.targets.col(i).squaredNorm();
  CHECK(objective(Mat::Zero(layout.rows(), 2), layout, s) == doctest::Approx(zero).epsilon(1e-14));

  Mat exact = Mat::Zero(layout.rows(), 2);
  for (std::size_t i = 0; i < layout.sites; ++i) exact.row(layout.value_row(i)) = s.targets.col(static_cast<Eigen::Index>(i)).transpose();
  CHECK(objective(exact, layout, s) == 0.0);

  const Mat random = gaussian_matrix(layout.rows(), 2, rng);
  const WhitneyField field = unflatten(s.reps, random);
  double brute = 0;
  for (std::size_t i = 0; i < field.size(); ++i)
    brute += s.mu(static_cast<Eigen::Index>(i)) * (s.targets.col(static_cast<Eigen::Index>(i)) - field.jets[i].value).squaredNorm();
  CHECK(std::abs(objective(field, s) - brute) < 1e-12);
  CHECK(std::abs(objective(random, layout, s) - brute) < 1e-12);

  // Midpoints of random chords lie below the average of the endpoints.
  for (int t = 0; t < 20; ++t) {
    const Mat a = gaussian_matrix(layout.rows(), 2, rng), b = gaussian_matrix(layout.rows(), 2, rng);
    CHECK(objective(0.5 * (a + b), layout, s) <= 0.5 * (objective(a, layout, s) + objective(b, layout, s)) + 1e-12);
  }

  WhitneyField shifted = field;
  shifted.sites(0, 0) += 1e-3;
  CHECK_THROWS_AS(objective(shifted, s), Error);
}

TEST_CASE("separation oracle") {
  Rng rng(4);
  const Mat sites = uniform_sites(2, 8, 1.0, rng);
  const ConstraintSet cs = build_constraints(sites, 1.0);
  const Eigen::Index rows = cs.layout.rows();
  CHECK(separation_oracle(cs, Mat::Zero(rows, 2)).feasible);

  Mat x = Mat::Zero(rows, 2);
  x(cs.layout.value_row(3), 0) = 1.5;
  // A lone value violates only its coefficient bound and the Taylor-value couplings; pick the worst.
  const OracleAnswer ans = separation_oracle(cs, x);
  REQUIRE_FALSE(ans.feasible);
  CHECK(std::abs(ans(x)) < 1e-12);
  CHECK(ans(Mat::Zero(rows, 2)) > 0);
  CHECK(ans(1.5 * x) < 0);

  for (int t = 0; t < 50; ++t) {
    const Mat y = scale_into_feasible(cs, gaussian_matrix(rows, 2, rng));
    CHECK(ans(y) >= -1e-12);
    const Mat outside = scale_into_feasible(cs, gaussian_matrix(rows, 2, rng));
    const OracleAnswer a2 = separation_oracle(cs, 1.3 * outside);
    if (!a2.feasible) {
      CHECK(a2(y) >= -1e-12);
      CHECK(a2(1.3 * outside) == doctest::Approx(0.0).scale(1.0));
    }
  }

  Mat one(1, 1);
  one << 0;
  const ConstraintSet single = build_constraints(one, 1.0);
  Mat boundary = Mat::Zero(single.layout.rows(), 1);
  boundary(0, 0) = 1.0;
  CHECK(separation_oracle(single, boundary).feasible);
  CHECK_THROWS_AS(separation_oracle(cs, Mat::Zero(rows + 1, 2)), Error);
}

TEST_CASE("minimize_section examples") {
  Rng rng(6);
  const Mat pts = grid_1d(20, 1.0);
  const double M = 1.0;
  const SketchedData zero_data = sketch(pts, Mat::Zero(2, 20), 0.01);
  const ConstraintSet cs = build_constraints(zero_data.reps, M);
  for (SolverKind kind : {SolverKind::InteriorPoint, SolverKind::CuttingPlane, SolverKind::ProjectedGradient}) {
    CAPTURE(to_string(kind));
    const SolverResult r = minimize_section(zero_data, cs, 1e-8, 2000, kind);
    CHECK(r.zeta <= 1e-12);
    CHECK(r.x.norm() < 1e-6);
  }

  const Quadratic q = random_quadratic(1, 2, M / 10, rng);
  Mat planted(2, 20);
  for (Eigen::Index i = 0; i < 20; ++i) planted.col(i) = q.value(pts.col(i));
  const SketchedData quad = sketch(pts, planted, 0.01);
  for (SolverKind kind : {SolverKind::InteriorPoint, SolverKind::CuttingPlane, SolverKind::ProjectedGradient}) {
    CAPTURE(to_string(kind));
    const SolverResult r = minimize_section(quad, cs, 1e-8, 5000, kind);
    CHECK(r.zeta <= 1e-6);
    CHECK(r.zeta >= -1e-12);
    CHECK(max_violation_ratio(cs, r.x) <= 1.0 + 1e-9);
  }

  const SketchedData huge = sketch(pts, 50 * Mat::Ones(2, 20), 0.01);
  const SolverResult r = minimize_section(huge, cs, 1e-3, 2000);
  double all = 0;
  for (Eigen::Index i = 0; i < huge.reps.cols(); ++i) all += huge.mu(i) * huge.targets.col(i).squaredNorm();
  CHECK(r.zeta < all);
  CHECK(r.lower_bound <= r.zeta + 1e-12);
  CHECK(r.gap() <= 1e-3);
  // Any feasible field is at least the dual bound.
  for (int t = 0; t < 20; ++t) {
    const Mat y = scale_into_feasible(cs, gaussian_matrix(cs.layout.rows(), 2, rng) + r.x);
    CHECK(objective(y, cs.layout, huge) >= r.lower_bound - 1e-9);
  }
  const SolverResult a = minimize_section(huge, cs, 1e-3, 2000), b = minimize_section(huge, cs, 1e-3, 2000);
  CHECK(a.x == b.x);

  try {
    (void)minimize_section(huge, cs, 1e-12, 1);
    FAIL("expected the budget to run out");
  } catch (const BudgetExceeded& e) {
    CHECK(max_violation_ratio(cs, e.best().x) <= 1.0 + 1e-9);
  }
}

TEST_CASE("minimize_section on noisy planted data") {
  const double sigma = 0.01, M = 0.1;
  const Eigen::Index m = 2;
  double lo = 1e300, hi = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Mat pts = grid_1d(60, 1.0);
    const Quadratic q = random_quadratic(1, m, M / 10, rng);
    Mat y(m, 60);
    for (Eigen::Index i = 0; i < 60; ++i) y.col(i) = q.value(pts.col(i)) + sigma * gaussian_matrix(m, 1, rng).col(0);
    const SketchedData data = sketch(pts, y, 1e-3);
    const SolverResult r = minimize_section(data, build_constraints(data.reps, M), 1e-9, 2000);
    const double ratio = r.zeta / (sigma * sigma * static_cast<double>(m));
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  MESSAGE("zeta / (sigma^2 m) in [" << lo << ", " << hi << "]");
  CHECK(lo >= 0.5);
  CHECK(hi <= 2.0);
}

TEST_CASE("fit_local_section examples") {
  const double tau = 1.0, cbar = 0.1, tb = cbar * tau;
  const CylinderPacket flat = fixtures::flat_packet(2, 1, tau, cbar, 0.0);
  REQUIRE(flat.size() == 1);

  Mat on(2, 30);
  for (Eigen::Index i = 0; i < 30; ++i) on.col(i) << tb * (-0.9 + 1.8 * static_cast<double>(i) / 29), 0;
  const LocalSection zero = fit_local_section(flat, 0, PointCloud(on));
  CHECK_FALSE(zero.empty);
  CHECK(zero.zeta <= 1e-12);
  CHECK(max_jet_coefficient(zero.field) < 1e-6);
  CHECK(zero.M == doctest::Approx(2 * tb / tau));

  Mat par(2, 30);
  for (Eigen::Index i = 0; i < 30; ++i) {
    const double x = on(0, i);
    par.col(i) << x, 0.05 * x * x;
  }
  SectionOptions opts;
  opts.eps_bar = 0.02;
  opts.solver_tolerance = 1e-14;
  const LocalSection p = fit_local_section(flat, 0, PointCloud(par), opts);
  CHECK(p.certified);
  for (Eigen::Index i = 0; i < 30; ++i) {
    Vec a(1);
    a << par(0, i);
    CHECK(std::abs(p.offset(a)(0) - par(1, i)) < 1e-6);
  }

  Mat single(2, 1);
  single << 0.02, 0.01;
  const LocalSection s = fit_local_section(flat, 0, PointCloud(single));
  REQUIRE(s.field.size() == 1);
  CHECK(s.field.jets[0].value(0) * tb == doctest::Approx(0.01).epsilon(1e-6));

  Mat outside(2, 1);
  outside << 0.5, 0.5;
  const LocalSection none = fit_local_section(flat, 0, PointCloud(outside));
  CHECK(none.empty);
  CHECK_THROWS_AS(none.offset(Vec::Zero(1)), Error);
  CHECK_THROWS_AS(fit_local_section(flat, 1, PointCloud(on)), Error);
}

TEST_CASE("partition weights") {
  const double tau = 1.0, cbar = 0.1, tb = 0.1;
  std::vector<Cylinder> one{Cylinder{Mat::Identity(2, 2), Vec::Zero(2)}};
  const CylinderPacket single(one, 1, tau, tb);
  Vec x(2);
  x << 0.03, 0.01;
  const PartitionWeights w1 = partition_weights(single, x);
  REQUIRE(w1.weights.size() == 1);
  CHECK(w1.weights[0] == 1.0);

  Vec c2(2);
  c2 << 0.1, 0;
  std::vector<Cylinder> pair{Cylinder{Mat::Identity(2, 2), Vec::Zero(2)}, Cylinder{Mat::Identity(2, 2), c2}};
  const CylinderPacket twins(pair, 1, tau, tb);
  Vec mid(2);
  mid << 0.05, 0.02;
  const PartitionWeights half = partition_weights(twins, mid);
  REQUIRE(half.weights.size() == 2);
  CHECK(half.weights[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(half.weights[1] == doctest::Approx(0.5).epsilon(1e-14));

  Vec away(2);
  away << 3, 0;
  try {
    (void)partition_weights(twins, away);
    FAIL("expected an uncovered point");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroDenominator);
  }

  const CylinderPacket circ = fixtures::circle_packet(0.5, cbar);
  const auto samples = fixtures::circle(500, 1.0, 9);
  const auto weight_of = [&](const Vec& z, std::size_t j) {
    const PartitionWeights pw = partition_weights(circ, z);
    for (std::size_t k = 0; k < pw.cylinders.size(); ++k)
      if (pw.cylinders[k] == j) return pw.weights[k];
    return 0.0;
  };
  double worst_jump = 0;
  for (std::size_t i = 0; i < samples.cloud.size(); ++i) {
    const Vec z = samples.cloud.point(i);
    const PartitionWeights pw = partition_weights(circ, z);
    double sum = 0;
    for (double w : pw.weights) {
      CHECK(w >= 0);
      sum += w;
    }
    CHECK(std::abs(sum - 1) <= 1e-12);
    if (i % 10 != 0) continue;
    // Difference quotients of each weight along the tangent on both sides must agree.
    const Vec t = samples.tangents[i].basis().col(0);
    const double h = 1e-5;
    for (std::size_t j : pw.cylinders) {
      const double left = (weight_of(z, j) - weight_of(z - h * t, j)) / h;
      const double right = (weight_of(z + h * t, j) - weight_of(z, j)) / h;
      worst_jump = std::max(worst_jump, std::abs(left - right) * h);
    }
  }
  CHECK(worst_jump < 1e-3);
}

TEST_CASE("global section patching") {
  const double tau = 1.0, tb = 0.1;
  std::vector<Cylinder> one{Cylinder{Mat::Identity(2, 2), Vec::Zero(2)}};
  const CylinderPacket single(one, 1, tau, tb);
  Vec v(1);
  v << 0.2;
  const SectionModel identity(single, {constant_section(0, tb, v, 1)});
  const BundleChart chart = solve_base_point(single, Vec::Zero(2));
  const Vec s = global_section(identity, chart);
  CHECK(s(0) == 0.0);
  CHECK(s(1) == doctest::Approx(0.2 * tb).epsilon(1e-15));
  CHECK((mfin_point(identity, chart) - (chart.base_point + s)).norm() == 0.0);

  Vec c2(2);
  c2 << 0.1, 0;
  std::vector<Cylinder> pair{Cylinder{Mat::Identity(2, 2), Vec::Zero(2)}, Cylinder{Mat::Identity(2, 2), c2}};
  const CylinderPacket twins(pair, 1, tau, tb);
  Vec v2(1);
  v2 << -0.4;
  const SectionModel blended(twins, {constant_section(0, tb, v, 1), constant_section(1, tb, v2, 1)});
  Vec z(2);
  z << 0.035, 0;
  const BundleChart at = solve_base_point(twins, z);
  const PartitionWeights pw = partition_weights(twins, at.base_point);
  REQUIRE(pw.weights.size() == 2);
  const Vec mix = global_section(blended, at);
  CHECK(mix(1) == doctest::Approx(tb * (pw.weights[0] * 0.2 + pw.weights[1] * -0.4)).epsilon(1e-12));

  LocalSection empty;
  empty.cylinder = 1;
  const SectionModel partial(twins, {constant_section(0, tb, v, 1), empty});
  CHECK(global_section(partial, at)(1) == doctest::Approx(0.2 * tb).epsilon(1e-12));
  LocalSection empty0;
  const SectionModel none(twins, {empty0, empty});
  CHECK_THROWS_AS(global_section(none, at), Error);

  const SectionModel zeros(twins, {constant_section(0, tb, Vec::Zero(1), 1), constant_section(1, tb, Vec::Zero(1), 1)});
  CHECK(global_section(zeros, at).norm() < 1e-15);
  CHECK_THROWS_AS(SectionModel(twins, {empty0}), Error);
}

TEST_CASE("mfin_distance on a flat packet and on a fitted circle") {
  const double tau = 1.0, tb = 0.1;
  const CylinderPacket flat = fixtures::flat_packet(2, 1, tau, 0.1, 0.3);
  std::vector<LocalSection> zeros;
  for (std::size_t j = 0; j < flat.size(); ++j) zeros.push_back(constant_section(j, tb, Vec::Zero(1), 1));
  const SectionModel flat_model(flat, zeros);
  const BundleChart origin = solve_base_point(flat, Vec::Zero(2));
  Vec z(2);
  z << 0.1, -0.04;
  const auto d = mfin_distance(flat_model, origin, z, 2 * tb);
  REQUIRE(d);
  CHECK(*d == doctest::Approx(0.04).epsilon(1e-10));
  Vec far(2);
  far << 0.1, 0.5;
  CHECK_FALSE(mfin_distance(flat_model, origin, far, 2 * tb));

  const double ctau = 0.5;
  const CylinderPacket circ = fixtures::circle_packet(ctau, 0.1);
  const double ctb = circ.tau_bar();
  Rng rng(12);
  std::normal_distribution<double> noise(0, 0.2 * ctb);
  const auto data = fixtures::circle(3000, 1.0, 4);
  Mat noisy = data.cloud.points();
  for (Eigen::Index i = 0; i < noisy.cols(); ++i) noisy.col(i) *= 1 + noise(rng);
  const SectionModel model = fit_sections(circ, PointCloud(noisy));

  const auto dense = fixtures::circle(10000, 1.0, 6);
  Mat mfin(2, static_cast<Eigen::Index>(dense.cloud.size()));
  for (std::size_t i = 0; i < dense.cloud.size(); ++i)
    mfin.col(static_cast<Eigen::Index>(i)) = mfin_point(model, solve_base_point(circ, dense.cloud.point(i)));

  std::uniform_real_distribution<double> angle(0, 2 * std::numbers::pi), radial(-0.8 * ctb, 0.8 * ctb);
  int checked = 0;
  for (int t = 0; t < 40; ++t) {
    const double a = angle(rng);
    Vec q(2);
    q << std::cos(a), std::sin(a);
    q *= 1 + radial(rng);
    const auto dt = mfin_distance(model, solve_base_point(circ, q), q, 2 * ctb);
    REQUIRE(dt);
    // Distance to the closed polyline through the dense sample.
    double brute = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < mfin.cols(); ++i) {
      const Vec p0 = mfin.col(i), p1 = mfin.col((i + 1) % mfin.cols());
      const double t = std::clamp((q - p0).dot(p1 - p0) / (p1 - p0).squaredNorm(), 0.0, 1.0);
      brute = std::min(brute, (q - p0 - t * (p1 - p0)).norm());
    }
    if (brute < 1e-3) continue;
    ++checked;
    CHECK(*dt >= brute - 1e-6);
    CHECK(*dt <= 1.1 * brute);
  }
  CHECK(checked >= 30);

  const BundleChart on = solve_base_point(circ, dense.cloud.point(0));
  const Vec pt = mfin_point(model, on);
  const auto zero = mfin_distance(model, on, pt, 2 * ctb);
  REQUIRE(zero);
  CHECK(*zero < 1e-8);
}

TEST_CASE("Whitney field JSON round trip") {
  Rng rng(1);
  const Mat sites = uniform_sites(3, 5, 1.0, rng);
  const WhitneyField f = unflatten(sites, gaussian_matrix(5 * FieldLayout{5, 3}.per_site(), 2, rng));
  const WhitneyField back = field_from_json(Json::parse(field_to_json(f).dump()));
  CHECK(back.sites == f.sites);
  CHECK(flatten(back) == flatten(f));
  CHECK_THROWS_AS(field_from_json(Json::parse("{\"d\": 2}")), Error);
}
