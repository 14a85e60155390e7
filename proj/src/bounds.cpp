#include "mnfd/bounds.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>

#include "mnfd/error.hpp"

namespace mnfd {

void BoundParams::validate() const {
  if (!(d > 0 && V > 0 && tau > 0 && eps > 0 && delta > 0 && C > 0))
    throw Error(ErrorCode::InvalidArgument, "bound parameters must be positive");
  if (!(tau < 1)) throw Error(ErrorCode::InvalidArgument, "tau must be < 1");
  if (!(eps < 1) || !(delta < 1)) throw Error(ErrorCode::InvalidArgument, "eps and delta must be < 1");
}

double covering_bound(const BoundParams& p, double r) {
  if (!(r > 0)) throw Error(ErrorCode::InvalidArgument, "covering_bound needs r > 0");
  return p.C * p.V * (1.0 / std::pow(p.tau, p.d) + 1.0 / std::pow(p.tau * r, p.d / 2.0));
}

double sample_complexity(const BoundParams& p) {
  p.validate();
  const double u = covering_bound(p, p.eps);
  const double e2 = p.eps * p.eps;
  const double l = std::log(u / p.eps);
  return p.C * (u / e2 * std::pow(l, 4) + std::log(1.0 / p.delta) / e2);
}

double fat_bound_maxmin(std::uint64_t k, std::uint64_t l, double gamma, double C) {
  if (k < 1 || l < 1 || !(gamma > 0)) throw Error(ErrorCode::InvalidArgument, "fat_bound_maxmin");
  if (gamma > 2) return 0.0;
  const double lead = C * static_cast<double>(k) * static_cast<double>(l) / (gamma * gamma);
  const double lg = std::log(std::max(lead, std::exp(1.0)));
  return lead * lg * lg;
}

namespace {

double simpson(double fa, double fm, double fb, double a, double b) {
  return (b - a) / 6.0 * (fa + 4 * fm + fb);
}

double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                   double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(fa, flm, fm, a, m);
  const double right = simpson(fm, frm, fb, m, b);
  const double diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15 * tol) return left + right + diff / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double rel_tol,
                        int max_depth) {
  if (!(b > a)) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  // Coarse composite estimate sets the absolute scale of the tolerance.
  double coarse = 0;
  const int pieces = 16;
  for (int i = 0; i < pieces; ++i) {
    const double x0 = a + (b - a) * i / pieces, x1 = a + (b - a) * (i + 1) / pieces;
    coarse += simpson(f(x0), f(0.5 * (x0 + x1)), f(x1), x0, x1);
  }
  const double tol = rel_tol * std::max(std::abs(coarse), 1e-300);
  const double whole = simpson(fa, fm, fb, a, b);
  const double result = simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
  if (!std::isfinite(result)) throw Error(ErrorCode::InvalidArgument, "non-integrable profile");
  return result;
}

double chaining_bound(const FatProfile& profile, double eps, std::uint64_t s, double c) {
  if (s < 1) throw Error(ErrorCode::InvalidArgument, "chaining_bound needs s >= 1");
  if (!(eps > 0) || !(c > 0)) throw Error(ErrorCode::InvalidArgument, "chaining_bound needs eps, c > 0");
  const double lo = eps / 4.0;
  const double hi = profile.support_ceiling / c;
  if (!(hi > lo) || !profile.evaluator) return eps;
  const double sd = static_cast<double>(s);
  auto integrand = [&](double eta) {
    const double v = profile.evaluator(c * eta);
    if (v < 0) throw Error(ErrorCode::InvalidArgument, "negative fat profile");
    return std::sqrt(v / sd);
  };
  return eps + 12.0 * adaptive_simpson(integrand, lo, hi, 1e-8);
}

RademacherEstimate empirical_rademacher(const Mat& values, std::uint64_t trials, std::uint64_t seed) {
  if (values.rows() == 0 || values.cols() == 0) throw Error(ErrorCode::EmptyInput, "empirical_rademacher");
  if (trials < 1) throw Error(ErrorCode::InvalidArgument, "need at least one trial");
  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);
  const double s = static_cast<double>(values.cols());
  Vec sigma(values.cols());
  double sum = 0, sum_sq = 0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    for (Eigen::Index i = 0; i < sigma.size(); ++i) sigma(i) = coin(rng) ? 1.0 : -1.0;
    const double sup = (values * sigma).maxCoeff() / s;
    sum += sup;
    sum_sq += sup * sup;
  }
  const double tr = static_cast<double>(trials);
  RademacherEstimate est;
  est.value = sum / tr;
  const double var = trials > 1 ? std::max(0.0, (sum_sq - tr * est.value * est.value) / (tr - 1)) : 0.0;
  est.std_error = std::sqrt(var / tr);
  return est;
}

Eigen::Index jl_dimension(std::uint64_t l, double gamma, double C) {
  if (l < 1 || !(gamma > 0)) throw Error(ErrorCode::InvalidArgument, "jl_dimension");
  return static_cast<Eigen::Index>(std::ceil(C * std::log(static_cast<double>(l)) / (gamma * gamma)));
}

JlProjection jl_project(const PointCloud& cloud, Eigen::Index g, std::uint64_t seed) {
  const Eigen::Index n = cloud.dim();
  if (g < 1 || g > n) throw Error(ErrorCode::InvalidArgument, "jl_project needs 1 <= g <= n");
  Rng rng(seed);
  const Mat gauss = gaussian_matrix(n, g, rng);
  Eigen::HouseholderQR<Mat> qr(gauss);
  Mat frame = qr.householderQ() * Mat::Identity(n, g);
  JlProjection out;
  out.projected = PointCloud(frame * (frame.transpose() * cloud.points()), cloud.weights(), cloud.unit_ball());
  out.frame = std::move(frame);
  out.scale = static_cast<double>(n) / static_cast<double>(g);
  return out;
}

Vec lift_phi(const AffineSubspace& h, Eigen::Index d) {
  const Eigen::Index n = h.ambient_dim();
  const Vec c = h.nearest_to_origin();
  const Mat p = h.basis() * h.basis().transpose();
  Vec phi(1 + n * n + n);
  phi(0) = c.squaredNorm();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) phi(1 + i * n + j) = -p(i, j);
  phi.tail(n) = -2.0 * c;
  return phi / std::sqrt(static_cast<double>(d) + 5.0);
}

Vec lift_psi(const Eigen::Ref<const Vec>& x) {
  const Eigen::Index n = x.size();
  Vec psi(1 + n * n + n);
  psi(0) = 1.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) psi(1 + i * n + j) = x(i) * x(j);
  psi.tail(n) = x;
  return psi / std::sqrt(3.0);
}

LiftCheck lift_identity_check(const Eigen::Ref<const Vec>& x, const std::vector<AffineSubspace>& planes,
                              Eigen::Index d) {
  if (planes.empty()) throw Error(ErrorCode::EmptyInput, "lift_identity_check needs planes");
  if (x.norm() > 1.0 + 1e-9) throw Error(ErrorCode::InvalidArgument, "x outside the unit ball");
  if (d < 0)
    for (const auto& h : planes) d = std::max(d, h.dim());
  LiftCheck out;
  const Vec psi = lift_psi(x);
  out.psi_norm = psi.norm();
  double lhs = std::numeric_limits<double>::infinity();
  double inner = std::numeric_limits<double>::infinity();
  for (const auto& h : planes) {
    if (h.ambient_dim() != x.size()) throw Error(ErrorCode::DimensionMismatch, "plane dimension");
    if (h.dim() > d) throw Error(ErrorCode::InvalidArgument, "plane dimension exceeds d");
    if (h.nearest_to_origin().norm() > 1.0 + 1e-9)
      throw Error(ErrorCode::InvalidArgument, "plane does not meet the unit ball");
    const double dist = dist_to_affine(x, h);
    lhs = std::min(lhs, dist * dist);
    const Vec phi = lift_phi(h, d);
    out.max_phi_norm = std::max(out.max_phi_norm, phi.norm());
    inner = std::min(inner, phi.dot(psi));
  }
  out.lhs = lhs;
  out.rhs = x.squaredNorm() + std::sqrt(3.0 * (static_cast<double>(d) + 5.0)) * inner;
  if (out.psi_norm > 1.0 + 1e-12 || out.max_phi_norm > 1.0 + 1e-12)
    throw Error(ErrorCode::InvalidArgument, "lift feature norm exceeds 1");
  return out;
}

std::uint64_t sauer_shelah(std::uint64_t vc, std::uint64_t k) {
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  using u128 = unsigned __int128;
  u128 total = 0;
  u128 binom = 1;
  for (std::uint64_t i = 0; i <= std::min(vc, k); ++i) {
    if (i > 0) binom = binom * (k - i + 1) / i;
    total += binom;
    if (binom > kMax || total > kMax) return kMax;
  }
  return static_cast<std::uint64_t>(total);
}

}  // namespace mnfd
