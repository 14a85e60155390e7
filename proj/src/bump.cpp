#include "mnfd/bump.hpp"

#include <cmath>

namespace mnfd {

namespace {

struct Psi3 {
  double f, f1, f2;
};

/// f(t) = exp(-1/t) for t > 0 and 0 otherwise, with two derivatives.
Psi3 flat_exp(double t) {
  if (t <= 0) return {0, 0, 0};
  const double f = std::exp(-1.0 / t);
  const double it = 1.0 / t;
  return {f, f * it * it, f * (it * it * it * it - 2 * it * it * it)};
}

constexpr double kInner = 0.25;
constexpr double kWidth = 0.75;

}  // namespace

Profile bump_profile(double t) {
  if (t <= kInner) return {1, 0, 0};
  if (t >= 1) return {0, 0, 0};
  // Smooth step S(u) = a/(a+b), a = f(1-u), b = f(u), on the ramp u in (0, 1).
  const double u = (t - kInner) / kWidth;
  const Psi3 fa = flat_exp(1 - u), fb = flat_exp(u);
  const double a = fa.f, b = fb.f;
  const double a1 = -fa.f1, b1 = fb.f1;
  const double a2 = fa.f2, b2 = fb.f2;
  const double den = a + b;
  const double num1 = a1 * b - a * b1;
  const double s = a / den;
  const double s1 = num1 / (den * den);
  const double num1_d = a2 * b - a * b2;
  const double den_d = a1 + b1;
  const double s2 = (num1_d * den - 2 * num1 * den_d) / (den * den * den);
  return {s, s1 / kWidth, s2 / (kWidth * kWidth)};
}

double bump_value(const Eigen::Ref<const Vec>& x) { return bump_profile(x.norm()).value; }

Bump bump_theta(const Eigen::Ref<const Vec>& x) {
  const Eigen::Index d = x.size();
  Bump out;
  out.gradient = Vec::Zero(d);
  out.hessian = Mat::Zero(d, d);
  const double t = x.norm();
  const Profile h = bump_profile(t);
  out.value = h.value;
  if (t <= kInner || t >= 1) return out;
  const Vec u = x / t;
  out.gradient = h.d1 * u;
  out.hessian = h.d2 * u * u.transpose() + (h.d1 / t) * (Mat::Identity(d, d) - u * u.transpose());
  return out;
}

}  // namespace mnfd
