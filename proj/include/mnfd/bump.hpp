#pragma once

#include "mnfd/types.hpp"

namespace mnfd {

/// Value and first two derivatives of the radial profile h: [0, inf) -> [0, 1],
/// h = 1 on [0, 1/4], h = 0 on [1, inf), C-infinity and monotone in between.
struct Profile {
  double value = 0;
  double d1 = 0;
  double d2 = 0;
};

Profile bump_profile(double t);

struct Bump {
  double value = 0;
  Vec gradient;
  Mat hessian;
};

/// theta(x) = h(|x|) on R^d with gradient and Hessian.
Bump bump_theta(const Eigen::Ref<const Vec>& x);

/// Value only.
double bump_value(const Eigen::Ref<const Vec>& x);

}  // namespace mnfd
