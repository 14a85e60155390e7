#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "mnfd/asdf.hpp"
#include "mnfd/geometry.hpp"
#include "mnfd/packet.hpp"

namespace fixtures {

using mnfd::AffineSubspace;
using mnfd::Mat;
using mnfd::PointCloud;
using mnfd::Vec;

struct Sample {
  PointCloud cloud;
  std::vector<AffineSubspace> tangents;
};

/// Evenly spaced (with a random phase) points on the circle of radius r in the plane.
inline Sample circle(std::size_t count, double r = 1.0, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 2 * std::numbers::pi);
  const double phase = u(rng);
  Mat pts(2, static_cast<Eigen::Index>(count));
  std::vector<AffineSubspace> tans;
  for (std::size_t i = 0; i < count; ++i) {
    const double t = phase + 2 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(count);
    pts.col(static_cast<Eigen::Index>(i)) << r * std::cos(t), r * std::sin(t);
    Mat b(2, 1);
    b << -std::sin(t), std::cos(t);
    tans.emplace_back(pts.col(static_cast<Eigen::Index>(i)), b);
  }
  return {PointCloud(pts), tans};
}

/// Uniform random points on the torus with center-circle radius R and tube radius r in R^3.
inline Sample torus(std::size_t count, double R, double r, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 2 * std::numbers::pi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Mat pts(3, static_cast<Eigen::Index>(count));
  std::vector<AffineSubspace> tans;
  std::size_t i = 0;
  while (i < count) {
    const double a = u(rng), b = u(rng);
    // Area element is proportional to R + r cos(b).
    if (unit(rng) * (R + r) > R + r * std::cos(b)) continue;
    Vec p(3);
    p << (R + r * std::cos(b)) * std::cos(a), (R + r * std::cos(b)) * std::sin(a), r * std::sin(b);
    Mat t(3, 2);
    t.col(0) << -std::sin(a), std::cos(a), 0;
    t.col(1) << -std::sin(b) * std::cos(a), -std::sin(b) * std::sin(a), std::cos(b);
    pts.col(static_cast<Eigen::Index>(i)) = p;
    tans.emplace_back(p, t);
    ++i;
  }
  return {PointCloud(pts), tans};
}

/// Packet of the unit circle built from a dense analytic sample.
inline mnfd::CylinderPacket circle_packet(double tau, double cbar12 = 0.1, double r = 1.0) {
  const Sample s = circle(4000, r, 7);
  return mnfd::ideal_packet(
      s.cloud, [&](std::size_t i) { return s.tangents[i]; }, 1, tau, cbar12);
}

/// Packet of a d-plane spanned by the first d axes of R^n, centers on a grid of the given half-width.
inline mnfd::CylinderPacket flat_packet(Eigen::Index n, Eigen::Index d, double tau, double cbar12,
                                        double half_width) {
  const double tb = cbar12 * tau;
  const double step = tb / 2;
  const auto side = static_cast<Eigen::Index>(std::floor(2 * half_width / step)) + 1;
  Eigen::Index total = 1;
  for (Eigen::Index k = 0; k < d; ++k) total *= side;
  std::vector<mnfd::Cylinder> cyl;
  for (Eigen::Index idx = 0; idx < total; ++idx) {
    Vec c = Vec::Zero(n);
    Eigen::Index rem = idx;
    for (Eigen::Index k = 0; k < d; ++k) {
      c(k) = -half_width + step * static_cast<double>(rem % side);
      rem /= side;
    }
    cyl.push_back(mnfd::Cylinder{Mat::Identity(n, n), c});
  }
  return mnfd::CylinderPacket(std::move(cyl), d, tau, tb);
}

/// Packet of the torus (R, r) from an analytic sample.
inline mnfd::CylinderPacket torus_packet(double R, double r, double tau, double cbar12, std::size_t count = 20000) {
  const Sample s = torus(count, R, r, 5);
  return mnfd::ideal_packet(
      s.cloud, [&](std::size_t i) { return s.tangents[i]; }, 2, tau, cbar12);
}

/// Relative error with an absolute floor.
inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace fixtures
