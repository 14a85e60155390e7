#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mnfd/geometry.hpp"

namespace mnfd {

struct KPlanesModel {
  std::vector<AffineSubspace> planes;
  Eigen::Index k = 0;
  Eigen::Index d = 0;

  /// Throws unless nonempty and every plane meets the unit ball.
  void validate() const;
};

struct KPlanesFit {
  KPlanesModel model;
  std::vector<double> loss_trace;  ///< loss of the winning restart, one entry per iteration
  std::size_t best_restart = 0;
};

/// Squared distance from x to the nearest plane; `which` receives the plane index.
double min_sq_dist(const Eigen::Ref<const Vec>& x, const KPlanesModel& model, std::size_t* which = nullptr);

double kplanes_loss(const PointCloud& cloud, const KPlanesModel& model);

KPlanesFit fit_kplanes(const PointCloud& cloud, Eigen::Index k, Eigen::Index d, std::size_t restarts,
                       std::size_t max_iters, std::uint64_t seed);

/// Draws `count` points (as columns) from a fixed distribution.
using Sampler = std::function<Mat(std::size_t count, Rng& rng)>;

struct DeviationStats {
  std::vector<double> deviations;
  double mean = 0;
  double median = 0;
  double max = 0;
};

DeviationStats deviation_experiment(const Sampler& sampler, Eigen::Index k, Eigen::Index d, std::size_t s,
                                    std::size_t trials, std::uint64_t seed);

}  // namespace mnfd
