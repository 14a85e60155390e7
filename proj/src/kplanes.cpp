#include "mnfd/kplanes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mnfd/error.hpp"

namespace mnfd {

void KPlanesModel::validate() const {
  if (planes.empty()) throw Error(ErrorCode::EmptyInput, "k-planes model has no planes");
  for (const auto& h : planes)
    if (h.nearest_to_origin().norm() > 1.0 + 1e-9)
      throw Error(ErrorCode::InvalidArgument, "plane does not meet the unit ball");
}

double min_sq_dist(const Eigen::Ref<const Vec>& x, const KPlanesModel& model, std::size_t* which) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < model.planes.size(); ++i) {
    const double dist = dist_to_affine(x, model.planes[i]);
    if (dist * dist < best) {
      best = dist * dist;
      if (which) *which = i;
    }
  }
  return best;
}

double kplanes_loss(const PointCloud& cloud, const KPlanesModel& model) {
  if (model.planes.empty()) throw Error(ErrorCode::EmptyInput, "k-planes model has no planes");
  if (model.planes.front().ambient_dim() != cloud.dim())
    throw Error(ErrorCode::DimensionMismatch, "cloud and model dimensions differ");
  double loss = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) loss += cloud.weight(i) * min_sq_dist(cloud.point(i), model);
  return loss;
}

namespace {

/// Weighted PCA plane anchored at its point nearest the origin.
AffineSubspace fit_plane(const Mat& pts, const Vec& w, Eigen::Index d) {
  const Vec wn = w / w.sum();
  const Vec mean = pts * wn;
  const Mat basis = principal_directions(pts, d, &wn);
  return AffineSubspace(mean - basis * (basis.transpose() * mean), basis);
}

AffineSubspace local_plane(const PointCloud& cloud, std::size_t center, std::size_t neighbors,
                           Eigen::Index d) {
  std::vector<std::size_t> order(cloud.size());
  std::iota(order.begin(), order.end(), 0);
  Vec dist = (cloud.points().colwise() - cloud.point(center)).colwise().squaredNorm().transpose();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dist(static_cast<Eigen::Index>(a)) < dist(static_cast<Eigen::Index>(b));
  });
  order.resize(std::min(neighbors, order.size()));
  Mat pts(cloud.dim(), static_cast<Eigen::Index>(order.size()));
  Vec w(static_cast<Eigen::Index>(order.size()));
  for (std::size_t i = 0; i < order.size(); ++i) {
    pts.col(static_cast<Eigen::Index>(i)) = cloud.point(order[i]);
    w(static_cast<Eigen::Index>(i)) = 1.0;
  }
  return fit_plane(pts, w, d);
}

struct Restart {
  KPlanesModel model;
  std::vector<double> trace;
};

Restart run_restart(const PointCloud& cloud, Eigen::Index k, Eigen::Index d, std::size_t max_iters,
                    std::uint64_t seed) {
  const std::size_t n_pts = cloud.size();
  const std::size_t local = (n_pts + static_cast<std::size_t>(k) - 1) / static_cast<std::size_t>(k);
  Rng rng(seed);
  Restart out;
  out.model.k = k;
  out.model.d = d;
  // k-means++ seeding: first center uniform, later ones by squared-distance sampling.
  std::uniform_int_distribution<std::size_t> first(0, n_pts - 1);
  std::vector<std::size_t> centers{first(rng)};
  Vec d2 = (cloud.points().colwise() - cloud.point(centers[0])).colwise().squaredNorm().transpose();
  while (static_cast<Eigen::Index>(centers.size()) < k) {
    const double total = d2.sum();
    std::size_t pick = 0;
    if (total <= 0) {
      pick = static_cast<std::size_t>(std::distance(d2.data(), std::max_element(d2.data(), d2.data() + d2.size())));
    } else {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng), acc = 0;
      for (pick = 0; pick + 1 < n_pts; ++pick) {
        acc += d2(static_cast<Eigen::Index>(pick));
        if (acc >= target) break;
      }
    }
    centers.push_back(pick);
    d2 = d2.cwiseMin((cloud.points().colwise() - cloud.point(pick)).colwise().squaredNorm().transpose());
  }
  for (std::size_t c : centers) out.model.planes.push_back(local_plane(cloud, c, local, d));

  std::vector<std::size_t> assign(n_pts, 0);
  Vec dist(static_cast<Eigen::Index>(n_pts));
  auto assign_all = [&]() {
    double loss = 0;
    for (std::size_t i = 0; i < n_pts; ++i) {
      dist(static_cast<Eigen::Index>(i)) = min_sq_dist(cloud.point(i), out.model, &assign[i]);
      loss += cloud.weight(i) * dist(static_cast<Eigen::Index>(i));
    }
    return loss;
  };
  double loss = assign_all();
  out.trace.push_back(loss);
  for (std::size_t it = 0; it < max_iters; ++it) {
    KPlanesModel next = out.model;
    for (Eigen::Index j = 0; j < k; ++j) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < n_pts; ++i)
        if (assign[i] == static_cast<std::size_t>(j)) members.push_back(i);
      double mass = 0;
      for (std::size_t i : members) mass += cloud.weight(i);
      if (members.empty() || mass <= 0) {
        // Empty cluster: re-seed at the point currently farthest from the model.
        Eigen::Index far = 0;
        dist.maxCoeff(&far);
        next.planes[static_cast<std::size_t>(j)] = local_plane(cloud, static_cast<std::size_t>(far), local, d);
        dist(far) = 0;
        continue;
      }
      Mat pts(cloud.dim(), static_cast<Eigen::Index>(members.size()));
      Vec w(static_cast<Eigen::Index>(members.size()));
      for (std::size_t m = 0; m < members.size(); ++m) {
        pts.col(static_cast<Eigen::Index>(m)) = cloud.point(members[m]);
        w(static_cast<Eigen::Index>(m)) = cloud.weight(members[m]);
      }
      next.planes[static_cast<std::size_t>(j)] = fit_plane(pts, w, d);
    }
    std::swap(next, out.model);
    const double new_loss = assign_all();
    if (new_loss > loss) {
      // Round-off can make a refit marginally worse; keep the previous model.
      std::swap(next, out.model);
      assign_all();
      break;
    }
    out.trace.push_back(new_loss);
    const double improvement = loss - new_loss;
    loss = new_loss;
    if (improvement < 1e-10) break;
  }
  return out;
}

}  // namespace

KPlanesFit fit_kplanes(const PointCloud& cloud, Eigen::Index k, Eigen::Index d, std::size_t restarts,
                       std::size_t max_iters, std::uint64_t seed) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (static_cast<std::size_t>(k) > cloud.size()) throw Error(ErrorCode::Infeasible, "k exceeds point count");
  if (d < 0 || d >= cloud.dim()) throw Error(ErrorCode::InvalidArgument, "need 0 <= d < n");
  KPlanesFit best;
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    Restart run = run_restart(cloud, k, d, max_iters, seed + r);
    if (run.trace.back() < best_loss) {
      best_loss = run.trace.back();
      best.model = std::move(run.model);
      best.loss_trace = std::move(run.trace);
      best.best_restart = r;
    }
  }
  return best;
}

DeviationStats deviation_experiment(const Sampler& sampler, Eigen::Index k, Eigen::Index d, std::size_t s,
                                    std::size_t trials, std::uint64_t seed) {
  if (s < 1) throw Error(ErrorCode::InvalidArgument, "sample size must be >= 1");
  DeviationStats stats;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(split_seed(seed, t));
    const PointCloud train(sampler(s, rng));
    const PointCloud holdout(sampler(10 * s, rng));
    const Eigen::Index k_eff = std::min<Eigen::Index>(k, static_cast<Eigen::Index>(s));
    const Eigen::Index d_eff = std::min<Eigen::Index>(d, train.dim() - 1);
    const KPlanesFit fit = fit_kplanes(train, k_eff, d_eff, 3, 100, split_seed(seed, t) + 1);
    stats.deviations.push_back(std::abs(fit.loss_trace.back() - kplanes_loss(holdout, fit.model)));
  }
  if (!stats.deviations.empty()) {
    std::vector<double> sorted = stats.deviations;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    stats.median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    stats.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(m);
    stats.max = sorted.back();
  }
  return stats;
}

}  // namespace mnfd
