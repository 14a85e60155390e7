#include "mnfd/asdf.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "mnfd/bump.hpp"
#include "mnfd/error.hpp"

namespace mnfd {

namespace {

constexpr double kSlack = 1e-12;

struct Member {
  std::size_t index;
  Vec tangential;
  Vec normal;
};

std::vector<Member> members(const CylinderPacket& packet, const Eigen::Ref<const Vec>& z) {
  if (z.size() != packet.n()) throw Error(ErrorCode::DimensionMismatch, "point dimension differs from packet");
  const double lim = 2 * packet.tau_bar() + kSlack;
  const Eigen::Index d = packet.d(), m = packet.n() - packet.d();
  std::vector<Member> out;
  for (std::size_t i : packet.near(z, std::sqrt(2.0) * lim)) {
    const Vec w = packet.cylinder(i).to_local(z);
    Member mem{i, w.head(d), w.tail(m)};
    if (mem.tangential.norm() <= lim && mem.normal.norm() <= lim) out.push_back(std::move(mem));
  }
  if (out.empty()) throw Error(ErrorCode::OutOfDomain, "point lies in no doubled cylinder");
  return out;
}

}  // namespace

double asdf_eval(const CylinderPacket& packet, const Eigen::Ref<const Vec>& z) {
  const double scale = 1.0 / (2 * packet.tau_bar());
  double num = 0, den = 0;
  for (const Member& mem : members(packet, z)) {
    const double th = bump_value(mem.tangential * scale);
    num += mem.normal.squaredNorm() * th;
    den += th;
  }
  if (!(den > 0)) throw Error(ErrorCode::DegenerateCover, "bump weights vanish at this point");
  return num / den;
}

AsdfDerivatives asdf_grad_hess(const CylinderPacket& packet, const Eigen::Ref<const Vec>& z) {
  const Eigen::Index n = packet.n(), d = packet.d();
  const double scale = 1.0 / (2 * packet.tau_bar());
  double num = 0, den = 0;
  Vec g_num = Vec::Zero(n), g_den = Vec::Zero(n);
  Mat h_num = Mat::Zero(n, n), h_den = Mat::Zero(n, n);
  const std::vector<Member> mems = members(packet, z);
  for (const Member& mem : mems) {
    const Mat& rot = packet.cylinder(mem.index).rotation;
    const auto tan = rot.leftCols(d);
    const auto nor = rot.rightCols(n - d);
    const Bump th = bump_theta(mem.tangential * scale);
    const double phi = mem.normal.squaredNorm();
    const Vec g_phi = 2.0 * (nor * mem.normal);
    const Vec g_th = scale * (tan * th.gradient);
    const Mat h_th = (scale * scale) * (tan * th.hessian * tan.transpose());
    num += phi * th.value;
    den += th.value;
    g_num += th.value * g_phi + phi * g_th;
    g_den += g_th;
    h_num += 2.0 * th.value * (nor * nor.transpose()) + g_phi * g_th.transpose() + g_th * g_phi.transpose() +
             phi * h_th;
    h_den += h_th;
  }
  if (!(den > 0)) throw Error(ErrorCode::DegenerateCover, "bump weights vanish at this point");
  AsdfDerivatives out;
  out.active = mems.size();
  out.value = num / den;
  out.gradient = (g_num - out.value * g_den) / den;
  out.hessian = (h_num - out.value * h_den - out.gradient * g_den.transpose() - g_den * out.gradient.transpose()) / den;
  out.hessian = 0.5 * (out.hessian + out.hessian.transpose());
  return out;
}

SpectralProjection pi_hi(const Mat& hessian, Eigen::Index codim, double gap_tol, const AsdfConstants& constants) {
  const Eigen::Index n = hessian.rows();
  if (hessian.cols() != n) throw Error(ErrorCode::DimensionMismatch, "Hessian must be square");
  if (codim < 1 || codim > n) throw Error(ErrorCode::InvalidArgument, "codimension out of range");
  const double asym = (hessian - hessian.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-9 * std::max(1.0, hessian.cwiseAbs().maxCoeff()))
    throw Error(ErrorCode::InvalidArgument, "Hessian is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (hessian + hessian.transpose()));
  SpectralProjection out;
  out.eigenvalues = eig.eigenvalues();
  const Eigen::Index d = n - codim;
  out.gap = out.eigenvalues(d) - (d > 0 ? out.eigenvalues(d - 1) : 0.0);
  if (out.gap < gap_tol)
    throw Error(ErrorCode::InsufficientGap, "spectral gap " + std::to_string(out.gap) + " below tolerance");
  out.fiber_basis = eig.eigenvectors().rightCols(codim);
  canonicalize_signs(out.fiber_basis);
  out.projector = out.fiber_basis * out.fiber_basis.transpose();
  out.in_band = out.eigenvalues(d) >= constants.cbar2 && out.eigenvalues(n - 1) <= constants.Cbar3;
  return out;
}

Mat BundleChart::tangent_basis() const {
  const Eigen::Index n = fiber_basis.rows(), m = fiber_basis.cols();
  return frame_from_tangent(fiber_basis).rightCols(n - m);
}

namespace {

struct NewtonState {
  Vec z;
  AsdfDerivatives der;
  SpectralProjection spec;
  double residual = 0;
};

NewtonState evaluate(const CylinderPacket& packet, const Vec& z, const AsdfConstants& c) {
  NewtonState s;
  s.z = z;
  s.der = asdf_grad_hess(packet, z);
  s.spec = pi_hi(s.der.hessian, packet.n() - packet.d(), c.gap_tol, c);
  s.residual = (s.spec.fiber_basis.transpose() * s.der.gradient).norm();
  return s;
}

std::size_t owning_cylinder(const CylinderPacket& packet, const Vec& z) {
  const double scale = 1.0 / (2 * packet.tau_bar());
  std::size_t best = 0;
  double best_theta = -1;
  for (const Member& mem : members(packet, z)) {
    const double th = bump_value(mem.tangential * scale);
    if (th > best_theta) {
      best_theta = th;
      best = mem.index;
    }
  }
  return best;
}

}  // namespace

BundleChart solve_base_point(const CylinderPacket& packet, const Eigen::Ref<const Vec>& z0,
                             const AsdfConstants& constants) {
  NewtonState cur = evaluate(packet, Vec(z0), constants);
  int step = 0;
  while (cur.residual > constants.newton_tol) {
    if (step >= constants.max_steps)
      throw Error(ErrorCode::NoConvergence, "Newton residual " + std::to_string(cur.residual));
    ++step;
    const Mat& v = cur.spec.fiber_basis;
    const Mat reduced = v.transpose() * cur.der.hessian * v;
    const Vec coeff = reduced.ldlt().solve(-(v.transpose() * cur.der.gradient));
    const Vec dir = v * coeff;
    double t = 1.0;
    bool accepted = false;
    bool escaped = false;
    for (int h = 0; h <= constants.max_halvings; ++h, t *= 0.5) {
      try {
        NewtonState trial = evaluate(packet, cur.z + t * dir, constants);
        if (trial.residual < cur.residual) {
          cur = std::move(trial);
          accepted = true;
          break;
        }
        escaped = false;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::OutOfDomain && e.code() != ErrorCode::DegenerateCover &&
            e.code() != ErrorCode::InsufficientGap)
          throw;
        escaped = e.code() != ErrorCode::InsufficientGap;
      }
    }
    if (!accepted) {
      if (escaped) throw Error(ErrorCode::EscapedDomain, "Newton iterate left the packet domain");
      throw Error(ErrorCode::NoConvergence, "damped Newton stalled at residual " + std::to_string(cur.residual));
    }
  }
  BundleChart chart;
  chart.base_point = cur.z;
  chart.projector_hi = cur.spec.projector;
  chart.fiber_basis = cur.spec.fiber_basis;
  chart.residual = cur.residual;
  chart.steps = step;
  chart.owning_cylinder = owning_cylinder(packet, cur.z);
  return chart;
}

PointCloud PutativeMesh::base_points() const {
  if (charts.empty()) return PointCloud(Mat(0, 0));
  Mat pts(charts.front().base_point.size(), static_cast<Eigen::Index>(charts.size()));
  for (std::size_t i = 0; i < charts.size(); ++i) pts.col(static_cast<Eigen::Index>(i)) = charts[i].base_point;
  return PointCloud(std::move(pts));
}

PutativeMesh extract_putative_manifold(const CylinderPacket& packet, const PointCloud& seeds,
                                       const AsdfConstants& constants) {
  PutativeMesh mesh;
  mesh.tolerance = constants.newton_tol;
  std::vector<BundleChart> solved;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    try {
      solved.push_back(solve_base_point(packet, seeds.point(i), constants));
    } catch (const Error& e) {
      if (mesh.failures++ == 0) mesh.first_failure = e.what();
    }
  }
  if (solved.empty()) throw Error(ErrorCode::EmptyMesh, "no seed converged: " + mesh.first_failure);
  std::stable_sort(solved.begin(), solved.end(), [](const BundleChart& a, const BundleChart& b) {
    return std::lexicographical_compare(a.base_point.data(), a.base_point.data() + a.base_point.size(),
                                        b.base_point.data(), b.base_point.data() + b.base_point.size());
  });
  const double merge = packet.tau_bar() / 100;
  for (BundleChart& c : solved) {
    bool dup = false;
    for (const BundleChart& kept : mesh.charts)
      if ((kept.base_point - c.base_point).norm() < merge) {
        dup = true;
        break;
      }
    if (!dup) mesh.charts.push_back(std::move(c));
  }
  return mesh;
}

BundleCoordinates bundle_coordinates(const CylinderPacket& packet, const BundleChart& start,
                                     const Eigen::Ref<const Vec>& z, const AsdfConstants& constants) {
  BundleCoordinates out;
  out.base = start;
  constexpr int kMaxIters = 100;
  for (int it = 0; it <= kMaxIters; ++it) {
    const Vec rel = z - out.base.base_point;
    const Vec tangential = rel - out.base.projector_hi * rel;
    out.residual = tangential.norm();
    out.iterations = it;
    if (out.residual <= 1e-10 * std::max(1.0, z.norm())) {
      out.v = out.base.projector_hi * rel;
      return out;
    }
    if (it == kMaxIters) break;
    try {
      out.base = solve_base_point(packet, out.base.base_point + tangential, constants);
    } catch (const Error& e) {
      throw Error(ErrorCode::DecompositionFailed, std::string("fiber search failed: ") + e.what());
    }
  }
  throw Error(ErrorCode::DecompositionFailed, "alternating projection did not converge");
}

namespace {

std::vector<Vec> unit_ball_grid(Eigen::Index dim, double step) {
  std::vector<Vec> out;
  if (dim == 0) {
    out.emplace_back(Vec(0));
    return out;
  }
  const int half = static_cast<int>(std::floor(1.0 / step + 1e-9));
  const int side = 2 * half + 1;
  long total = 1;
  for (Eigen::Index k = 0; k < dim; ++k) total *= side;
  Vec p(dim);
  for (long idx = 0; idx < total; ++idx) {
    long rem = idx;
    for (Eigen::Index k = 0; k < dim; ++k) {
      p(k) = step * static_cast<double>(rem % side - half);
      rem /= side;
    }
    if (p.norm() <= 1.0 + 1e-12) out.push_back(p);
  }
  return out;
}

}  // namespace

AsdfConditionReport check_asdf_conditions(const CylinderPacket& packet, const PointCloud& sample,
                                          const std::vector<Mat>& frames, double rho,
                                          const AsdfThresholds& thresholds, double grid_step) {
  if (frames.size() != sample.size()) throw Error(ErrorCode::DimensionMismatch, "one frame per sample point");
  const Eigen::Index n = packet.n(), d = packet.d(), m = n - d;
  const double tb = packet.tau_bar();
  const double rho2 = rho * rho;
  const double h = 1e-3;
  AsdfConditionReport rep;
  rep.c1 = std::numeric_limits<double>::infinity();
  rep.C1 = 0;
  const std::vector<Vec> xs = unit_ball_grid(d, grid_step), ys = unit_ball_grid(m, grid_step);
  for (std::size_t s = 0; s < sample.size(); ++s) {
    const Vec p = sample.point(s);
    const Mat& frame = frames[s];
    auto fhat = [&](const Vec& w) { return asdf_eval(packet, p + tb * (frame * w)) / (tb * tb); };
    try {
      for (const Vec& x : xs)
        for (const Vec& y : ys) {
          Vec w(n);
          w << x, y;
          const double f = fhat(w);
          const double denom = y.squaredNorm() + rho2;
          if (denom > 0) {
            const double ratio = (f + rho2) / denom;
            rep.c1 = std::min(rep.c1, ratio);
            rep.C1 = std::max(rep.C1, ratio);
          }
          rep.max_value = std::max(rep.max_value, std::abs(f));
          for (Eigen::Index i = 0; i < n; ++i) {
            Vec wp = w, wm = w;
            wp(i) += h;
            wm(i) -= h;
            const double fp = fhat(wp), fm = fhat(wm);
            rep.max_gradient = std::max(rep.max_gradient, std::abs(fp - fm) / (2 * h));
            rep.max_hessian = std::max(rep.max_hessian, std::abs(fp - 2 * f + fm) / (h * h));
            for (Eigen::Index j = i + 1; j < n; ++j) {
              Vec a = w, b = w, c = w, e = w;
              a(i) += h, a(j) += h;
              b(i) += h, b(j) -= h;
              c(i) -= h, c(j) += h;
              e(i) -= h, e(j) -= h;
              const double mixed = (fhat(a) - fhat(b) - fhat(c) + fhat(e)) / (4 * h * h);
              rep.max_hessian = std::max(rep.max_hessian, std::abs(mixed));
            }
          }
          ++rep.evaluated;
        }
    } catch (const Error&) {
      rep.escaped.push_back(s);
    }
  }
  if (rep.evaluated == 0) rep.c1 = 0;
  rep.lower_violated = rep.c1 < thresholds.c1_min;
  rep.upper_violated = rep.C1 > thresholds.C1_max;
  rep.derivative_violated =
      std::max({rep.max_value, rep.max_gradient, rep.max_hessian}) > thresholds.C0;
  return rep;
}

}  // namespace mnfd
