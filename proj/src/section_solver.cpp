#include "mnfd/section_solver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>

namespace mnfd {

SolverKind parse_solver(const std::string& name) {
  if (name == "interior-point") return SolverKind::InteriorPoint;
  if (name == "cutting-plane") return SolverKind::CuttingPlane;
  if (name == "projected-gradient") return SolverKind::ProjectedGradient;
  throw Error(ErrorCode::InvalidArgument, "unknown solver '" + name + "'");
}

std::string to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::InteriorPoint: return "interior-point";
    case SolverKind::CuttingPlane: return "cutting-plane";
    case SolverKind::ProjectedGradient: break;
  }
  return "projected-gradient";
}

namespace {

/// Minimizer of the Lagrangian for each component, and the dual value.
struct DualEval {
  double value = 0;
  Mat x;
};

DualEval dual_eval(const SketchedData& data, const ConstraintSet& cs, const Vec& lambda) {
  const FieldLayout& layout = cs.layout;
  const Eigen::Index dim = layout.rows(), m = data.targets.rows();
  Mat q = Mat::Zero(dim, dim);
  Mat b = Mat::Zero(dim, m);
  double constant = 0;
  for (std::size_t s = 0; s < layout.sites; ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    const Eigen::Index r = layout.value_row(s);
    q(r, r) += data.mu(si);
    b.row(r) = data.mu(si) * data.targets.col(si).transpose();
    constant += data.mu(si) * data.targets.col(si).squaredNorm();
  }
  for (std::size_t i = 0; i < cs.constraints.size(); ++i) {
    const double li = lambda(static_cast<Eigen::Index>(i));
    if (li <= 0) continue;
    const Constraint& c = cs.constraints[i];
    for (std::size_t a = 0; a < c.index.size(); ++a)
      for (std::size_t bb = 0; bb < c.index.size(); ++bb) q(c.index[a], c.index[bb]) += li * c.coeff[a] * c.coeff[bb];
    constant -= li * c.beta;
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig(q);
  const Vec w = eig.eigenvalues();
  const double cut = 1e-12 * std::max(w.maxCoeff(), 1e-300);
  Vec inv = Vec::Zero(w.size());
  for (Eigen::Index k = 0; k < w.size(); ++k)
    if (w(k) > cut) inv(k) = 1.0 / w(k);
  const Mat ub = eig.eigenvectors().transpose() * b;
  DualEval out;
  out.x = eig.eigenvectors() * (inv.asDiagonal() * ub);
  out.value = constant - (b.array() * out.x.array()).sum();
  return out;
}

}  // namespace

double lagrangian_lower_bound(const SketchedData& data, const ConstraintSet& cs, const Vec& lambda) {
  if (lambda.size() != static_cast<Eigen::Index>(cs.constraints.size()))
    throw Error(ErrorCode::DimensionMismatch, "one multiplier per constraint");
  return dual_eval(data, cs, lambda.cwiseMax(0.0)).value;
}

namespace {

/// Lawson-Hanson active-set solution of min |A l - y| subject to l >= 0.
Vec nnls(const Mat& a, const Vec& y, int max_iter) {
  const Eigen::Index k = a.cols();
  Vec l = Vec::Zero(k);
  std::vector<bool> passive(static_cast<std::size_t>(k), false);
  const double tol = 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff() * y.cwiseAbs().maxCoeff());
  const auto solve_passive = [&](Vec& out) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < k; ++j)
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    Mat sub(a.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t t = 0; t < idx.size(); ++t) sub.col(static_cast<Eigen::Index>(t)) = a.col(idx[t]);
    const Vec sol = sub.colPivHouseholderQr().solve(y);
    out = Vec::Zero(k);
    for (std::size_t t = 0; t < idx.size(); ++t) out(idx[t]) = sol(static_cast<Eigen::Index>(t));
  };
  for (int outer = 0; outer < max_iter; ++outer) {
    const Vec w = a.transpose() * (y - a * l);
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index j = 0; j < k; ++j)
      if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;
    Vec sol;
    for (int inner = 0; inner < max_iter; ++inner) {
      solve_passive(sol);
      double alpha = 1.0;
      bool clipped = false;
      for (Eigen::Index j = 0; j < k; ++j)
        if (passive[static_cast<std::size_t>(j)] && sol(j) <= 0) {
          alpha = std::min(alpha, l(j) / std::max(l(j) - sol(j), 1e-300));
          clipped = true;
        }
      if (!clipped) break;
      l += alpha * (sol - l);
      for (Eigen::Index j = 0; j < k; ++j)
        if (passive[static_cast<std::size_t>(j)] && l(j) <= 1e-15) {
          passive[static_cast<std::size_t>(j)] = false;
          l(j) = 0;
        }
    }
    l = sol.cwiseMax(0.0);
  }
  return l;
}

}  // namespace

Vec estimate_multipliers(const SketchedData& data, const ConstraintSet& cs, const Mat& x) {
  const auto nc = static_cast<Eigen::Index>(cs.constraints.size());
  Vec lambda = Vec::Zero(nc);
  const Mat g0 = objective_gradient(x, cs.layout, data);
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < cs.constraints.size(); ++i) {
    const Constraint& c = cs.constraints[i];
    if (c.apply(x).squaredNorm() >= 0.9 * c.beta) active.push_back(i);
  }
  if (!active.empty()) {
    // Stationarity: grad zeta + sum lambda_i grad(|alpha_i^T x|^2) = 0 over the near-active set.
    const Eigen::Index nvar = g0.size();
    Mat a = Mat::Zero(nvar, static_cast<Eigen::Index>(active.size()));
    for (std::size_t t = 0; t < active.size(); ++t) {
      const Constraint& c = cs.constraints[active[t]];
      const Vec sv = c.apply(x);
      Mat col = Mat::Zero(g0.rows(), g0.cols());
      for (std::size_t q = 0; q < c.index.size(); ++q) col.row(c.index[q]) += 2.0 * c.coeff[q] * sv.transpose();
      a.col(static_cast<Eigen::Index>(t)) = Eigen::Map<const Vec>(col.data(), nvar);
    }
    const Vec l = nnls(a, -Eigen::Map<const Vec>(g0.data(), nvar), 3 * static_cast<int>(active.size()) + 10);
    for (std::size_t t = 0; t < active.size(); ++t) lambda(static_cast<Eigen::Index>(active[t])) = l(static_cast<Eigen::Index>(t));
  }
  // Projected dual ascent polishes the estimate.
  DualEval cur = dual_eval(data, cs, lambda);
  double step = 1.0;
  for (int it = 0; it < 15; ++it) {
    Vec grad(nc);
    for (Eigen::Index i = 0; i < nc; ++i) {
      const Constraint& c = cs.constraints[static_cast<std::size_t>(i)];
      grad(i) = c.apply(cur.x).squaredNorm() - c.beta;
    }
    for (Eigen::Index i = 0; i < nc; ++i)
      if (lambda(i) <= 0 && grad(i) < 0) grad(i) = 0;
    if (grad.norm() == 0) break;
    bool improved = false;
    for (int h = 0; h < 6; ++h, step *= 0.25) {
      const Vec trial = (lambda + step * grad).cwiseMax(0.0);
      DualEval next = dual_eval(data, cs, trial);
      if (next.value > cur.value) {
        lambda = trial;
        cur = std::move(next);
        improved = true;
        step *= 4;
        break;
      }
    }
    if (!improved) break;
  }
  return lambda;
}

namespace {

struct Certifier {
  const SketchedData& data;
  const ConstraintSet& cs;
  SolverResult best;
  bool has_best = false;

  /// Records a feasible candidate; returns true when its gap is within tolerance.
  /// Multipliers are fitted at `stationary` when given (any point yields a valid bound).
  bool offer(const Mat& feasible, double tolerance, bool certify, const Mat* stationary = nullptr) {
    const double z = objective(feasible, cs.layout, data);
    if (!has_best || z < best.zeta) {
      best.x = feasible;
      best.zeta = z;
      has_best = true;
    }
    if (!certify) return best.zeta - best.lower_bound <= tolerance;
    const Vec lambda = estimate_multipliers(data, cs, stationary ? *stationary : best.x);
    best.lower_bound = std::max(best.lower_bound, lagrangian_lower_bound(data, cs, lambda));
    return best.zeta - best.lower_bound <= tolerance;
  }
};

/// Dykstra projection onto the intersection, warm-started from the increments of the
/// previous call so consecutive nearby projections converge quickly.
class Dykstra {
 public:
  Dykstra(const ConstraintSet& cs, Eigen::Index m) : cs_(cs), m_(m) {
    std::size_t total = 0;
    for (const Constraint& c : cs.constraints) {
      offset_.push_back(total);
      total += c.index.size();
      double a2 = 0;
      for (double v : c.coeff) a2 += v * v;
      alpha2_.push_back(a2);
    }
    inc_.assign(total * static_cast<std::size_t>(m), 0.0);
    sum_ = Mat::Zero(cs.layout.rows(), m);
  }

  Mat project(const Mat& p, int max_sweeps) {
    Mat x = p - sum_;
    const double scale = 1.0 + p.cwiseAbs().maxCoeff();
    const auto m = static_cast<std::size_t>(m_);
    std::vector<double> s(m), z;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      double change = 0;
      for (std::size_t i = 0; i < cs_.constraints.size(); ++i) {
        const Constraint& c = cs_.constraints[i];
        const std::size_t k = c.index.size();
        double* inc = inc_.data() + offset_[i] * m;
        z.resize(k * m);
        std::fill(s.begin(), s.end(), 0.0);
        for (std::size_t t = 0; t < k; ++t)
          for (std::size_t j = 0; j < m; ++j) {
            z[t * m + j] = x(c.index[t], static_cast<Eigen::Index>(j)) + inc[t * m + j];
            s[j] += c.coeff[t] * z[t * m + j];
          }
        double norm2 = 0;
        for (double v : s) norm2 += v * v;
        const double norm = std::sqrt(norm2), lim = std::sqrt(c.beta);
        const double shrink = norm > lim ? (1.0 - lim / norm) / alpha2_[i] : 0.0;
        for (std::size_t t = 0; t < k; ++t)
          for (std::size_t j = 0; j < m; ++j) {
            const double proj = z[t * m + j] - shrink * c.coeff[t] * s[j];
            const double new_inc = z[t * m + j] - proj;
            double& xr = x(c.index[t], static_cast<Eigen::Index>(j));
            change = std::max(change, std::abs(xr - proj));
            xr = proj;
            sum_(c.index[t], static_cast<Eigen::Index>(j)) += new_inc - inc[t * m + j];
            inc[t * m + j] = new_inc;
          }
      }
      if (change <= 1e-13 * scale) break;
    }
    return x;
  }

 private:
  const ConstraintSet& cs_;
  Eigen::Index m_;
  std::vector<std::size_t> offset_;
  std::vector<double> alpha2_;
  std::vector<double> inc_;
  Mat sum_;
};

/// Log-barrier method on the second-order-cone form of the problem. The iterate stays
/// strictly feasible; the barrier multipliers feed the dual bound.
SolverResult interior_point(const SketchedData& data, const ConstraintSet& cs, double tolerance,
                            std::size_t budget) {
  const Eigen::Index dim = cs.layout.rows(), m = data.targets.rows();
  const Eigen::Index nvar = dim * m;
  const auto nc = static_cast<Eigen::Index>(cs.constraints.size());
  const auto var = [m](Eigen::Index row, Eigen::Index comp) { return row * m + comp; };
  Mat x = Mat::Zero(dim, m);
  SolverResult best;
  best.x = x;
  best.zeta = objective(x, cs.layout, data);
  best.lower_bound = -std::numeric_limits<double>::infinity();
  best.used = SolverKind::InteriorPoint;

  // Barrier value of t*zeta - sum log(beta - |alpha^T x|^2); +inf outside the domain.
  const auto merit = [&](const Mat& y, double t) {
    double v = t * objective(y, cs.layout, data);
    for (const Constraint& c : cs.constraints) {
      const double slack = c.beta - c.apply(y).squaredNorm();
      if (!(slack > 0)) return std::numeric_limits<double>::infinity();
      v -= std::log(slack);
    }
    return v;
  };
  const auto multipliers = [&](const Mat& y, double t) {
    Vec lambda(nc);
    for (Eigen::Index i = 0; i < nc; ++i) {
      const Constraint& c = cs.constraints[static_cast<std::size_t>(i)];
      lambda(i) = 1.0 / (t * (c.beta - c.apply(y).squaredNorm()));
    }
    return lambda;
  };

  double t = static_cast<double>(nc) / std::max(best.zeta, tolerance);
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt;
  bool analyzed = false;
  std::vector<Eigen::Triplet<double>> trip;
  std::size_t steps = 0;
  for (;;) {
    // Centering by damped Newton.
    int centering = 0;
    bool stalled = false;
    for (;;) {
      if (steps >= budget) {
        best.iterations = steps;
        throw BudgetExceeded("interior point did not certify within budget (gap " +
                                 std::to_string(best.zeta - best.lower_bound) + ")",
                             best);
      }
      ++steps;
      Vec grad = Vec::Zero(nvar);
      trip.clear();
      for (std::size_t s = 0; s < cs.layout.sites; ++s) {
        const auto si = static_cast<Eigen::Index>(s);
        const Eigen::Index r = cs.layout.value_row(s);
        for (Eigen::Index j = 0; j < m; ++j) {
          grad(var(r, j)) += -2.0 * t * data.mu(si) * (data.targets(j, si) - x(r, j));
          trip.emplace_back(var(r, j), var(r, j), 2.0 * t * data.mu(si));
        }
      }
      for (const Constraint& c : cs.constraints) {
        const Vec sv = c.apply(x);
        const double slack = c.beta - sv.squaredNorm();
        const std::size_t k = c.index.size();
        for (std::size_t a = 0; a < k; ++a)
          for (Eigen::Index j = 0; j < m; ++j) grad(var(c.index[a], j)) += 2.0 * c.coeff[a] * sv(j) / slack;
        for (std::size_t a = 0; a < k; ++a)
          for (std::size_t b = 0; b < k; ++b)
            for (Eigen::Index j = 0; j < m; ++j)
              for (Eigen::Index l = 0; l < m; ++l) {
                double h = 4.0 * c.coeff[a] * c.coeff[b] * sv(j) * sv(l) / (slack * slack);
                if (j == l) h += 2.0 * c.coeff[a] * c.coeff[b] / slack;
                trip.emplace_back(var(c.index[a], j), var(c.index[b], l), h);
              }
      }
      Eigen::SparseMatrix<double> hess(nvar, nvar);
      hess.setFromTriplets(trip.begin(), trip.end());
      if (!analyzed) {
        llt.analyzePattern(hess);
        analyzed = true;
      }
      llt.factorize(hess);
      if (llt.info() != Eigen::Success) throw Error(ErrorCode::NoConvergence, "barrier Hessian factorization failed");
      const Vec step = llt.solve(-grad);
      const double decrement2 = -grad.dot(step);
      if (decrement2 / 2 <= 1e-10) break;
      const Mat dir = Eigen::Map<const Mat>(step.data(), m, dim).transpose();
      // Armijo backtracking first; when round-off defeats the merit comparison, fall back to the
      // damped step 1 / (1 + decrement), which a self-concordant barrier guarantees to be safe.
      const double f0 = merit(x, t);
      bool moved = false;
      double alpha = 1.0;
      for (int h = 0; h < 30 && !moved; ++h, alpha *= 0.5)
        if (merit(x + alpha * dir, t) <= f0 - 0.25 * alpha * decrement2) {
          x += alpha * dir;
          moved = true;
        }
      alpha = 1.0 / (1.0 + std::sqrt(std::max(decrement2, 0.0)));
      for (int h = 0; h < 60 && !moved; ++h, alpha *= 0.5)
        if (std::isfinite(merit(x + alpha * dir, t))) {
          x += alpha * dir;
          moved = true;
        }
      if (!moved || ++centering >= 100) {
        stalled = true;
        break;
      }
    }
    const double z = objective(x, cs.layout, data);
    if (z < best.zeta) {
      best.x = x;
      best.zeta = z;
    }
    best.lower_bound = std::max(best.lower_bound, lagrangian_lower_bound(data, cs, multipliers(x, t)));
    if (best.zeta - best.lower_bound <= tolerance) break;
    // Barrier multipliers lose accuracy once centering is limited by round-off; refit them at x.
    if (stalled || t * tolerance > 1e3 * static_cast<double>(nc))
      best.lower_bound = std::max(best.lower_bound, lagrangian_lower_bound(data, cs, estimate_multipliers(data, cs, x)));
    if (best.zeta - best.lower_bound <= tolerance) break;
    t *= 10.0;
  }
  best.iterations = steps;
  return best;
}

SolverResult projected_gradient(const SketchedData& data, const ConstraintSet& cs, double tolerance,
                                std::size_t budget) {
  const Eigen::Index dim = cs.layout.rows(), m = data.targets.rows();
  const double lip = 2.0 * std::max(data.mu.maxCoeff(), 1e-300);
  Certifier cert{data, cs, {}, false};
  cert.best.lower_bound = -std::numeric_limits<double>::infinity();
  Mat x = Mat::Zero(dim, m), prev = x;
  if (cert.offer(x, tolerance, true)) {
    cert.best.iterations = 0;
    return cert.best;
  }
  Dykstra dyk(cs, m);
  double t = 1.0;
  double f_prev = objective(x, cs.layout, data);
  std::size_t next_check = 10;
  for (std::size_t it = 1; it <= budget; ++it) {
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const Mat y = x + ((t - 1.0) / t_next) * (x - prev);
    const Mat p = y - objective_gradient(y, cs.layout, data) / lip;
    Mat next = dyk.project(p, it == 1 ? 2000 : 200);
    const double f_next = objective(next, cs.layout, data);
    prev = x;
    x = std::move(next);
    t = t_next;
    if (f_next > f_prev) t = 1.0;  // adaptive restart of the momentum
    f_prev = f_next;
    const bool check = it == next_check || it == budget;
    if (check) next_check += std::max<std::size_t>(10, it / 4);
    if (check && cert.offer(scale_into_feasible(cs, x), tolerance, true, &x)) {
      cert.best.iterations = it;
      return cert.best;
    }
  }
  cert.best.iterations = budget;
  throw BudgetExceeded("projected gradient did not certify within budget (gap " +
                           std::to_string(cert.best.zeta - cert.best.lower_bound) + ")",
                       cert.best);
}

/// Analytic center of {y : A y < b} by damped Newton from a strictly interior point.
Vec analytic_center(const Mat& a, const Vec& b, Vec y) {
  for (int it = 0; it < 100; ++it) {
    const Vec slack = b - a * y;
    const Vec inv = slack.cwiseInverse();
    const Vec grad = a.transpose() * inv;
    const Mat hess = a.transpose() * inv.cwiseAbs2().asDiagonal() * a;
    const Vec step = hess.ldlt().solve(-grad);
    const double decrement = std::sqrt(std::max(0.0, -grad.dot(step)));
    if (decrement < 1e-9) break;
    double tstep = decrement > 0.25 ? 1.0 / (1.0 + decrement) : 1.0;
    const Vec as = a * step;
    // Guard strict feasibility.
    for (Eigen::Index k = 0; k < as.size(); ++k)
      if (as(k) > 0) tstep = std::min(tstep, 0.99 * slack(k) / as(k));
    y += tstep * step;
  }
  return y;
}

SolverResult cutting_plane(const SketchedData& data, const ConstraintSet& cs, double tolerance,
                           std::size_t budget) {
  const Eigen::Index dim = cs.layout.rows(), m = data.targets.rows();
  const Eigen::Index nvar = dim * m;
  // Every coordinate is bounded by M through the coefficient constraints.
  const double box = 1.1 * cs.M;
  Mat a(2 * nvar, nvar);
  a << Mat::Identity(nvar, nvar), -Mat::Identity(nvar, nvar);
  Vec b = Vec::Constant(2 * nvar, box);
  Vec y = Vec::Zero(nvar);
  Certifier cert{data, cs, {}, false};
  cert.best.lower_bound = -std::numeric_limits<double>::infinity();
  cert.best.used = SolverKind::CuttingPlane;
  if (cert.offer(Mat::Zero(dim, m), tolerance, true)) return cert.best;
  std::size_t feasible_seen = 0;
  for (std::size_t it = 1; it <= budget; ++it) {
    const Mat x = Eigen::Map<const Mat>(y.data(), dim, m);
    const OracleAnswer ans = separation_oracle(cs, x);
    Vec cut;
    if (!ans.feasible) {
      cut = -Eigen::Map<const Vec>(ans.normal.data(), nvar);
    } else {
      ++feasible_seen;
      if (cert.offer(x, tolerance, feasible_seen % 5 == 0)) {
        cert.best.iterations = it;
        return cert.best;
      }
      const Mat g = objective_gradient(x, cs.layout, data);
      cut = Eigen::Map<const Vec>(g.data(), nvar);
      if (cut.norm() < 1e-300) {
        cert.offer(x, tolerance, true);
        cert.best.iterations = it;
        return cert.best;
      }
    }
    // Central cut through y; step inside the Dikin ellipsoid before recentering.
    const Vec slack = b - a * y;
    const Mat hess = a.transpose() * slack.cwiseInverse().cwiseAbs2().asDiagonal() * a;
    const Vec hinv_a = hess.ldlt().solve(cut);
    const double norm = std::sqrt(std::max(cut.dot(hinv_a), 1e-300));
    const double rhs = cut.dot(y);
    a.conservativeResize(a.rows() + 1, Eigen::NoChange);
    a.row(a.rows() - 1) = cut.transpose();
    b.conservativeResize(b.size() + 1);
    b(b.size() - 1) = rhs;
    y = analytic_center(a, b, y - 0.5 * hinv_a / norm);
  }
  if (cert.has_best) cert.offer(cert.best.x, tolerance, true);
  cert.best.iterations = budget;
  throw BudgetExceeded("cutting plane did not certify within budget (gap " +
                           std::to_string(cert.best.zeta - cert.best.lower_bound) + ")",
                       cert.best);
}

}  // namespace

SolverResult minimize_section(const SketchedData& data, const ConstraintSet& cs, double tolerance,
                              std::size_t budget, SolverKind kind) {
  if (static_cast<Eigen::Index>(cs.layout.sites) != data.reps.cols())
    throw Error(ErrorCode::SiteMismatch, "constraint sites differ from sketch reps");
  if (!(tolerance > 0)) throw Error(ErrorCode::InvalidArgument, "solver tolerance must be positive");
  SolverResult out;
  switch (kind) {
    case SolverKind::InteriorPoint: out = interior_point(data, cs, tolerance, budget); break;
    case SolverKind::CuttingPlane: out = cutting_plane(data, cs, tolerance, budget); break;
    case SolverKind::ProjectedGradient: out = projected_gradient(data, cs, tolerance, budget); break;
  }
  out.used = kind;
  return out;
}

}  // namespace mnfd
