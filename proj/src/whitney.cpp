#include "mnfd/whitney.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mnfd/bump.hpp"
#include "mnfd/error.hpp"

namespace mnfd {

Jet2 Jet2::zero(Eigen::Index d, Eigen::Index m) {
  Jet2 j;
  j.value = Vec::Zero(m);
  j.gradient = Mat::Zero(m, d);
  j.hessian.assign(static_cast<std::size_t>(m), Mat::Zero(d, d));
  return j;
}

Vec Jet2::eval(const Eigen::Ref<const Vec>& site, const Eigen::Ref<const Vec>& x) const {
  const Vec delta = x - site;
  Vec out = value + gradient * delta;
  for (std::size_t c = 0; c < hessian.size(); ++c)
    out(static_cast<Eigen::Index>(c)) += 0.5 * delta.dot(hessian[c] * delta);
  return out;
}

Mat Jet2::jacobian(const Eigen::Ref<const Vec>& site, const Eigen::Ref<const Vec>& x) const {
  const Vec delta = x - site;
  Mat jac = gradient;
  for (std::size_t c = 0; c < hessian.size(); ++c)
    jac.row(static_cast<Eigen::Index>(c)) += (hessian[c] * delta).transpose();
  return jac;
}

Eigen::Index FieldLayout::hess_row(std::size_t s, Eigen::Index k, Eigen::Index l) const {
  if (k > l) std::swap(k, l);
  return value_row(s) + 1 + d + k * d - k * (k - 1) / 2 + (l - k);
}

Mat flatten(const WhitneyField& field) {
  const FieldLayout layout{field.size(), field.d()};
  const Eigen::Index d = field.d(), m = field.m();
  Mat x = Mat::Zero(layout.rows(), m);
  for (std::size_t s = 0; s < field.size(); ++s) {
    const Jet2& j = field.jets[s];
    x.row(layout.value_row(s)) = j.value.transpose();
    for (Eigen::Index k = 0; k < d; ++k) {
      x.row(layout.grad_row(s, k)) = j.gradient.col(k).transpose();
      for (Eigen::Index l = k; l < d; ++l)
        for (Eigen::Index c = 0; c < m; ++c) x(layout.hess_row(s, k, l), c) = j.hessian[static_cast<std::size_t>(c)](k, l);
    }
  }
  return x;
}

WhitneyField unflatten(const Mat& sites, const Mat& x) {
  const FieldLayout layout{static_cast<std::size_t>(sites.cols()), sites.rows()};
  if (x.rows() != layout.rows()) throw Error(ErrorCode::DimensionMismatch, "flattened field size");
  const Eigen::Index d = layout.d, m = x.cols();
  WhitneyField field;
  field.sites = sites;
  for (std::size_t s = 0; s < layout.sites; ++s) {
    Jet2 j = Jet2::zero(d, m);
    j.value = x.row(layout.value_row(s)).transpose();
    for (Eigen::Index k = 0; k < d; ++k) {
      j.gradient.col(k) = x.row(layout.grad_row(s, k)).transpose();
      for (Eigen::Index l = k; l < d; ++l)
        for (Eigen::Index c = 0; c < m; ++c) {
          const double h = x(layout.hess_row(s, k, l), c);
          j.hessian[static_cast<std::size_t>(c)](k, l) = h;
          j.hessian[static_cast<std::size_t>(c)](l, k) = h;
        }
    }
    field.jets.push_back(std::move(j));
  }
  return field;
}

SketchedData sketch(const Mat& points, const Mat& values, double eps_bar, const Vec* weights) {
  if (points.cols() == 0) throw Error(ErrorCode::EmptyInput, "sketch of empty data");
  if (values.cols() != points.cols()) throw Error(ErrorCode::DimensionMismatch, "points and values differ in count");
  if (!(eps_bar > 0)) throw Error(ErrorCode::InvalidArgument, "eps_bar must be positive");
  const Eigen::Index n_pts = points.cols();
  if (weights && (weights->size() != n_pts || !(weights->minCoeff() >= 0) || !(weights->sum() > 0)))
    throw Error(ErrorCode::InvalidArgument, "sketch weights must be nonnegative with positive sum");
  const auto weight = [&](Eigen::Index i) { return weights ? (*weights)(i) : 1.0; };
  const double total = weights ? weights->sum() : static_cast<double>(n_pts);
  std::vector<Eigen::Index> rep_index;
  std::vector<std::vector<Eigen::Index>> groups;
  SketchedData out;
  out.assignment.resize(static_cast<std::size_t>(n_pts));
  const double e2 = eps_bar * eps_bar;
  for (Eigen::Index i = 0; i < n_pts; ++i) {
    std::size_t found = rep_index.size();
    for (std::size_t r = 0; r < rep_index.size(); ++r)
      if ((points.col(rep_index[r]) - points.col(i)).squaredNorm() < e2) {
        found = r;
        break;
      }
    if (found == rep_index.size()) {
      rep_index.push_back(i);
      groups.emplace_back();
    }
    groups[found].push_back(i);
    out.assignment[static_cast<std::size_t>(i)] = found;
  }
  const auto k = static_cast<Eigen::Index>(rep_index.size());
  out.reps.resize(points.rows(), k);
  out.mu.resize(k);
  out.targets.resize(values.rows(), k);
  for (Eigen::Index r = 0; r < k; ++r) {
    const auto& g = groups[static_cast<std::size_t>(r)];
    out.reps.col(r) = points.col(rep_index[static_cast<std::size_t>(r)]);
    double mass = 0;
    Vec mean = Vec::Zero(values.rows());
    for (Eigen::Index i : g) {
      mass += weight(i);
      mean += weight(i) * values.col(i);
    }
    out.mu(r) = mass / total;
    out.targets.col(r) = mass > 0 ? Vec(mean / mass) : Vec(values.col(g.front()));
  }
  return out;
}

Vec Constraint::apply(const Mat& x) const {
  Vec s = Vec::Zero(x.cols());
  for (std::size_t t = 0; t < index.size(); ++t) s += coeff[t] * x.row(index[t]).transpose();
  return s;
}

double default_compat_radius(const Mat& sites) {
  double worst = 0;
  for (Eigen::Index a = 0; a < sites.cols(); ++a) {
    double nearest = std::numeric_limits<double>::infinity();
    for (Eigen::Index b = 0; b < sites.cols(); ++b)
      if (a != b) nearest = std::min(nearest, (sites.col(a) - sites.col(b)).norm());
    if (std::isfinite(nearest)) worst = std::max(worst, nearest);
  }
  return 4.0 * worst;
}

ConstraintSet build_constraints(const Mat& sites, double M, double compat_radius) {
  if (!(M > 0)) throw Error(ErrorCode::InvalidArgument, "C2 budget M must be positive");
  const auto k_sites = static_cast<std::size_t>(sites.cols());
  if (k_sites == 0) throw Error(ErrorCode::EmptyInput, "no sites");
  for (Eigen::Index a = 0; a < sites.cols(); ++a)
    for (Eigen::Index b = a + 1; b < sites.cols(); ++b)
      if ((sites.col(a) - sites.col(b)).norm() <= 1e-14)
        throw Error(ErrorCode::DuplicateSites, "sites " + std::to_string(a) + " and " + std::to_string(b) + " coincide");
  ConstraintSet cs;
  cs.layout = FieldLayout{k_sites, sites.rows()};
  cs.M = M;
  cs.compat_radius = compat_radius >= 0 ? compat_radius : default_compat_radius(sites);
  const Eigen::Index d = sites.rows();
  const double cw = cs.taylor_constant;
  for (std::size_t s = 0; s < k_sites; ++s)
    for (Eigen::Index r = 0; r < cs.layout.per_site(); ++r) {
      Constraint c;
      c.index = {cs.layout.value_row(s) + r};
      c.coeff = {1.0};
      c.beta = M * M;
      c.site_a = c.site_b = s;
      cs.constraints.push_back(std::move(c));
    }
  if (k_sites == 1) return cs;
  for (std::size_t a = 0; a < k_sites; ++a)
    for (std::size_t b = 0; b < k_sites; ++b) {
      if (a == b) continue;
      const Vec delta = sites.col(static_cast<Eigen::Index>(b)) - sites.col(static_cast<Eigen::Index>(a));
      const double dist = delta.norm();
      if (dist > cs.compat_radius) continue;
      // P_a(b) - P_b(b)
      Constraint val;
      val.kind = ConstraintKind::TaylorValue;
      val.site_a = a;
      val.site_b = b;
      val.beta = std::pow(cw * M * dist * dist, 2);
      val.index.push_back(cs.layout.value_row(a));
      val.coeff.push_back(1.0);
      for (Eigen::Index k = 0; k < d; ++k) {
        val.index.push_back(cs.layout.grad_row(a, k));
        val.coeff.push_back(delta(k));
        for (Eigen::Index l = k; l < d; ++l) {
          val.index.push_back(cs.layout.hess_row(a, k, l));
          val.coeff.push_back(k == l ? 0.5 * delta(k) * delta(k) : delta(k) * delta(l));
        }
      }
      val.index.push_back(cs.layout.value_row(b));
      val.coeff.push_back(-1.0);
      cs.constraints.push_back(std::move(val));
      // d/dx_k of P_a(b) - P_b(b)
      for (Eigen::Index k = 0; k < d; ++k) {
        Constraint g;
        g.kind = ConstraintKind::TaylorGradient;
        g.site_a = a;
        g.site_b = b;
        g.beta = std::pow(cw * M * dist, 2);
        g.index.push_back(cs.layout.grad_row(a, k));
        g.coeff.push_back(1.0);
        for (Eigen::Index l = 0; l < d; ++l) {
          g.index.push_back(cs.layout.hess_row(a, k, l));
          g.coeff.push_back(delta(l));
        }
        g.index.push_back(cs.layout.grad_row(b, k));
        g.coeff.push_back(-1.0);
        cs.constraints.push_back(std::move(g));
      }
    }
  return cs;
}

double max_violation_ratio(const ConstraintSet& cs, const Mat& x) {
  double worst = 0;
  for (const Constraint& c : cs.constraints) worst = std::max(worst, c.apply(x).squaredNorm() / c.beta);
  return worst;
}

Mat scale_into_feasible(const ConstraintSet& cs, const Mat& x) {
  double t = 1.0;
  for (const Constraint& c : cs.constraints) {
    const double norm = c.apply(x).norm();
    if (norm > std::sqrt(c.beta)) t = std::min(t, std::sqrt(c.beta) / norm);
  }
  if (t < 1.0) t *= 1.0 - 1e-14;
  return t * x;
}

Mat polish_jets(const ConstraintSet& cs, const Mat& x) {
  const FieldLayout& layout = cs.layout;
  if (x.rows() != layout.rows()) throw Error(ErrorCode::DimensionMismatch, "field size differs from constraints");
  const Eigen::Index per = layout.per_site(), free_per = per - 1;
  const Eigen::Index nfree = static_cast<Eigen::Index>(layout.sites) * free_per;
  if (nfree == 0) return x;
  const auto free_col = [&](Eigen::Index row) {
    const Eigen::Index s = row / per, r = row % per;
    return r == 0 ? Eigen::Index(-1) : s * free_per + r - 1;
  };
  std::vector<const Constraint*> rows;
  for (const Constraint& c : cs.constraints)
    if (c.kind != ConstraintKind::CoefficientBound) rows.push_back(&c);
  // Normal equations of the beta-weighted residuals plus a small ridge for undetermined jets.
  Mat ata = Mat::Zero(nfree, nfree);
  Mat atb = Mat::Zero(nfree, x.cols());
  for (const Constraint* c : rows) {
    const double w = 1.0 / c->beta;
    Vec fixed = Vec::Zero(x.cols());
    std::vector<std::pair<Eigen::Index, double>> terms;
    for (std::size_t t = 0; t < c->index.size(); ++t) {
      const Eigen::Index col = free_col(c->index[t]);
      if (col < 0)
        fixed += c->coeff[t] * x.row(c->index[t]).transpose();
      else
        terms.emplace_back(col, c->coeff[t]);
    }
    for (const auto& [a, ca] : terms) {
      for (const auto& [b, cb] : terms) ata(a, b) += w * ca * cb;
      atb.row(a) -= w * ca * fixed.transpose();
    }
  }
  const double ridge = 1e-10 * std::max(1.0, ata.diagonal().maxCoeff()) / (cs.M * cs.M);
  ata.diagonal().array() += ridge;
  const Mat sol = ata.ldlt().solve(atb);
  Mat target = x;
  for (Eigen::Index row = 0; row < x.rows(); ++row) {
    const Eigen::Index col = free_col(row);
    if (col >= 0) target.row(row) = sol.row(col);
  }
  return max_violation_ratio(cs, target) <= 1.0 ? target : x;
}

double objective(const Mat& x, const FieldLayout& layout, const SketchedData& data) {
  if (static_cast<Eigen::Index>(layout.sites) != data.reps.cols())
    throw Error(ErrorCode::SiteMismatch, "field and sketch have different site counts");
  double total = 0;
  for (std::size_t s = 0; s < layout.sites; ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    total += data.mu(si) * (data.targets.col(si) - x.row(layout.value_row(s)).transpose()).squaredNorm();
  }
  return total;
}

double objective(const WhitneyField& field, const SketchedData& data) {
  if (static_cast<Eigen::Index>(field.size()) != data.reps.cols() ||
      (field.sites - data.reps).cwiseAbs().maxCoeff() > 0)
    throw Error(ErrorCode::SiteMismatch, "field sites differ from sketch reps");
  double total = 0;
  for (std::size_t s = 0; s < field.size(); ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    total += data.mu(si) * (data.targets.col(si) - field.jets[s].value).squaredNorm();
  }
  return total;
}

Mat objective_gradient(const Mat& x, const FieldLayout& layout, const SketchedData& data) {
  Mat g = Mat::Zero(x.rows(), x.cols());
  for (std::size_t s = 0; s < layout.sites; ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    const Eigen::Index r = layout.value_row(s);
    g.row(r) = -2.0 * data.mu(si) * (data.targets.col(si).transpose() - x.row(r));
  }
  return g;
}

OracleAnswer separation_oracle(const ConstraintSet& cs, const Mat& x) {
  if (x.rows() != cs.layout.rows()) throw Error(ErrorCode::DimensionMismatch, "field size differs from constraints");
  OracleAnswer ans;
  double worst = 1.0;
  for (std::size_t i = 0; i < cs.constraints.size(); ++i) {
    const double ratio = cs.constraints[i].apply(x).squaredNorm() / cs.constraints[i].beta;
    if (ratio > worst) {
      worst = ratio;
      ans.feasible = false;
      ans.constraint = i;
    }
  }
  if (ans.feasible) return ans;
  const Constraint& c = cs.constraints[ans.constraint];
  const Vec s = c.apply(x);
  ans.normal = Mat::Zero(x.rows(), x.cols());
  for (std::size_t t = 0; t < c.index.size(); ++t) ans.normal.row(c.index[t]) -= c.coeff[t] * s.transpose();
  ans.offset = s.squaredNorm();
  return ans;
}

WhitneyExtension::WhitneyExtension(WhitneyField field, double rho) : field_(std::move(field)), rho_(rho) {
  if (field_.size() == 0) throw Error(ErrorCode::EmptyInput, "extension of an empty field");
  if (!(rho_ > 0)) throw Error(ErrorCode::InvalidArgument, "extension radius must be positive");
}

Vec WhitneyExtension::value(const Eigen::Ref<const Vec>& x) const { return value_jacobian(x, nullptr); }

Vec WhitneyExtension::value_jacobian(const Eigen::Ref<const Vec>& x, Mat* jac) const {
  const Eigen::Index d = field_.d(), m = field_.m();
  if (field_.size() == 1) {
    if (jac) *jac = field_.jets[0].jacobian(field_.sites.col(0), x);
    return field_.jets[0].eval(field_.sites.col(0), x);
  }
  double den = 0;
  Vec g_den = Vec::Zero(d);
  Vec num = Vec::Zero(m);
  Mat j_num = Mat::Zero(m, d);
  std::size_t nearest = 0;
  double nearest_dist = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < field_.size(); ++s) {
    const Vec site = field_.sites.col(static_cast<Eigen::Index>(s));
    const Vec delta = x - site;
    const double dist = delta.norm();
    if (dist < nearest_dist) {
      nearest_dist = dist;
      nearest = s;
    }
    const Profile h = bump_profile(dist / rho_);
    if (h.value <= 0) continue;
    const Vec p = field_.jets[s].eval(site, x);
    const Vec g_theta = dist > 0 ? Vec(h.d1 / (rho_ * dist) * delta) : Vec(Vec::Zero(d));
    den += h.value;
    g_den += g_theta;
    num += h.value * p;
    if (jac) j_num += p * g_theta.transpose() + h.value * field_.jets[s].jacobian(site, x);
  }
  if (!(den > 0)) {
    // No bump reaches x: fall back to the nearest site's Taylor polynomial.
    const Vec site = field_.sites.col(static_cast<Eigen::Index>(nearest));
    if (jac) *jac = field_.jets[nearest].jacobian(site, x);
    return field_.jets[nearest].eval(site, x);
  }
  const Vec f = num / den;
  if (jac) *jac = (j_num - f * g_den.transpose()) / den;
  return f;
}

C2Norm c2_norm_on(const WhitneyExtension& ext, const Mat& points) {
  C2Norm out;
  const Eigen::Index d = points.rows();
  const double h = 1e-5 * std::max(1.0, ext.rho());
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    Mat jac;
    const Vec x = points.col(i);
    out.value = std::max(out.value, ext.value_jacobian(x, &jac).norm());
    for (Eigen::Index k = 0; k < d; ++k) out.first = std::max(out.first, jac.col(k).norm());
    for (Eigen::Index l = 0; l < d; ++l) {
      Vec xp = x, xm = x;
      xp(l) += h;
      xm(l) -= h;
      Mat jp, jm;
      ext.value_jacobian(xp, &jp);
      ext.value_jacobian(xm, &jm);
      const Mat second = (jp - jm) / (2 * h);
      for (Eigen::Index k = 0; k < d; ++k) out.second = std::max(out.second, second.col(k).norm());
    }
  }
  return out;
}

double max_jet_coefficient(const WhitneyField& field) {
  double worst = 0;
  const Mat x = flatten(field);
  for (Eigen::Index r = 0; r < x.rows(); ++r) worst = std::max(worst, x.row(r).norm());
  return worst;
}

}  // namespace mnfd
