#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mnfd/types.hpp"

namespace mnfd {

/// Second-order jet of a map R^d -> R^m: value, gradient (m x d), one symmetric d x d Hessian per component.
struct Jet2 {
  Vec value;
  Mat gradient;
  std::vector<Mat> hessian;

  static Jet2 zero(Eigen::Index d, Eigen::Index m);
  /// Taylor polynomial at `site` evaluated at x, and its Jacobian there.
  Vec eval(const Eigen::Ref<const Vec>& site, const Eigen::Ref<const Vec>& x) const;
  Mat jacobian(const Eigen::Ref<const Vec>& site, const Eigen::Ref<const Vec>& x) const;
};

struct WhitneyField {
  Mat sites;  ///< d x K
  std::vector<Jet2> jets;

  Eigen::Index d() const { return sites.rows(); }
  Eigen::Index m() const { return jets.empty() ? 0 : jets.front().value.size(); }
  std::size_t size() const { return jets.size(); }
};

/// Flattened scalar coordinates: per site, value, d gradient entries, then the
/// upper triangle of the Hessian row by row. One column per component.
struct FieldLayout {
  std::size_t sites = 0;
  Eigen::Index d = 0;

  Eigen::Index per_site() const { return 1 + d + d * (d + 1) / 2; }
  Eigen::Index rows() const { return static_cast<Eigen::Index>(sites) * per_site(); }
  Eigen::Index value_row(std::size_t s) const { return static_cast<Eigen::Index>(s) * per_site(); }
  Eigen::Index grad_row(std::size_t s, Eigen::Index k) const { return value_row(s) + 1 + k; }
  Eigen::Index hess_row(std::size_t s, Eigen::Index k, Eigen::Index l) const;
};

Mat flatten(const WhitneyField& field);
WhitneyField unflatten(const Mat& sites, const Mat& x);

struct SketchedData {
  Mat reps;     ///< d x K
  Vec mu;       ///< K
  Mat targets;  ///< m x K
  std::vector<std::size_t> assignment;
};

/// Greedy grouping of `points` (d x N) within eps_bar of the first-found representative;
/// `values` is m x N. Optional per-point weights give weighted group masses and means.
SketchedData sketch(const Mat& points, const Mat& values, double eps_bar, const Vec* weights = nullptr);

enum class ConstraintKind { CoefficientBound, TaylorValue, TaylorGradient };

/// sum over components of (alpha . x_component)^2 <= beta.
struct Constraint {
  std::vector<Eigen::Index> index;
  std::vector<double> coeff;
  double beta = 0;
  ConstraintKind kind = ConstraintKind::CoefficientBound;
  std::size_t site_a = 0;
  std::size_t site_b = 0;

  /// alpha^T x as an m-vector.
  Vec apply(const Mat& x) const;
};

struct ConstraintSet {
  FieldLayout layout;
  std::vector<Constraint> constraints;
  double M = 0;
  double compat_radius = 0;
  double taylor_constant = 3.0;
};

/// Default Taylor-compatibility radius: four times the largest nearest-neighbor distance.
double default_compat_radius(const Mat& sites);

ConstraintSet build_constraints(const Mat& sites, double M, double compat_radius = -1);

/// Largest ratio ||alpha^T x||^2 / beta over all constraints.
double max_violation_ratio(const ConstraintSet& cs, const Mat& x);

/// Scales x toward 0 until every constraint holds (K-bar is convex and contains 0).
Mat scale_into_feasible(const ConstraintSet& cs, const Mat& x);

/// Refits the gradient and Hessian rows of x to the Taylor-compatibility equations by
/// least squares with the values held fixed. Returns the refit when it is feasible and x
/// otherwise, so values, and hence the objective, are unchanged.
Mat polish_jets(const ConstraintSet& cs, const Mat& x);

double objective(const Mat& x, const FieldLayout& layout, const SketchedData& data);
double objective(const WhitneyField& field, const SketchedData& data);
Mat objective_gradient(const Mat& x, const FieldLayout& layout, const SketchedData& data);

/// Either feasible, or the most violated constraint with the functional
/// s(y) = <normal, y> + offset, which vanishes at x, is positive on K-bar and at 0,
/// and negative at t x for t > 1.
struct OracleAnswer {
  bool feasible = true;
  std::size_t constraint = 0;
  Mat normal;
  double offset = 0;

  double operator()(const Mat& y) const { return (normal.array() * y.array()).sum() + offset; }
};

OracleAnswer separation_oracle(const ConstraintSet& cs, const Mat& x);

/// Partition-of-unity blend of the jets' Taylor polynomials with bump radius rho.
class WhitneyExtension {
 public:
  WhitneyExtension() = default;
  WhitneyExtension(WhitneyField field, double rho);

  Vec value(const Eigen::Ref<const Vec>& x) const;
  /// Returns the value and writes the m x d Jacobian.
  Vec value_jacobian(const Eigen::Ref<const Vec>& x, Mat* jac) const;
  const WhitneyField& field() const { return field_; }
  double rho() const { return rho_; }

 private:
  WhitneyField field_;
  double rho_ = 1;
};

/// Largest |value|, |first| and |second| partial (vector norm over components) on the given points.
struct C2Norm {
  double value = 0;
  double first = 0;
  double second = 0;
  double max() const { return std::max(value, std::max(first, second)); }
};

C2Norm c2_norm_on(const WhitneyExtension& ext, const Mat& points);

/// Largest coefficient norm of any jet entry (the section norm proxy).
double max_jet_coefficient(const WhitneyField& field);

}  // namespace mnfd
