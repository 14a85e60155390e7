#include "mnfd/sections.hpp"

#include <cmath>

#include "mnfd/bump.hpp"

namespace mnfd {

Vec LocalSection::offset(const Eigen::Ref<const Vec>& a, Mat* jacobian) const {
  if (empty) throw Error(ErrorCode::EmptyInput, "evaluating an empty section");
  const Vec u = a / tau_bar;
  return tau_bar * extension.value_jacobian(u, jacobian);
}

LocalSection fit_local_section(const CylinderPacket& packet, std::size_t index, const PointCloud& cloud,
                               const SectionOptions& options) {
  if (index >= packet.size()) throw Error(ErrorCode::InvalidArgument, "cylinder index out of range");
  if (cloud.dim() != packet.n()) throw Error(ErrorCode::DimensionMismatch, "cloud and packet dimensions differ");
  const Cylinder& cyl = packet.cylinder(index);
  const Eigen::Index d = packet.d(), m = packet.n() - d;
  const double tb = packet.tau_bar();
  LocalSection out;
  out.cylinder = index;
  out.tau_bar = tb;
  out.M = options.norm_factor * tb / packet.tau();

  std::vector<Eigen::Index> inside;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec w = cyl.to_local(cloud.point(i));
    if (w.head(d).norm() <= tb && w.tail(m).norm() <= tb) inside.push_back(static_cast<Eigen::Index>(i));
  }
  out.points = inside.size();
  if (inside.empty()) return out;

  const auto count = static_cast<Eigen::Index>(inside.size());
  Mat u(d, count), y(m, count);
  Vec weights(count);
  for (Eigen::Index k = 0; k < count; ++k) {
    const Vec w = cyl.to_local(cloud.points().col(inside[static_cast<std::size_t>(k)])) / tb;
    u.col(k) = w.head(d);
    y.col(k) = w.tail(m);
    weights(k) = cloud.weights()(inside[static_cast<std::size_t>(k)]);
  }
  const SketchedData data = sketch(u, y, options.eps_bar, &weights);
  const ConstraintSet cs = build_constraints(data.reps, out.M);
  SolverResult result;
  try {
    result = minimize_section(data, cs, options.solver_tolerance, options.budget, options.solver);
    out.certified = true;
  } catch (const BudgetExceeded& e) {
    result = e.best();
  }
  out.zeta = result.zeta;
  out.lower_bound = result.lower_bound;
  out.iterations = result.iterations;
  out.field = unflatten(data.reps, polish_jets(cs, result.x));
  const double spacing = data.reps.cols() > 1 ? default_compat_radius(data.reps) / 4.0 : 0.0;
  out.extension = WhitneyExtension(out.field, std::max(2.0 * options.eps_bar, 2.0 * spacing));
  out.empty = false;
  return out;
}

SectionModel::SectionModel(const CylinderPacket& packet, std::vector<LocalSection> sections)
    : packet_(packet), sections_(std::move(sections)) {
  if (sections_.size() != packet_.size()) throw Error(ErrorCode::DimensionMismatch, "one section per cylinder");
}

double SectionModel::max_coefficient() const {
  double worst = 0;
  for (const LocalSection& s : sections_)
    if (!s.empty) worst = std::max(worst, max_jet_coefficient(s.field));
  return worst;
}

SectionModel fit_sections(const CylinderPacket& packet, const PointCloud& cloud, const SectionOptions& options) {
  std::vector<LocalSection> sections;
  sections.reserve(packet.size());
  for (std::size_t j = 0; j < packet.size(); ++j) sections.push_back(fit_local_section(packet, j, cloud, options));
  return SectionModel(packet, std::move(sections));
}

PartitionWeights partition_weights(const CylinderPacket& packet, const Eigen::Ref<const Vec>& x,
                                   const std::vector<bool>* usable) {
  const double tb = packet.tau_bar();
  const Eigen::Index d = packet.d();
  PartitionWeights out;
  double total = 0;
  for (std::size_t j : packet.near(x, std::sqrt(2.0) * tb * (1 + 1e-12))) {
    if (usable && !(*usable)[j]) continue;
    const Vec w = packet.cylinder(j).to_local(x);
    if (w.head(d).norm() > tb || w.tail(w.size() - d).norm() > tb) continue;
    const double theta = bump_value(w.head(d) / tb);
    if (theta <= 0) continue;
    out.cylinders.push_back(j);
    out.weights.push_back(theta);
    total += theta;
  }
  if (!(total > 0)) throw Error(ErrorCode::ZeroDenominator, "no cylinder covers the point");
  for (double& w : out.weights) w /= total;
  return out;
}

namespace {

/// Fiber vector from x to the graph of section j along the fiber at the chart.
Vec section_in_fiber(const SectionModel& model, std::size_t j, const BundleChart& chart, const Mat& tangent) {
  const Cylinder& cyl = model.packet().cylinder(j);
  const LocalSection& sec = model.section(j);
  const Eigen::Index d = model.packet().d(), n = model.packet().n();
  const Vec& x = chart.base_point;
  Vec a = cyl.to_local(x).head(d);
  Vec w(n);
  for (int it = 0; it < 50; ++it) {
    Mat jac;
    w << a, sec.offset(a, &jac);
    const Vec rel = cyl.to_ambient(w) - x;
    const Vec g = tangent.transpose() * rel;
    if (g.norm() <= 1e-13 * std::max(1.0, x.norm())) return chart.projector_hi * rel;
    Mat lift(n, d);
    lift << Mat::Identity(d, d), jac;
    const Mat jg = tangent.transpose() * cyl.rotation * lift;
    const Eigen::FullPivLU<Mat> lu(jg);
    if (!lu.isInvertible()) throw Error(ErrorCode::Degenerate, "section graph tangent to the fiber");
    a -= lu.solve(g);
  }
  throw Error(ErrorCode::NoConvergence, "fiber intersection with a local section did not converge");
}

}  // namespace

Vec global_section(const SectionModel& model, const BundleChart& chart) {
  std::vector<bool> usable(model.sections().size());
  for (std::size_t j = 0; j < usable.size(); ++j) usable[j] = !model.section(j).empty;
  PartitionWeights pw;
  try {
    pw = partition_weights(model.packet(), chart.base_point, &usable);
  } catch (const Error&) {
    throw Error(ErrorCode::ZeroDenominator, "no fitted section covers the base point");
  }
  const Mat tangent = chart.tangent_basis();
  Vec s = Vec::Zero(model.packet().n());
  for (std::size_t k = 0; k < pw.cylinders.size(); ++k)
    s += pw.weights[k] * section_in_fiber(model, pw.cylinders[k], chart, tangent);
  return s;
}

Vec mfin_point(const SectionModel& model, const BundleChart& chart) {
  return chart.base_point + global_section(model, chart);
}

std::optional<double> mfin_distance(const SectionModel& model, const BundleChart& start,
                                    const Eigen::Ref<const Vec>& z, double tube) {
  try {
    const BundleCoordinates bc = bundle_coordinates(model.packet(), start, z);
    if (bc.v.norm() > tube) return std::nullopt;
    return (bc.v - global_section(model, bc.base)).norm();
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace mnfd
