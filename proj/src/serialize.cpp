#include "mnfd/serialize.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "mnfd/io.hpp"

namespace mnfd {

namespace {

Json vec_json(const Eigen::Ref<const Vec>& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json row_major(const Mat& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  return out;
}

Vec json_vec(const Json& j, Eigen::Index expected, const char* what) {
  if (!j.is_array()) throw Error(ErrorCode::Io, std::string(what) + " must be an array");
  if (expected >= 0 && static_cast<Eigen::Index>(j.size()) != expected)
    throw Error(ErrorCode::Io, std::string(what) + " has the wrong length");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

Mat json_row_major(const Json& j, Eigen::Index rows, Eigen::Index cols, const char* what) {
  const Vec flat = json_vec(j, rows * cols, what);
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat(r * cols + c);
  return m;
}

/// Non-finite values become null.
Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json reach_json(const ReachEstimate& r) {
  Json out{{"value", number(r.value)}, {"unbounded", r.unbounded}};
  if (r.argpair) out["argpair"] = {r.argpair->first, r.argpair->second};
  return out;
}

template <typename F>
decltype(auto) parse_guard(F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Io, std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

Json packet_to_json(const CylinderPacket& packet) {
  Json cyls = Json::array();
  for (const Cylinder& c : packet.cylinders())
    cyls.push_back({{"center", vec_json(c.center)}, {"rotation", row_major(c.rotation)}});
  return {{"tau", packet.tau()},
          {"tau_bar", packet.tau_bar()},
          {"d", packet.d()},
          {"n", packet.n()},
          {"cylinders", cyls}};
}

CylinderPacket packet_from_json(const Json& j, AlignmentConstants align) {
  return parse_guard([&] {
    const auto n = j.at("n").get<Eigen::Index>();
    const auto d = j.at("d").get<Eigen::Index>();
    std::vector<Cylinder> cyls;
    for (const Json& c : j.at("cylinders")) {
      Cylinder cyl;
      cyl.center = json_vec(c.at("center"), n, "center");
      cyl.rotation = json_row_major(c.at("rotation"), n, n, "rotation");
      cyls.push_back(std::move(cyl));
    }
    return CylinderPacket(std::move(cyls), d, j.at("tau").get<double>(), j.at("tau_bar").get<double>(), align);
  });
}

Json field_to_json(const WhitneyField& field) {
  Json sites = Json::array();
  const Eigen::Index d = field.d();
  for (std::size_t s = 0; s < field.size(); ++s) {
    const Jet2& jet = field.jets[s];
    Json hess = Json::array();
    for (const Mat& h : jet.hessian) {
      Json upper = Json::array();
      for (Eigen::Index k = 0; k < d; ++k)
        for (Eigen::Index l = k; l < d; ++l) upper.push_back(h(k, l));
      hess.push_back(upper);
    }
    sites.push_back({{"x", vec_json(field.sites.col(static_cast<Eigen::Index>(s)))},
                     {"value", vec_json(jet.value)},
                     {"gradient", row_major(jet.gradient)},
                     {"hessian", hess}});
  }
  return {{"d", d}, {"m", field.m()}, {"sites", sites}};
}

WhitneyField field_from_json(const Json& j) {
  return parse_guard([&] {
    const auto d = j.at("d").get<Eigen::Index>();
    const auto m = j.at("m").get<Eigen::Index>();
    const Json& sites = j.at("sites");
    WhitneyField field;
    field.sites.resize(d, static_cast<Eigen::Index>(sites.size()));
    for (std::size_t s = 0; s < sites.size(); ++s) {
      const Json& site = sites[s];
      field.sites.col(static_cast<Eigen::Index>(s)) = json_vec(site.at("x"), d, "x");
      Jet2 jet = Jet2::zero(d, m);
      jet.value = json_vec(site.at("value"), m, "value");
      jet.gradient = json_row_major(site.at("gradient"), m, d, "gradient");
      const Json& hess = site.at("hessian");
      if (static_cast<Eigen::Index>(hess.size()) != m) throw Error(ErrorCode::Io, "hessian has the wrong length");
      for (Eigen::Index c = 0; c < m; ++c) {
        const Vec upper = json_vec(hess[static_cast<std::size_t>(c)], d * (d + 1) / 2, "hessian");
        Eigen::Index at = 0;
        for (Eigen::Index k = 0; k < d; ++k)
          for (Eigen::Index l = k; l < d; ++l) {
            jet.hessian[static_cast<std::size_t>(c)](k, l) = upper(at);
            jet.hessian[static_cast<std::size_t>(c)](l, k) = upper(at);
            ++at;
          }
      }
      field.jets.push_back(std::move(jet));
    }
    return field;
  });
}

Json kplanes_to_json(const KPlanesModel& model) {
  Json planes = Json::array();
  for (const AffineSubspace& h : model.planes)
    planes.push_back({{"base", vec_json(h.base())}, {"basis", row_major(h.basis().transpose())}});
  return {{"k", model.k}, {"d", model.d}, {"planes", planes}};
}

KPlanesModel kplanes_from_json(const Json& j) {
  return parse_guard([&] {
    KPlanesModel model;
    model.k = j.at("k").get<Eigen::Index>();
    model.d = j.at("d").get<Eigen::Index>();
    for (const Json& p : j.at("planes")) {
      Vec base = json_vec(p.at("base"), -1, "base");
      const Eigen::Index n = base.size();
      const auto rows = static_cast<Eigen::Index>(p.at("basis").size()) / std::max<Eigen::Index>(n, 1);
      Mat basis = json_row_major(p.at("basis"), rows, n, "basis").transpose();
      model.planes.emplace_back(std::move(base), std::move(basis));
    }
    model.validate();
    return model;
  });
}

void save_mesh(const std::string& csv_path, const std::string& json_path, const PutativeMesh& mesh) {
  save_csv(csv_path, mesh.base_points());
  Json charts = Json::array();
  for (const BundleChart& c : mesh.charts)
    charts.push_back({{"projector_hi", row_major(c.projector_hi)},
                      {"fiber_basis", row_major(c.fiber_basis)},
                      {"owning_cylinder", c.owning_cylinder},
                      {"residual", c.residual}});
  write_json(json_path, {{"tolerance", mesh.tolerance},
                         {"n", mesh.charts.empty() ? 0 : mesh.charts.front().base_point.size()},
                         {"codim", mesh.charts.empty() ? 0 : mesh.charts.front().fiber_basis.cols()},
                         {"charts", charts}});
}

PutativeMesh load_mesh(const std::string& csv_path, const std::string& json_path) {
  const PointCloud base = load_csv(csv_path);
  const Json j = read_json(json_path);
  return parse_guard([&] {
    const Json& charts = j.at("charts");
    if (charts.size() != base.size()) throw Error(ErrorCode::Io, "mesh CSV and sidecar disagree in length");
    const Eigen::Index n = base.dim();
    const auto codim = j.at("codim").get<Eigen::Index>();
    PutativeMesh mesh;
    mesh.tolerance = j.at("tolerance").get<double>();
    for (std::size_t i = 0; i < charts.size(); ++i) {
      BundleChart c;
      c.base_point = base.point(i);
      c.projector_hi = json_row_major(charts[i].at("projector_hi"), n, n, "projector_hi");
      c.fiber_basis = json_row_major(charts[i].at("fiber_basis"), n, codim, "fiber_basis");
      c.owning_cylinder = charts[i].at("owning_cylinder").get<std::size_t>();
      c.residual = charts[i].at("residual").get<double>();
      mesh.charts.push_back(std::move(c));
    }
    return mesh;
  });
}

Json verification_to_json(const VerificationReport& r) {
  Json out{{"passed", r.passed},
           {"samples", r.samples},
           {"reach", reach_json(r.reach)},
           {"reach_required", r.reach_required},
           {"reach_ok", r.reach_ok},
           {"loss_dense", r.loss_dense},
           {"loss_certified", r.loss_certified},
           {"loss_ok", r.loss_ok},
           {"max_coefficient", r.max_coefficient},
           {"coefficient_bound", r.coefficient_bound},
           {"coefficient_ok", r.coefficient_ok}};
  if (!r.error.empty()) out["error"] = r.error;
  return out;
}

Json report_to_json(const TestVerdict& v, const TestConfig& config,
                    const std::optional<VerificationReport>& verification) {
  Json packets = Json::array();
  for (const PacketOutcome& p : v.packets) {
    Json pj{{"index", p.index},         {"origin", p.origin},         {"cylinders", p.cylinders},
            {"valid", p.valid},         {"validation", p.validation}, {"loss", number(p.loss)},
            {"in_tube_loss", p.in_tube_loss}, {"out_tube_loss", p.out_tube_loss},
            {"in_tube", p.in_tube},     {"mesh_size", p.mesh_size}};
    if (!p.error.empty()) pj["error"] = p.error;
    packets.push_back(pj);
  }
  Json cfg{{"d", config.d},
           {"V", config.V},
           {"tau", config.tau},
           {"eps", config.eps},
           {"delta", config.delta},
           {"C", config.C},
           {"cbar12", config.cbar12},
           {"packet_budget", config.packet_budget},
           {"perturbations_per_packet", config.perturbations_per_packet},
           {"seed", config.seed},
           {"eps_bar", config.eps_bar},
           {"solver", to_string(config.solver)},
           {"solver_tolerance", config.solver_tolerance},
           {"solver_budget", config.solver_budget},
           {"max_ambient_dim", config.max_ambient_dim},
           {"out_of_tube_factor", config.out_of_tube_factor},
           {"tube_factor", config.tube_factor},
           {"reach_factor", config.reach_factor}};
  Json out{{"case", to_string(v.verdict)},
           {"best_loss", v.best_loss},
           {"threshold_low", v.threshold_low},
           {"threshold_high", v.threshold_high},
           {"best_packet", v.best_packet},
           {"samples_used", v.samples_used},
           {"sample_complexity_advisory", number(v.sample_complexity)},
           {"ambient_dim", v.ambient_dim},
           {"working_dim", v.working_dim},
           {"search", {{"searched", v.budget.searched},
                       {"log2_full_enumeration", number(v.budget.log2_operations)},
                       {"summary", v.budget.text},
                       {"note", "Case Two holds relative to the searched packet family only"}}},
           {"packets", packets},
           {"config", cfg}};
  if (v.certificate) {
    const Certificate& c = *v.certificate;
    Json sections = Json::array();
    std::size_t in = 0;
    for (bool b : c.in_tube) in += b ? 1 : 0;
    for (const LocalSection& s : c.sections.sections())
      sections.push_back({{"cylinder", s.cylinder},
                          {"empty", s.empty},
                          {"points", s.points},
                          {"sites", s.field.size()},
                          {"zeta", s.zeta},
                          {"lower_bound", s.lower_bound},
                          {"certified", s.certified},
                          {"iterations", s.iterations}});
    out["certificate"] = {{"packet", packet_to_json(c.packet)},
                          {"mesh_size", c.mesh.charts.size()},
                          {"mesh_tolerance", c.mesh.tolerance},
                          {"mesh_reach", reach_json(c.mesh_reach)},
                          {"max_section_coefficient", c.sections.max_coefficient()},
                          {"in_tube_points", in},
                          {"sections", sections}};
  }
  if (verification) out["verification"] = verification_to_json(*verification);
  return out;
}

void save_residuals_csv(const std::string& path, const Certificate& cert, const PointCloud& cloud) {
  if (cert.residuals.size() != cloud.size()) throw Error(ErrorCode::DimensionMismatch, "residuals and cloud differ");
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << std::setprecision(17) << "index,weight,residual_sq,in_tube\n";
  for (std::size_t i = 0; i < cloud.size(); ++i)
    out << i << ',' << cloud.weight(i) << ',' << cert.residuals[i] << ',' << (cert.in_tube[i] ? 1 : 0) << '\n';
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path);
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return parse_guard([&] { return Json::parse(in); });
}

void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path);
}

}  // namespace mnfd
