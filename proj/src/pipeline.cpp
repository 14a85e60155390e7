#include "mnfd/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace mnfd {

void TestConfig::validate() const {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::InvalidArgument, what);
  };
  require(d >= 1, "d must be at least 1");
  require(V > 0, "V must be positive");
  require(tau > 0 && tau < 1, "tau must lie in (0, 1)");
  require(eps > 0, "eps must be positive");
  require(delta > 0 && delta < 1, "delta must lie in (0, 1)");
  require(C >= 1, "C must be at least 1");
  require(cbar12 > 0 && cbar12 <= 1, "cbar12 must lie in (0, 1]");
  require(packet_budget >= 1, "packet budget must be at least 1");
  require(eps_bar > 0, "eps_bar must be positive");
  require(solver_tolerance > 0, "solver tolerance must be positive");
  require(solver_budget >= 1, "solver budget must be at least 1");
  require(max_ambient_dim > d, "max ambient dimension must exceed d");
  require(out_of_tube_factor > 0 && tube_factor > 0 && reach_factor > 0, "factors must be positive");
  require(budget_constant > 0, "budget constant must be positive");
}

BoundParams TestConfig::bound_params() const {
  BoundParams p;
  p.d = static_cast<double>(d);
  p.V = V;
  p.tau = tau;
  p.eps = eps;
  p.delta = delta;
  p.C = 1.0;
  return p;
}

std::string to_string(TestCase c) { return c == TestCase::One ? "one" : "two"; }

ReductionResult reduce_dimension(const PointCloud& cloud, const std::vector<std::size_t>& net_indices,
                                 Eigen::Index target_dim) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyInput, "reduce_dimension of an empty cloud");
  if (target_dim < 1 || target_dim > cloud.dim())
    throw Error(ErrorCode::InvalidArgument, "target dimension must lie in [1, n]");
  const Mat& x = cloud.points();
  const double floor = 1e-12 * std::max(1.0, x.cwiseAbs().maxCoeff());
  Mat basis(cloud.dim(), 0);
  const auto append = [&](const Mat& m) {
    if (m.cols() == 0 || basis.cols() >= target_dim) return;
    const Eigen::BDCSVD<Mat> svd(m, Eigen::ComputeThinU);
    const Vec& s = svd.singularValues();
    for (Eigen::Index k = 0; k < s.size() && basis.cols() < target_dim; ++k) {
      if (s(k) <= floor * std::sqrt(static_cast<double>(m.cols()))) break;
      Vec u = svd.matrixU().col(k);
      u -= basis * (basis.transpose() * u);
      const double norm = u.norm();
      if (norm < 1e-8) continue;
      basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
      basis.col(basis.cols() - 1) = u / norm;
    }
  };
  Mat net(cloud.dim(), static_cast<Eigen::Index>(net_indices.size()));
  for (std::size_t k = 0; k < net_indices.size(); ++k) {
    if (net_indices[k] >= cloud.size()) throw Error(ErrorCode::InvalidArgument, "net index out of range");
    net.col(static_cast<Eigen::Index>(k)) = x.col(static_cast<Eigen::Index>(net_indices[k]));
  }
  append(net);
  append(x - basis * (basis.transpose() * x));
  if (basis.cols() == 0) basis = Mat::Identity(cloud.dim(), 1);
  return ReductionResult{PointCloud(basis.transpose() * x, cloud.weights(), cloud.unit_ball()), basis};
}

BudgetReport budget_estimate(const TestConfig& config, Eigen::Index n, std::size_t searched) {
  BudgetReport out;
  const double exponent = config.budget_constant * config.V / std::pow(config.tau, static_cast<double>(config.d)) *
                          static_cast<double>(n) * std::log(1.0 / config.tau);
  out.log2_operations = exponent / std::numbers::ln2;
  out.searched = searched;
  std::ostringstream os;
  os << "searched " << searched << " of ~2^" << std::llround(out.log2_operations) << " packets";
  out.text = os.str();
  return out;
}

namespace {

double unit_sphere_area(Eigen::Index d) {
  const double k = static_cast<double>(d + 1);
  return 2.0 * std::pow(std::numbers::pi, k / 2) / std::tgamma(k / 2);
}

AffineSubspace data_tangent(const PointCloud& cloud, std::size_t idx, double tau_bar, Eigen::Index d) {
  const auto want = static_cast<std::size_t>(2 * (d + 1));
  double radius = 2 * tau_bar;
  for (;;) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i)
      if ((cloud.point(i) - cloud.point(idx)).norm() <= radius) ++count;
    if (count >= want || radius > 4) break;
    radius *= 2;
  }
  // Center on the local principal plane: the neighborhood mean plus the tangential offset.
  const AffineSubspace t = estimate_tangent(cloud, idx, radius, d);
  Vec mean = Vec::Zero(cloud.dim());
  std::size_t count = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if ((cloud.point(i) - cloud.point(idx)).norm() <= radius) {
      mean += cloud.point(i);
      ++count;
    }
  mean /= static_cast<double>(count);
  const Vec rel = cloud.point(idx) - mean;
  return AffineSubspace(mean + t.basis() * (t.basis().transpose() * rel), t.basis());
}

/// Adds cylinders where sparse data leaves holes in the cross-section coverage. Each new
/// center is the fill point projected onto the local principal plane of the nearest data point;
/// holes farther than tau_bar from every data point are left open.
CylinderPacket fill_coverage_gaps(const CylinderPacket& packet, const PointCloud& cloud, Eigen::Index d,
                                  int max_rounds = 8) {
  const double tb = packet.tau_bar();
  std::vector<Cylinder> cyl = packet.cylinders();
  CylinderPacket current = packet;
  for (int round = 0; round < max_rounds; ++round) {
    std::vector<Vec> added;
    for (std::size_t i = 0; i < current.size(); ++i) {
      const std::vector<Vec> holes = uncovered_base_points(current, i);
      if (holes.empty()) continue;
      const Cylinder& ci = current.cylinder(i);
      Vec w = Vec::Zero(current.n());
      w.head(d) = holes.front();
      const Vec p = ci.to_ambient(w);
      bool close = false;
      for (const Vec& a : added) close = close || (a - p).norm() < tb / 2;
      if (close) continue;
      std::size_t nearest = 0;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < cloud.size(); ++k)
        if (const double dist = (cloud.point(k) - p).squaredNorm(); dist < best) {
          best = dist;
          nearest = k;
        }
      // Holes past the edge of the data are boundary, not sparsity.
      if (best > tb * tb) continue;
      const AffineSubspace t = data_tangent(cloud, nearest, tb, d);
      cyl.push_back(Cylinder{frame_from_tangent(t.basis()), t.project(p)});
      added.push_back(p);
    }
    if (added.empty()) break;
    current = CylinderPacket(cyl, d, packet.tau(), tb, packet.alignment());
  }
  return current;
}

CylinderPacket perturbed_packet(const CylinderPacket& base, Rng& rng) {
  const double tb = base.tau_bar();
  const Eigen::Index n = base.n(), d = base.d();
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Cylinder> cyl;
  for (const Cylinder& c : base.cylinders()) {
    Vec shift(n);
    for (Eigen::Index k = 0; k < n; ++k) shift(k) = gauss(rng);
    shift *= 0.05 * tb / std::sqrt(static_cast<double>(n));
    Mat b = c.rotation.leftCols(d) + 0.02 * (tb / base.tau()) * gaussian_matrix(n, d, rng);
    const Eigen::HouseholderQR<Mat> qr(b);
    Mat q = qr.householderQ() * Mat::Identity(n, d);
    canonicalize_signs(q);
    cyl.push_back(Cylinder{frame_from_tangent(q), c.center + shift});
  }
  return CylinderPacket(std::move(cyl), d, base.tau(), tb, base.alignment());
}

/// Packet along a random round d-sphere with radius in [tau, volume limit].
std::optional<CylinderPacket> sphere_packet(const TestConfig& cfg, Eigen::Index n, Rng& rng) {
  const Eigen::Index d = cfg.d;
  if (d + 1 > n) return std::nullopt;
  const double r_vol = std::pow(cfg.V / unit_sphere_area(d), 1.0 / static_cast<double>(d));
  const double r_max = std::min(0.95, r_vol);
  if (r_max < cfg.tau) return std::nullopt;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r = cfg.tau + (r_max - cfg.tau) * unit(rng);
  const Vec center =
      (1.0 - r) * std::pow(unit(rng), 1.0 / static_cast<double>(n)) * random_unit_vector(n, rng);
  const Mat frame = random_rotation(n, rng).leftCols(d + 1);
  const double tb = cfg.cbar12 * cfg.tau;
  const double spacing = tb / 4;
  const auto count = static_cast<std::size_t>(
      std::ceil(4.0 * unit_sphere_area(d) * std::pow(r / spacing, static_cast<double>(d))));
  Mat pts(n, static_cast<Eigen::Index>(count));
  std::vector<Vec> dirs;
  for (std::size_t i = 0; i < count; ++i) {
    dirs.push_back(random_unit_vector(d + 1, rng));
    pts.col(static_cast<Eigen::Index>(i)) = center + r * frame * dirs.back();
  }
  const PointCloud sample(pts);
  const auto tangent = [&](std::size_t i) {
    const Eigen::HouseholderQR<Mat> qr(dirs[i]);
    const Mat q = qr.householderQ();
    Mat basis = frame * q.rightCols(d);
    canonicalize_signs(basis);
    return AffineSubspace(sample.point(i), basis);
  };
  return ideal_packet(sample, tangent, d, cfg.tau, cfg.cbar12, cfg.align);
}

struct Nearest {
  std::size_t index = 0;
  double dist = std::numeric_limits<double>::infinity();
};

Nearest nearest_column(const Mat& pts, const Eigen::Ref<const Vec>& z) {
  Nearest out;
  for (Eigen::Index j = 0; j < pts.cols(); ++j) {
    const double dd = (pts.col(j) - z).squaredNorm();
    if (dd < out.dist) {
      out.dist = dd;
      out.index = static_cast<std::size_t>(j);
    }
  }
  out.dist = std::sqrt(out.dist);
  return out;
}

SectionOptions section_options(const TestConfig& cfg) {
  SectionOptions o;
  o.eps_bar = cfg.eps_bar;
  o.solver_tolerance = cfg.solver_tolerance;
  o.budget = cfg.solver_budget;
  o.solver = cfg.solver;
  return o;
}

}  // namespace

PacketEvaluation evaluate_packet(const CylinderPacket& packet, const PointCloud& cloud, const TestConfig& config) {
  PacketEvaluation out;
  out.outcome.cylinders = packet.size();
  const double tb = packet.tau_bar();
  const double tube = config.tube_factor * tb;

  std::vector<Eigen::Index> seed_cols;
  Mat seeds = packet.centers();
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (!packet.near(cloud.point(i), tb).empty()) seed_cols.push_back(static_cast<Eigen::Index>(i));
  seeds.conservativeResize(Eigen::NoChange, seeds.cols() + static_cast<Eigen::Index>(seed_cols.size()));
  for (std::size_t k = 0; k < seed_cols.size(); ++k)
    seeds.col(static_cast<Eigen::Index>(packet.size() + k)) = cloud.points().col(seed_cols[k]);

  Certificate cert;
  cert.packet = packet;
  cert.mesh = extract_putative_manifold(packet, PointCloud(seeds));
  cert.sections = fit_sections(packet, cloud, section_options(config));
  const PointCloud base = cert.mesh.base_points();
  std::vector<AffineSubspace> tangents;
  for (const BundleChart& c : cert.mesh.charts) tangents.emplace_back(c.base_point, c.tangent_basis());
  cert.mesh_reach = base.size() >= 2 ? federer_reach(base, tangents) : ReachEstimate{};

  PacketOutcome& o = out.outcome;
  o.mesh_size = base.size();
  cert.residuals.resize(cloud.size());
  cert.in_tube.assign(cloud.size(), false);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Nearest nn = nearest_column(base.points(), cloud.point(i));
    double res = std::pow(config.out_of_tube_factor * nn.dist, 2);
    if (nn.dist <= tube) {
      const std::optional<double> dt = mfin_distance(cert.sections, cert.mesh.charts[nn.index], cloud.point(i), tube);
      if (dt) {
        res = *dt * *dt;
        cert.in_tube[i] = true;
      }
    }
    cert.residuals[i] = res;
    const double w = cloud.weight(i) * res;
    if (cert.in_tube[i]) {
      o.in_tube_loss += w;
      ++o.in_tube;
    } else {
      o.out_tube_loss += w;
    }
  }
  o.loss = o.in_tube_loss + o.out_tube_loss;
  out.certificate = std::move(cert);
  return out;
}

TestVerdict run_test(const PointCloud& input, const TestConfig& config) {
  if (input.empty()) throw Error(ErrorCode::EmptyInput, "run_test on an empty cloud");
  config.validate();
  if (config.d >= input.dim()) throw Error(ErrorCode::InvalidArgument, "d must be smaller than the ambient dimension");
  TestVerdict verdict;
  verdict.ambient_dim = input.dim();
  verdict.samples_used = input.size();
  verdict.threshold_low = config.eps / config.C;
  verdict.threshold_high = config.C * config.eps;
  try {
    verdict.sample_complexity = sample_complexity(config.bound_params());
  } catch (const Error&) {
    verdict.sample_complexity = std::numeric_limits<double>::quiet_NaN();
  }
  const double tb = config.cbar12 * config.tau;

  PointCloud cloud = input;
  if (input.dim() > config.max_ambient_dim) {
    ReductionResult red = reduce_dimension(input, greedy_net(input, tb), config.max_ambient_dim);
    cloud = std::move(red.cloud);
    verdict.reduction_basis = std::move(red.basis);
  }
  verdict.working_dim = cloud.dim();
  const Eigen::Index n = cloud.dim();

  std::optional<CylinderPacket> data_packet;
  std::string data_error;
  try {
    data_packet = fill_coverage_gaps(
        ideal_packet(
            cloud, [&](std::size_t i) { return data_tangent(cloud, i, tb, config.d); }, config.d, config.tau,
            config.cbar12, config.align),
        cloud, config.d);
  } catch (const Error& e) {
    data_error = e.what();
  }

  double best = std::numeric_limits<double>::infinity();
  std::optional<Certificate> best_cert;
  for (std::size_t i = 0; i < config.packet_budget; ++i) {
    PacketOutcome outcome;
    outcome.index = i;
    Rng rng(split_seed(config.seed, i));
    std::optional<CylinderPacket> packet;
    try {
      if (i == 0) {
        outcome.origin = "data";
        if (!data_packet) throw Error(ErrorCode::Degenerate, "data packet: " + data_error);
        packet = data_packet;
      } else if (i <= config.perturbations_per_packet) {
        outcome.origin = "perturbed";
        if (!data_packet) throw Error(ErrorCode::Degenerate, "data packet: " + data_error);
        packet = perturbed_packet(*data_packet, rng);
      } else {
        outcome.origin = "sphere";
        packet = sphere_packet(config, n, rng);
        if (!packet) throw Error(ErrorCode::InvalidArgument, "no round sphere fits the volume and reach limits");
      }
      outcome.cylinders = packet->size();
      const PacketValidation val = validate_packet(*packet);
      outcome.valid = val.valid();
      outcome.validation = val.summary();
      if (outcome.valid) {
        PacketEvaluation ev = evaluate_packet(*packet, cloud, config);
        ev.outcome.index = i;
        ev.outcome.origin = outcome.origin;
        ev.outcome.valid = true;
        ev.outcome.validation = outcome.validation;
        outcome = ev.outcome;
        if (outcome.loss < best) {
          best = outcome.loss;
          best_cert = std::move(ev.certificate);
          verdict.best_packet = i;
        }
      }
    } catch (const Error& e) {
      outcome.valid = false;
      outcome.error = e.what();
    }
    verdict.packets.push_back(outcome);
  }
  verdict.budget = budget_estimate(config, n, config.packet_budget);
  if (!best_cert) {
    std::ostringstream os;
    os << "no valid packet among " << verdict.packets.size() << " searched:";
    for (const PacketOutcome& p : verdict.packets)
      os << "\n  packet " << p.index << " (" << p.origin << "): "
         << (p.error.empty() ? p.validation : p.error);
    throw Error(ErrorCode::NoValidPacket, os.str());
  }
  verdict.best_loss = best;
  verdict.verdict = best <= verdict.threshold_high ? TestCase::One : TestCase::Two;
  verdict.certificate = std::move(best_cert);
  return verdict;
}

MfinSample sample_mfin(const Certificate& cert, double net_radius) {
  const CylinderPacket& packet = cert.packet;
  const Eigen::Index n = packet.n(), d = packet.d();
  const PointCloud base = cert.mesh.base_points();
  std::vector<std::size_t> chosen;
  if (net_radius > 0) {
    chosen = greedy_net(base, net_radius);
  } else {
    for (std::size_t i = 0; i < base.size(); ++i) chosen.push_back(i);
  }
  const double h = packet.tau_bar() / 20;
  std::vector<Vec> pts;
  MfinSample out;
  for (std::size_t idx : chosen) {
    const BundleChart& chart = cert.mesh.charts[idx];
    try {
      const Vec p = mfin_point(cert.sections, chart);
      const Mat t = chart.tangent_basis();
      Mat diff(n, d);
      for (Eigen::Index k = 0; k < d; ++k) {
        const BundleChart plus = solve_base_point(packet, chart.base_point + h * t.col(k));
        const BundleChart minus = solve_base_point(packet, chart.base_point - h * t.col(k));
        diff.col(k) = mfin_point(cert.sections, plus) - mfin_point(cert.sections, minus);
      }
      const Eigen::HouseholderQR<Mat> qr(diff);
      Mat q = qr.householderQ() * Mat::Identity(n, d);
      pts.push_back(p);
      out.tangents.emplace_back(p, q);
    } catch (const Error&) {
      continue;
    }
  }
  if (pts.empty()) throw Error(ErrorCode::EmptyMesh, "no output-manifold point could be evaluated");
  Mat m(n, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t k = 0; k < pts.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = pts[k];
  out.points = PointCloud(std::move(m));
  return out;
}

VerificationReport verify_output(const Certificate& cert, const PointCloud& cloud, const TestConfig& config,
                                 double certified_loss) {
  VerificationReport rep;
  rep.loss_certified = certified_loss;
  rep.reach_required = config.reach_factor * config.tau;
  try {
    if (cloud.size() != cert.residuals.size()) throw Error(ErrorCode::DimensionMismatch, "certificate and cloud differ in size");
    const double tb = cert.packet.tau_bar();
    const MfinSample coarse = sample_mfin(cert, tb / 4);
    rep.reach = coarse.points.size() >= 2 ? federer_reach(coarse.points, coarse.tangents) : ReachEstimate{};
    rep.reach_ok = rep.reach.unbounded || rep.reach.value >= rep.reach_required;

    const MfinSample dense = sample_mfin(cert, 0.0);
    rep.samples = dense.points.size();
    double loss = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Nearest nn = nearest_column(dense.points.points(), cloud.point(i));
      double res = std::pow(config.out_of_tube_factor * nn.dist, 2);
      if (cert.in_tube[i]) {
        const AffineSubspace& t = dense.tangents[nn.index];
        const Vec rel = cloud.point(i) - t.base();
        res = (rel - t.basis() * (t.basis().transpose() * rel)).squaredNorm();
      }
      loss += cloud.weight(i) * res;
    }
    rep.loss_dense = loss;
    rep.loss_ok = std::abs(loss - certified_loss) <= 0.1 * certified_loss + 1e-12;

    rep.max_coefficient = cert.sections.max_coefficient();
    rep.coefficient_bound = SectionOptions{}.norm_factor * tb / cert.packet.tau();
    rep.coefficient_ok = rep.max_coefficient <= rep.coefficient_bound * (1 + 1e-9);
    rep.passed = rep.reach_ok && rep.loss_ok && rep.coefficient_ok;
  } catch (const Error& e) {
    rep.error = e.what();
    rep.passed = false;
  }
  return rep;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  const auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::InvalidArgument, "config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw Error(ErrorCode::InvalidArgument, "config line " + std::to_string(lineno) + ": empty key");
    for (char& c : key)
      if (c == '_') c = '-';
    out[key] = value;
  }
  return out;
}

std::map<std::string, std::string> load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace mnfd
