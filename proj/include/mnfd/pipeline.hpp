#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mnfd/bounds.hpp"
#include "mnfd/sections.hpp"

namespace mnfd {

struct TestConfig {
  Eigen::Index d = 1;
  double V = 6.283185307179586;
  double tau = 0.3;
  double eps = 1e-3;
  double delta = 0.1;
  double C = 4.0;        ///< verdict constant: thresholds eps / C and C * eps
  double cbar12 = 0.1;   ///< tau_bar / tau
  std::size_t packet_budget = 6;
  std::size_t perturbations_per_packet = 1;
  std::uint64_t seed = 0;
  double eps_bar = 0.5;  ///< sketch radius in cylinder units
  double solver_tolerance = 1e-8;
  std::size_t solver_budget = 400;
  SolverKind solver = SolverKind::InteriorPoint;
  Eigen::Index max_ambient_dim = 8;
  double out_of_tube_factor = 1.5;
  double tube_factor = 2.0;    ///< tube radius in units of tau_bar
  double reach_factor = 0.1;   ///< verify_output requires reach >= reach_factor * tau
  double budget_constant = 1.0;
  AlignmentConstants align;

  /// Throws InvalidArgument on nonpositive or inconsistent values.
  void validate() const;
  BoundParams bound_params() const;
};

enum class TestCase { One, Two };
std::string to_string(TestCase c);

struct ReductionResult {
  PointCloud cloud;
  Mat basis;  ///< n x k orthonormal; reduced coordinates are basis^T x
};

/// Projects onto an orthonormal basis of the span of the net points, completed with
/// the leading directions of the whole sample, truncated to `target_dim`.
ReductionResult reduce_dimension(const PointCloud& cloud, const std::vector<std::size_t>& net_indices,
                                 Eigen::Index target_dim);

struct PacketOutcome {
  std::size_t index = 0;
  std::string origin;  ///< "data", "perturbed" or "sphere"
  std::size_t cylinders = 0;
  bool valid = false;
  std::string validation;
  double loss = 0;
  double in_tube_loss = 0;
  double out_tube_loss = 0;
  std::size_t in_tube = 0;
  std::size_t mesh_size = 0;
  std::string error;
};

struct Certificate {
  CylinderPacket packet;
  PutativeMesh mesh;
  SectionModel sections;
  ReachEstimate mesh_reach;
  std::vector<double> residuals;  ///< per-point squared distance used in the loss
  std::vector<bool> in_tube;
};

struct BudgetReport {
  double log2_operations = 0;  ///< log2 of exp(C V / tau^d n ln(1/tau))
  std::size_t searched = 0;
  std::string text;
};

BudgetReport budget_estimate(const TestConfig& config, Eigen::Index n, std::size_t searched);

struct TestVerdict {
  TestCase verdict = TestCase::Two;
  double best_loss = 0;
  double threshold_low = 0;
  double threshold_high = 0;
  std::size_t best_packet = 0;
  std::size_t samples_used = 0;
  double sample_complexity = 0;
  Eigen::Index ambient_dim = 0;
  Eigen::Index working_dim = 0;
  std::vector<PacketOutcome> packets;
  std::optional<Certificate> certificate;
  BudgetReport budget;
  Mat reduction_basis;  ///< empty when no reduction took place
};

/// Runs the two-phase test on `cloud`. Throws NoValidPacket if no searched packet validates.
TestVerdict run_test(const PointCloud& cloud, const TestConfig& config);

/// Loss of the output manifold of one packet, with the certificate pieces.
struct PacketEvaluation {
  PacketOutcome outcome;
  std::optional<Certificate> certificate;
};
PacketEvaluation evaluate_packet(const CylinderPacket& packet, const PointCloud& cloud, const TestConfig& config);

struct VerificationReport {
  bool passed = false;
  std::size_t samples = 0;
  ReachEstimate reach;
  double reach_required = 0;
  bool reach_ok = false;
  double loss_dense = 0;
  double loss_certified = 0;
  bool loss_ok = false;
  double max_coefficient = 0;
  double coefficient_bound = 0;
  bool coefficient_ok = false;
  std::string error;
};

struct MfinSample {
  PointCloud points;
  std::vector<AffineSubspace> tangents;
};

/// Output-manifold points over the mesh charts, with finite-difference tangents.
MfinSample sample_mfin(const Certificate& cert, double net_radius);

/// Checks the certificate: reach of the output manifold, loss agreement and section norms.
VerificationReport verify_output(const Certificate& cert, const PointCloud& cloud, const TestConfig& config,
                                 double certified_loss);

/// Parses "key = value" lines; '#' starts a comment. Keys may use '-' or '_'.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> load_config_file(const std::string& path);

}  // namespace mnfd
