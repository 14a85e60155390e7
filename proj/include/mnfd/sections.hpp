#pragma once

#include <optional>
#include <vector>

#include "mnfd/asdf.hpp"
#include "mnfd/section_solver.hpp"

namespace mnfd {

/// Local-section fitting parameters. Lengths are in cylinder units, where tau_bar = 1.
struct SectionOptions {
  double eps_bar = 0.1;            ///< sketch radius
  double solver_tolerance = 1e-8;  ///< additive accuracy of the minimized objective
  std::size_t budget = 400;
  SolverKind solver = SolverKind::InteriorPoint;
  double norm_factor = 2.0;  ///< C2 budget M = norm_factor * tau_bar / tau
};

/// Graph of a map from the central cross-section of one cylinder to its normal directions.
struct LocalSection {
  std::size_t cylinder = 0;
  bool empty = true;
  double tau_bar = 1;
  double M = 0;
  WhitneyField field;  ///< in cylinder units
  WhitneyExtension extension;
  double zeta = 0;  ///< objective in cylinder units
  double lower_bound = 0;
  bool certified = false;
  std::size_t points = 0;
  std::size_t iterations = 0;

  /// Normal offset f(a) in ambient units at tangential coordinate a; optional d-column Jacobian.
  Vec offset(const Eigen::Ref<const Vec>& a, Mat* jacobian = nullptr) const;
};

/// Fits the section of `cylinder` (index `index` of `packet`) to the cloud points it contains.
LocalSection fit_local_section(const CylinderPacket& packet, std::size_t index, const PointCloud& cloud,
                               const SectionOptions& options = {});

class SectionModel {
 public:
  SectionModel() = default;
  SectionModel(const CylinderPacket& packet, std::vector<LocalSection> sections);

  const CylinderPacket& packet() const { return packet_; }
  const std::vector<LocalSection>& sections() const { return sections_; }
  const LocalSection& section(std::size_t j) const { return sections_[j]; }
  /// Largest max_jet_coefficient over non-empty sections.
  double max_coefficient() const;

 private:
  CylinderPacket packet_;
  std::vector<LocalSection> sections_;
};

SectionModel fit_sections(const CylinderPacket& packet, const PointCloud& cloud, const SectionOptions& options = {});

struct PartitionWeights {
  std::vector<std::size_t> cylinders;
  std::vector<double> weights;
};

/// Normalized bump weights of the cylinders containing x. When `usable` is given, other
/// cylinders are dropped before normalizing. Throws ZeroDenominator if nothing covers x.
PartitionWeights partition_weights(const CylinderPacket& packet, const Eigen::Ref<const Vec>& x,
                                   const std::vector<bool>* usable = nullptr);

/// Fiber vector s(x) at the chart's base point, blended from the local sections.
Vec global_section(const SectionModel& model, const BundleChart& chart);

/// Point base + s(base) of the output manifold over the chart.
Vec mfin_point(const SectionModel& model, const BundleChart& chart);

/// Fiber distance from z to the output manifold, starting the fiber search at `start`.
/// Empty when no fiber within `tube` of the base manifold contains z.
std::optional<double> mfin_distance(const SectionModel& model, const BundleChart& start,
                                    const Eigen::Ref<const Vec>& z, double tube);

}  // namespace mnfd
