#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "mnfd/asdf.hpp"
#include "mnfd/kplanes.hpp"
#include "mnfd/pipeline.hpp"
#include "mnfd/whitney.hpp"

namespace mnfd {

using Json = nlohmann::json;

/// {tau, tau_bar, d, n, cylinders: [{center, rotation (row-major)}]}.
Json packet_to_json(const CylinderPacket& packet);
CylinderPacket packet_from_json(const Json& j, AlignmentConstants align = {});

/// Per site {x, value, gradient (row-major m x d), hessian (per component, upper triangle row by row)}.
Json field_to_json(const WhitneyField& field);
WhitneyField field_from_json(const Json& j);

/// {k, d, planes: [{base, basis (one row per basis vector)}]}.
Json kplanes_to_json(const KPlanesModel& model);
KPlanesModel kplanes_from_json(const Json& j);

/// Base points go to `csv_path`; projectors, fiber bases and residuals to the sidecar `json_path`.
void save_mesh(const std::string& csv_path, const std::string& json_path, const PutativeMesh& mesh);
PutativeMesh load_mesh(const std::string& csv_path, const std::string& json_path);

Json verification_to_json(const VerificationReport& report);

/// The run report. `verification` is attached when present.
Json report_to_json(const TestVerdict& verdict, const TestConfig& config,
                    const std::optional<VerificationReport>& verification);

/// One row per data point: index, weight, squared residual, in_tube flag.
void save_residuals_csv(const std::string& path, const Certificate& cert, const PointCloud& cloud);

Json read_json(const std::string& path);
void write_json(const std::string& path, const Json& j);

}  // namespace mnfd
