#pragma once

#include <string>

#include "mnfd/geometry.hpp"

namespace mnfd {

/// One point per row. With `has_weights` the final column holds the weight.
/// Blank lines and lines starting with '#' are skipped.
PointCloud load_csv(const std::string& path, bool has_weights = false, bool unit_ball = false);
void save_csv(const std::string& path, const PointCloud& cloud, bool write_weights = false);

/// Little-endian: "MNFD", u32 n, u64 N, N*n f64 coordinates (point-major), N f64 weights.
PointCloud load_binary(const std::string& path, bool unit_ball = false);
void save_binary(const std::string& path, const PointCloud& cloud);

/// Dispatches on the file's leading magic bytes.
PointCloud load_points(const std::string& path, bool has_weights = false, bool unit_ball = false);

}  // namespace mnfd
