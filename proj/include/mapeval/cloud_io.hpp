#pragma once

#include <cstddef>
#include <filesystem>
#include <span>

#include "mapeval/point_cloud.hpp"

namespace mapeval {

enum class Encoding { kBinary, kAscii };

struct ReadResult {
  PointCloud cloud;
  std::size_t dropped_nonfinite = 0;
};

/// Reads a .ply or .pcd file (ASCII or binary little-endian, detected from the
/// header). Points with a NaN or infinite coordinate are dropped and counted.
/// PLY colors are kept when the vertex element has red/green/blue properties.
///
/// Throws ParseError for malformed headers (naming the line), big-endian or
/// compressed bodies, and truncated binary data (expected vs actual bytes);
/// IoError when the file cannot be opened.
ReadResult read_cloud(const std::filesystem::path& path);

/// Writes x, y, z as doubles (binary, lossless) or with 6 decimals (ASCII).
/// PLY output includes uchar red/green/blue when the cloud has colors; PCD
/// output carries geometry only. Throws IoError naming the path on failure.
void write_cloud(const std::filesystem::path& path, const PointCloud& cloud, Encoding encoding = Encoding::kBinary);

/// Colors each point on a linear blue-to-red ramp over t = clamp(d / max, 0, 1):
/// red = round(255 t), green = 0, blue = 255 - red.
PointCloud export_error_map(const PointCloud& cloud, std::span<const double> distances, double max_distance);

Rgb error_color(double distance, double max_distance);

}  // namespace mapeval
