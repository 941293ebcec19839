#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mapeval/geometry.hpp"
#include "mapeval/point_cloud.hpp"
#include "mapeval/registration.hpp"
#include "mapeval/report.hpp"

namespace mapeval {

/// Names accepted by EvaluationConfig::skip.
inline const std::vector<std::string> kMetricNames = {"ac", "com", "cd", "mme", "awd", "scs", "w_bound", "error_map"};

struct EvaluationConfig {
  double tau = 0.2;           // m
  double voxel_size = 3.0;    // m
  double mme_radius = 0.1;    // m
  std::size_t min_voxel_points = 10;
  int gmm_k = 2;
  std::uint64_t seed = 0;
  int threads = 0;            // 0 = all cores
  std::set<std::string> skip;

  /// Align est to gt with ICP before scoring.
  bool register_first = false;
  RigidTransform init_pose;
  IcpParams icp;

  bool enabled(const std::string& metric) const { return !skip.contains(metric); }
};

/// Throws std::invalid_argument for non-positive lengths, K < 1 or unknown skip names.
void validate_config(const EvaluationConfig& config);

/// Per-stage wall times in seconds.
struct StageTimings {
  double registration = 0.0;
  double ac = 0.0;  // est index, gt->est search, correspondences, AC and COM
  double cd = 0.0;  // gt index, est->gt search, chamfer sum
  double mme = 0.0;
  double voxelization = 0.0;
  double awd = 0.0;  // voxel error field and its mean
  double scs = 0.0;
};

struct EvaluationResult {
  EvaluationReport report;
  StageTimings timings;
  std::optional<IcpResult> registration;
  /// est points (after registration) colored by their distance to gt, max = tau.
  std::optional<PointCloud> error_map;
};

/// Runs the full evaluation of est against gt. Both clouds must be non-empty.
/// Metrics that cannot be computed (no inliers, no shared voxels) are left
/// absent and a warning is recorded.
EvaluationResult evaluate(const PointCloud& gt, const PointCloud& est, const EvaluationConfig& config);

}  // namespace mapeval
