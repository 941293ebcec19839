#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mapeval/voxel_metrics.hpp"

namespace mapeval {

struct ReportConfig {
  double tau_m = 0.2;
  double voxel_size_m = 3.0;
  double mme_radius_m = 0.1;
  std::size_t min_voxel_points = 10;
  int gmm_k = 2;
  std::uint64_t seed = 0;
};

/// Absent values are written as JSON null.
struct ReportMetrics {
  std::optional<double> ac_cm;
  std::optional<double> com;
  std::optional<double> cd_cm;
  std::optional<double> mme;
  std::optional<double> awd_cm;
  std::optional<double> scs;
  std::optional<double> w_bound_cm;
};

struct StageRuntimes {
  double registration = 0.0;
  double classic_metrics = 0.0;
  double voxelization = 0.0;
  double awd = 0.0;
  double scs = 0.0;
  double mme = 0.0;
};

struct ReportCounts {
  std::size_t gt_points = 0;
  std::size_t est_points = 0;
  std::size_t correspondences = 0;
  std::size_t gt_voxels = 0;
  std::size_t est_voxels = 0;
  std::size_t matched_voxels = 0;
  std::size_t mme_valid_points = 0;
  std::size_t scs_voxels = 0;
};

struct EvaluationReport {
  ReportConfig config;
  ReportMetrics metrics;
  std::vector<CdfStep> cdf;
  StageRuntimes runtimes;
  ReportCounts counts;
  std::optional<MixtureBound> mixture;
  std::vector<VoxelError> voxels;
  std::vector<std::string> warnings;
};

/// Throws std::invalid_argument describing the first violated invariant:
/// com outside [0, 1], a negative or non-finite distance metric, a CDF that is
/// not nondecreasing in both w and F or does not end at F = 1.
void validate_report(const EvaluationReport& report);

std::string report_to_json(const EvaluationReport& report);
/// Parses report.json contents. Voxel rows are not part of the JSON.
EvaluationReport report_from_json(const std::string& text);

/// Writes report.json, voxel_errors.csv and cdf.csv into dir (created if missing).
void write_report(const EvaluationReport& report, const std::filesystem::path& dir);
/// Reads report.json and voxel_errors.csv back from dir.
EvaluationReport read_report(const std::filesystem::path& dir);

std::vector<VoxelError> read_voxel_errors_csv(const std::filesystem::path& path);

}  // namespace mapeval
