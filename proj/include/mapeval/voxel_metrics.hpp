#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "mapeval/geometry.hpp"
#include "mapeval/point_cloud.hpp"

namespace mapeval {

/// Integer voxel coordinates (floor of position / voxel size).
struct VoxelIndex {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t z = 0;

  friend auto operator<=>(const VoxelIndex&, const VoxelIndex&) = default;
};

struct VoxelIndexHash {
  std::size_t operator()(const VoxelIndex& v) const noexcept {
    // Large odd multipliers spread neighboring indices across buckets.
    std::uint64_t h = static_cast<std::uint32_t>(v.x) * 0x9E3779B97F4A7C15ull;
    h ^= static_cast<std::uint32_t>(v.y) * 0xC2B2AE3D27D4EB4Full;
    h ^= static_cast<std::uint32_t>(v.z) * 0x165667B19E3779F9ull;
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

struct GaussianVoxel {
  VoxelIndex index;
  Gaussian3 gaussian;  // unbiased covariance + epsilon * I
  std::size_t count = 0;
};

struct VoxelGridParams {
  double voxel_size = 3.0;
  Point3 origin = Point3::Zero();
  std::size_t min_points = 10;
};

/// Occupied voxels sorted by index.
struct VoxelGrid {
  VoxelGridParams params;
  std::vector<GaussianVoxel> voxels;
  std::size_t discarded_voxels = 0;  // fewer than min_points
  std::size_t discarded_points = 0;

  const GaussianVoxel* find(const VoxelIndex& index) const;
};

VoxelIndex voxel_index_of(const Point3& p, double voxel_size, const Point3& origin = Point3::Zero());

/// Bins points by floor division and fits a Gaussian to each voxel holding at
/// least min_points points. Single pass over the cloud; per-block partial sums
/// are merged in block order so the result is independent of thread count.
VoxelGrid voxelize(const PointCloud& cloud, const VoxelGridParams& params);

struct VoxelError {
  VoxelIndex index;
  double w_m = 0.0;
  std::size_t n_gt = 0;
  std::size_t n_est = 0;
};

/// Wasserstein distances over voxels occupied in both grids, sorted by index.
struct VoxelErrorField {
  std::vector<VoxelError> entries;
  std::size_t gt_only_voxels = 0;
  std::size_t est_only_voxels = 0;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

/// Throws std::invalid_argument if the grids use different voxel sizes or origins.
VoxelErrorField voxel_wasserstein_field(const VoxelGrid& gt, const VoxelGrid& est);

/// Mean W in centimeters; nullopt for an empty field.
std::optional<double> awd(const VoxelErrorField& field);

struct CdfStep {
  double w_cm = 0.0;
  double fraction = 0.0;
};

/// Step CDF of the voxel errors: one step per distinct value, F(w) = #{W <= w} / M.
struct EmpiricalCdf {
  std::vector<CdfStep> steps;
  std::size_t samples = 0;

  double operator()(double w_cm) const;
};

EmpiricalCdf empirical_cdf(const VoxelErrorField& field);

struct MixtureComponent {
  double weight = 0.0;
  double mean = 0.0;      // cm
  double variance = 0.0;  // cm^2
};

struct MixtureBound {
  double mean_cm = 0.0;
  double stddev_cm = 0.0;
  double bound_cm = 0.0;  // mean + 3 stddev
  std::vector<MixtureComponent> components;
  int iterations = 0;
  double log_likelihood = 0.0;
};

struct MixtureParams {
  int components = 2;
  int max_iterations = 200;
  double tolerance = 1e-8;           // change in mean log-likelihood per sample
  double variance_floor = 1e-12;     // cm^2
};

/// Fits a 1D Gaussian mixture to the voxel errors (in cm) by EM and collapses
/// it to a single Gaussian by moment matching. Throws std::invalid_argument
/// if the field has fewer entries than components.
MixtureBound mixture_bound(const VoxelErrorField& field, const MixtureParams& params = {});

/// Same fit on raw samples in cm.
MixtureBound fit_mixture_bound(std::vector<double> samples_cm, const MixtureParams& params = {});

struct ScsResult {
  std::optional<double> value;
  std::size_t contributing_voxels = 0;
};

/// Mean coefficient of variation of the W values in each voxel's 26-neighborhood.
/// A voxel contributes when at least two neighbors are in the field. A
/// neighborhood whose W are all zero has no dispersion and contributes 0.
ScsResult scs(const VoxelErrorField& field);

}  // namespace mapeval
