#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "mapeval/point_cloud.hpp"
#include "mapeval/registration.hpp"
#include "mapeval/spatial_index.hpp"

namespace mapeval {

/// Mean Euclidean distance over the tau-inlier pairs, in cm. Absent when no
/// pair survived the threshold.
std::optional<double> accuracy(const CorrespondenceSet& corr);

/// Fraction of ground-truth points with an inlier match.
double completeness(const CorrespondenceSet& corr);

/// Sum of the two directional mean nearest-neighbor distances, in cm. No
/// threshold is applied, so far outliers count at full distance.
double chamfer(const PointCloud& gt, const PointCloud& est);

/// Chamfer distance from precomputed nearest neighbors of each direction.
double chamfer(std::span<const Neighbor> gt_to_est, std::span<const Neighbor> est_to_gt);

/// Mean nearest-neighbor distance in meters, summed in fixed block order.
double mean_distance(std::span<const Neighbor> nn);

enum class EntropyFormula {
  /// h = 1/2 ln det(2 pi e S) of the regularized local covariance.
  kDifferentialEntropy,
  /// -ln(lambda_min) of the regularized local covariance.
  kSmallestEigenvalue,
};

struct MmeParams {
  double radius = 0.1;             // m
  std::size_t min_neighbors = 10;  // including the query point itself
  EntropyFormula formula = EntropyFormula::kDifferentialEntropy;
};

struct MmeResult {
  std::optional<double> value;
  std::size_t valid_points = 0;
  std::size_t excluded_points = 0;
};

/// Mean Map Entropy over points with at least min_neighbors points inside the
/// search radius. Local covariances use the unbiased (n - 1) normalization.
MmeResult mean_map_entropy(const PointCloud& cloud, const SpatialIndex& index, const MmeParams& params = {});
MmeResult mean_map_entropy(const PointCloud& cloud, const MmeParams& params = {});

}  // namespace mapeval
