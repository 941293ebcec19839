#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mapeval/geometry.hpp"
#include "mapeval/point_cloud.hpp"
#include "mapeval/spatial_index.hpp"

namespace mapeval {

struct IcpParams {
  int max_iterations = 50;
  double translation_epsilon = 1e-4;  // m
  double rotation_epsilon = 1e-4;     // rad
  double max_correspondence_distance = 1.0;  // m
  std::size_t normal_neighbors = kDefaultNormalNeighbors;
};

struct IcpResult {
  RigidTransform transform;
  int iterations = 0;
  double rms_residual = 0.0;  // point-to-plane, m
  std::size_t correspondences = 0;
  bool converged = false;
  /// RMS residual measured at the start of every accepted iteration.
  std::vector<double> residual_history;
};

/// Point-to-plane ICP: estimates T minimizing sum_j ((T p_j - g_k) . n_k)^2,
/// where g_k is the ground-truth point nearest to T p_j and n_k its normal.
/// Each iteration re-associates correspondences within the gating distance,
/// solves the 6x6 Gauss-Newton system for a small-angle increment and
/// composes it on the left. An iteration whose residual exceeds the previous
/// one is rejected and ends the loop.
///
/// Throws RegistrationError when an iteration has fewer than 6 usable
/// correspondences or the normal system is singular (condition > 1e12).
IcpResult icp_point_to_plane(const PointCloud& est, const PointCloud& gt, const RigidTransform& init,
                             const IcpParams& params = {});

/// Overload reusing a prebuilt ground-truth index and normals.
IcpResult icp_point_to_plane(const PointCloud& est, const PointCloud& gt, const SpatialIndex& gt_index,
                             const NormalCloud& gt_normals, const RigidTransform& init,
                             const IcpParams& params = {});

struct Correspondence {
  std::uint32_t gt_id = 0;
  std::uint32_t est_id = 0;
  double distance = 0.0;  // m
};

/// Ground-truth anchored matches: for each gt point its nearest est point,
/// kept when closer than tau.
struct CorrespondenceSet {
  std::vector<Correspondence> pairs;  // ascending gt_id
  std::size_t gt_count = 0;
  std::size_t est_count = 0;
  double tau = 0.0;
};

inline constexpr double kDefaultTau = 0.2;

CorrespondenceSet build_correspondences(const PointCloud& gt, const PointCloud& est, double tau);

/// Same, from precomputed gt->est nearest neighbors (one per gt point).
CorrespondenceSet build_correspondences(std::span<const Neighbor> gt_to_est, std::size_t est_count, double tau);

/// Nearest neighbor in `index` for every query point.
std::vector<Neighbor> nearest_neighbors(const PointCloud& queries, const SpatialIndex& index);

}  // namespace mapeval
