#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mapeval/point_cloud.hpp"

namespace mapeval {

struct Neighbor {
  std::uint32_t id = 0;
  double distance_sq = 0.0;

  double distance() const { return std::sqrt(distance_sq); }
};

/// Balanced KD-tree over a fixed point set. Immutable after construction, so
/// concurrent queries are safe. Ties at equal distance resolve to the lowest
/// point id, which makes every query result unique.
class SpatialIndex {
 public:
  /// Throws std::invalid_argument for an empty point set.
  explicit SpatialIndex(std::span<const Point3> points);
  explicit SpatialIndex(const PointCloud& cloud) : SpatialIndex(std::span<const Point3>(cloud.points)) {}

  std::size_t size() const { return points_.size(); }

  Neighbor nearest(const Point3& q) const;
  /// The k closest points ordered by (distance, id).
  std::vector<Neighbor> knn(const Point3& q, std::size_t k) const;
  /// Ids of all points within distance r (inclusive), sorted by id.
  std::vector<std::uint32_t> radius_neighbors(const Point3& q, double r) const;
  /// Number of points within distance r, without collecting them.
  std::size_t radius_count(const Point3& q, double r) const;

  /// Calls f(id, point) for every point within distance r, in tree order.
  template <typename F>
  void for_each_in_radius(const Point3& q, double r, F&& f) const {
    auto visit = [&](std::uint32_t slot) { f(ids_[slot], points_[slot]); };
    radius_in(0, q, r * r, visit);
  }

 private:
  struct Node {
    double split = 0.0;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;  // -1 marks a leaf
    std::int32_t right = -1;
    std::uint8_t axis = 0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void nearest_in(std::int32_t node, const Point3& q, Neighbor& best) const;

  template <typename Visit>
  void radius_in(std::int32_t index, const Point3& q, double r2, Visit& visit) const {
    const Node& node = nodes_[static_cast<std::size_t>(index)];
    if (node.left < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        if ((points_[i] - q).squaredNorm() <= r2) visit(i);
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const std::int32_t near = diff < 0 ? node.left : node.right;
    const std::int32_t far = diff < 0 ? node.right : node.left;
    radius_in(near, q, r2, visit);
    if (diff * diff <= r2) radius_in(far, q, r2, visit);
  }

  // Points reordered into leaf order, with their original ids.
  std::vector<Point3> points_;
  std::vector<std::uint32_t> ids_;
  std::vector<Node> nodes_;
};

/// Unit normals from k-nearest-neighbor PCA. Invalid entries come from
/// neighborhoods without a plane (collinear or coincident points).
struct NormalCloud {
  std::vector<Eigen::Vector3d> normals;
  std::vector<std::uint8_t> valid;

  std::size_t size() const { return normals.size(); }
  std::size_t valid_count() const;
};

inline constexpr std::size_t kDefaultNormalNeighbors = 20;

/// Normal = eigenvector of the smallest eigenvalue of the k-NN covariance,
/// signed so that n_z > 0 (ties fall through to n_y, then n_x).
NormalCloud estimate_normals(const PointCloud& cloud, const SpatialIndex& index,
                             std::size_t k = kDefaultNormalNeighbors);
NormalCloud estimate_normals(const PointCloud& cloud, std::size_t k = kDefaultNormalNeighbors);

/// Flips n into the canonical half-space described above.
Eigen::Vector3d canonical_normal_sign(const Eigen::Vector3d& n);

}  // namespace mapeval
