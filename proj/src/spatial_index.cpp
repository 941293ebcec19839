#include "mapeval/spatial_index.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "mapeval/parallel.hpp"

namespace mapeval {

namespace {

constexpr std::uint32_t kLeafSize = 12;

bool closer(const Neighbor& a, const Neighbor& b) {
  return a.distance_sq < b.distance_sq || (a.distance_sq == b.distance_sq && a.id < b.id);
}

}  // namespace

SpatialIndex::SpatialIndex(std::span<const Point3> points) {
  if (points.empty()) throw std::invalid_argument("cannot index an empty point set");
  if (points.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw std::invalid_argument("point set too large for 32-bit ids");
  }
  ids_.resize(points.size());
  std::iota(ids_.begin(), ids_.end(), 0u);

  points_.assign(points.begin(), points.end());
  nodes_.reserve(2 * (points.size() / kLeafSize + 1));
  build(0, static_cast<std::uint32_t>(points.size()));

  // Lay the points out in leaf order.
  std::vector<Point3> ordered(points_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) ordered[i] = points[ids_[i]];
  points_ = std::move(ordered);
}

std::int32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({0.0, begin, end, -1, -1, 0});
  if (end - begin <= kLeafSize) return id;

  // ids_ indexes into points_, which is still in input order here.
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[ids_[i]]);
    hi = hi.cwiseMax(points_[ids_[i]]);
  }
  Eigen::Index axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all points coincide

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(ids_.begin() + begin, ids_.begin() + mid, ids_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
  const double split = points_[ids_[mid]][axis];

  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  Node& node = nodes_[static_cast<std::size_t>(id)];
  node.split = split;
  node.axis = static_cast<std::uint8_t>(axis);
  node.left = left;
  node.right = right;
  return id;
}

void SpatialIndex::nearest_in(std::int32_t index, const Point3& q, Neighbor& best) const {
  const Node& node = nodes_[static_cast<std::size_t>(index)];
  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const Neighbor cand{ids_[i], (points_[i] - q).squaredNorm()};
      if (closer(cand, best)) best = cand;
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const std::int32_t near = diff < 0 ? node.left : node.right;
  const std::int32_t far = diff < 0 ? node.right : node.left;
  nearest_in(near, q, best);
  if (diff * diff <= best.distance_sq) nearest_in(far, q, best);
}

Neighbor SpatialIndex::nearest(const Point3& q) const {
  Neighbor best{std::numeric_limits<std::uint32_t>::max(), std::numeric_limits<double>::infinity()};
  nearest_in(0, q, best);
  return best;
}

std::vector<Neighbor> SpatialIndex::knn(const Point3& q, std::size_t k) const {
  k = std::min(k, size());
  if (k == 0) return {};
  // Max-heap on (distance, id): the top is the current k-th best.
  std::priority_queue<Neighbor, std::vector<Neighbor>, decltype(&closer)> heap(&closer);

  auto visit = [&](auto&& self, std::int32_t index) -> void {
    const Node& node = nodes_[static_cast<std::size_t>(index)];
    if (node.left < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const Neighbor cand{ids_[i], (points_[i] - q).squaredNorm()};
        if (heap.size() < k) {
          heap.push(cand);
        } else if (closer(cand, heap.top())) {
          heap.pop();
          heap.push(cand);
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    self(self, diff < 0 ? node.left : node.right);
    if (heap.size() < k || diff * diff <= heap.top().distance_sq) self(self, diff < 0 ? node.right : node.left);
  };
  visit(visit, 0);

  std::vector<Neighbor> out(heap.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = heap.top();
    heap.pop();
  }
  return out;
}

std::vector<std::uint32_t> SpatialIndex::radius_neighbors(const Point3& q, double r) const {
  std::vector<std::uint32_t> out;
  auto visit = [&](std::uint32_t slot) { out.push_back(ids_[slot]); };
  radius_in(0, q, r * r, visit);
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t SpatialIndex::radius_count(const Point3& q, double r) const {
  std::size_t n = 0;
  auto visit = [&](std::uint32_t) { ++n; };
  radius_in(0, q, r * r, visit);
  return n;
}

std::size_t NormalCloud::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

Eigen::Vector3d canonical_normal_sign(const Eigen::Vector3d& n) {
  // Components at rounding level count as zero so noise cannot flip the sign.
  constexpr double kZero = 1e-9;
  for (int axis : {2, 1, 0}) {
    if (n[axis] > kZero) return n;
    if (n[axis] < -kZero) return -n;
  }
  return n;
}

NormalCloud estimate_normals(const PointCloud& cloud, const SpatialIndex& index, std::size_t k) {
  if (k < 3) throw std::invalid_argument("normal estimation needs k >= 3");
  if (cloud.size() < k) throw std::invalid_argument("cloud has fewer points than k");

  NormalCloud out;
  out.normals.assign(cloud.size(), Eigen::Vector3d::Zero());
  out.valid.assign(cloud.size(), 0);
  parallel_blocks(cloud.size(), 1024, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto nbrs = index.knn(cloud.points[i], k);
      Eigen::Vector3d mean = Eigen::Vector3d::Zero();
      for (const Neighbor& nb : nbrs) mean += cloud.points[nb.id];
      mean /= static_cast<double>(nbrs.size());
      Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
      for (const Neighbor& nb : nbrs) {
        const Eigen::Vector3d d = cloud.points[nb.id] - mean;
        cov.noalias() += d * d.transpose();
      }
      cov /= static_cast<double>(nbrs.size());

      const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
      const Eigen::Vector3d& ev = solver.eigenvalues();
      // Rank < 2: the neighborhood spans at most a line.
      if (!(ev[1] > 1e-12 * std::max(ev[2], 1e-300))) continue;
      out.normals[i] = canonical_normal_sign(solver.eigenvectors().col(0).normalized());
      out.valid[i] = 1;
    }
  });
  return out;
}

NormalCloud estimate_normals(const PointCloud& cloud, std::size_t k) {
  return estimate_normals(cloud, SpatialIndex(cloud), k);
}

}  // namespace mapeval
