#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "mapeval/point_cloud.hpp"

namespace mapeval {

/// xoshiro256** 1.0 (Blackman & Vigna), seeded by expanding a 64-bit seed
/// with SplitMix64. Output is identical on every platform.
class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed);

  std::uint64_t next();
  /// Uniform double in [0, 1) from the top 53 bits.
  double uniform();
  /// Uniform integer in [0, bound), unbiased (Lemire's multiply-and-reject).
  std::uint64_t below(std::uint64_t bound);
  /// Standard normal via the Box-Muller transform; the sine branch of each
  /// pair is cached and returned by the following call.
  double normal();

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

enum class PerturbMode { kNoise, kOutlier };

struct PerturbSpec {
  PerturbMode mode = PerturbMode::kNoise;
  double fraction = 1.0;     // of points displaced, in (0, 1]
  double sigma_cm = 1.0;     // per-axis standard deviation
  std::uint64_t seed = 0;
};

/// ceil(fraction * n), computed so that exact products do not round up.
std::size_t affected_count(std::size_t n, double fraction);

/// Ids of a uniform random subset of size k (partial Fisher-Yates), ascending.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Xoshiro256& rng);

/// Displaces a random ceil(fraction * N) subset by independent zero-mean
/// Gaussian offsets of per-axis sigma. Other points are copied bit-exact.
PointCloud add_gaussian_noise(const PointCloud& cloud, const PerturbSpec& spec);

/// Same mechanism with outlier-scale sigma; displaced points stay in the cloud.
PointCloud inject_outliers(const PointCloud& cloud, const PerturbSpec& spec);

/// Dispatches on spec.mode.
PointCloud perturb(const PointCloud& cloud, const PerturbSpec& spec);

enum class SceneKind { kBoxRoom, kPlanarSheet, kCorridor };

/// Box-room: the six inner faces of an axis-aligned box spanning
/// [-x/2, x/2] x [-y/2, y/2] x [0, z], moved by `offset`. Corridor: the same
/// box without its two end walls. Planar sheet: [-x/2, x/2] x [-y/2, y/2] at
/// z = 0, never offset.
struct SceneSpec {
  SceneKind kind = SceneKind::kBoxRoom;
  double extent_x = 30.0;
  double extent_y = 7.0;
  double extent_z = 4.0;
  double density = 100.0;  // points per m^2
  std::uint64_t seed = 0;
  // Faces lying exactly on voxel boundaries split noisy points between two
  // voxels and inflate every voxel metric; the default keeps them off the
  // boundaries of common voxel sizes.
  Point3 offset = Point3(0.137, 0.291, 0.173);
};

struct SceneFace {
  Point3 origin;
  Eigen::Vector3d u;  // spans the face: origin + a u + b v, a, b in [0, 1]
  Eigen::Vector3d v;
  int normal_axis = 2;
  double area() const { return u.norm() * v.norm(); }
};

std::vector<SceneFace> scene_faces(const SceneSpec& spec);

/// Uniform surface samples; ceil(total area * density) points split across
/// faces in proportion to area (largest remainder).
PointCloud synth_scene(const SceneSpec& spec);

}  // namespace mapeval
