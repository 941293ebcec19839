#include "mapeval/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace mapeval {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

__extension__ using u128 = unsigned __int128;

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

// ceil(x), except values within rounding noise of an integer snap to it.
std::size_t ceil_snapped(double x) {
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::ceil(x));
}

void validate(const PerturbSpec& spec) {
  if (!(spec.fraction > 0.0 && spec.fraction <= 1.0)) throw std::invalid_argument("fraction must be in (0, 1]");
  if (!(spec.sigma_cm > 0.0)) throw std::invalid_argument("sigma must be positive");
}

PointCloud displace(const PointCloud& cloud, const PerturbSpec& spec) {
  validate(spec);
  Xoshiro256 rng(spec.seed);
  const auto ids = sample_without_replacement(cloud.size(), affected_count(cloud.size(), spec.fraction), rng);
  const double sigma_m = spec.sigma_cm / 100.0;
  PointCloud out = cloud;
  for (std::size_t id : ids) {
    const double dx = rng.normal();
    const double dy = rng.normal();
    const double dz = rng.normal();
    out.points[id] += sigma_m * Eigen::Vector3d(dx, dy, dz);
  }
  return out;
}

}  // namespace

Xoshiro256::Xoshiro256(std::uint64_t seed) {
  for (auto& word : s_) word = splitmix64(seed);
}

std::uint64_t Xoshiro256::next() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Xoshiro256::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::uint64_t Xoshiro256::below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("bound must be positive");
  u128 m = static_cast<u128>(next()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<u128>(next()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double Xoshiro256::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::size_t affected_count(std::size_t n, double fraction) {
  return std::min(n, ceil_snapped(fraction * static_cast<double>(n)));
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Xoshiro256& rng) {
  if (k > n) throw std::invalid_argument("sample larger than population");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(perm[i], perm[j]);
  }
  perm.resize(k);
  std::sort(perm.begin(), perm.end());
  return perm;
}

PointCloud add_gaussian_noise(const PointCloud& cloud, const PerturbSpec& spec) {
  if (spec.mode != PerturbMode::kNoise) throw std::invalid_argument("spec mode is not noise");
  return displace(cloud, spec);
}

PointCloud inject_outliers(const PointCloud& cloud, const PerturbSpec& spec) {
  if (spec.mode != PerturbMode::kOutlier) throw std::invalid_argument("spec mode is not outlier");
  return displace(cloud, spec);
}

PointCloud perturb(const PointCloud& cloud, const PerturbSpec& spec) {
  return spec.mode == PerturbMode::kNoise ? add_gaussian_noise(cloud, spec) : inject_outliers(cloud, spec);
}

std::vector<SceneFace> scene_faces(const SceneSpec& spec) {
  if (!(spec.extent_x > 0 && spec.extent_y > 0 && spec.extent_z > 0)) {
    throw std::invalid_argument("scene extents must be positive");
  }
  const double x = spec.extent_x, y = spec.extent_y, z = spec.extent_z;
  const double x0 = -0.5 * x, y0 = -0.5 * y;
  const Eigen::Vector3d ux(x, 0, 0), uy(0, y, 0), uz(0, 0, z);

  std::vector<SceneFace> faces;
  if (spec.kind == SceneKind::kPlanarSheet) {
    faces.push_back({Point3(x0, y0, 0), ux, uy, 2});
    return faces;
  }
  faces.push_back({Point3(x0, y0, 0), ux, uy, 2});      // floor
  faces.push_back({Point3(x0, y0, z), ux, uy, 2});      // ceiling
  faces.push_back({Point3(x0, y0, 0), ux, uz, 1});      // side wall y-
  faces.push_back({Point3(x0, -y0, 0), ux, uz, 1});     // side wall y+
  if (spec.kind == SceneKind::kBoxRoom) {
    faces.push_back({Point3(x0, y0, 0), uy, uz, 0});    // end wall x-
    faces.push_back({Point3(-x0, y0, 0), uy, uz, 0});   // end wall x+
  }
  for (auto& f : faces) f.origin += spec.offset;
  return faces;
}

PointCloud synth_scene(const SceneSpec& spec) {
  if (!(spec.density > 0)) throw std::invalid_argument("scene density must be positive");
  const auto faces = scene_faces(spec);
  double total_area = 0.0;
  for (const auto& f : faces) total_area += f.area();
  const std::size_t total = ceil_snapped(total_area * spec.density);

  // Largest-remainder split of the total across faces.
  std::vector<std::size_t> counts(faces.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const double share = static_cast<double>(total) * faces[i].area() / total_area;
    counts[i] = static_cast<std::size_t>(std::floor(share));
    assigned += counts[i];
    remainders.emplace_back(share - std::floor(share), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++counts[remainders[i % remainders.size()].second];

  Xoshiro256 rng(spec.seed);
  PointCloud cloud;
  cloud.points.reserve(total);
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const SceneFace& f = faces[i];
    for (std::size_t j = 0; j < counts[i]; ++j) {
      const double a = rng.uniform();
      const double b = rng.uniform();
      Point3 p = f.origin + a * f.u + b * f.v;
      p[f.normal_axis] = f.origin[f.normal_axis];
      cloud.points.push_back(p);
    }
  }
  return cloud;
}

}  // namespace mapeval
