#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <tuple>
#include <vector>

#include "mapeval/error.hpp"
#include "mapeval/voxel_metrics.hpp"
#include "support.hpp"

using namespace mapeval;

namespace {

VoxelGridParams grid_params(double s, std::size_t min_points = 10) {
  VoxelGridParams p;
  p.voxel_size = s;
  p.min_points = min_points;
  return p;
}

VoxelErrorField field_of(const std::vector<std::tuple<int, int, int, double>>& rows) {
  VoxelErrorField f;
  for (const auto& [x, y, z, w] : rows) f.entries.push_back({{x, y, z}, w, 10, 10});
  std::sort(f.entries.begin(), f.entries.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  return f;
}

double population_cv(const std::vector<double>& w) {
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  double var = 0.0;
  for (double v : w) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(w.size())) / mean;
}

// Points uniform in the central half of each voxel of a 6x6x6 block.
PointCloud voxel_clusters(double s, int per_voxel, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PointCloud c;
  for (int x = 0; x < 6; ++x)
    for (int y = 0; y < 6; ++y)
      for (int z = 0; z < 6; ++z)
        for (int i = 0; i < per_voxel; ++i) {
          c.points.emplace_back(s * (x + testing::uniform(rng, 0.25, 0.75)), s * (y + testing::uniform(rng, 0.25, 0.75)),
                                s * (z + testing::uniform(rng, 0.25, 0.75)));
        }
  return c;
}

PointCloud translated(const PointCloud& c, const Eigen::Vector3d& d) {
  return apply_transform(RigidTransform(Eigen::Matrix3d::Identity(), d), c);
}

}  // namespace

TEST_CASE("two points in one voxel") {
  PointCloud c;
  c.points = {Point3(0.2, 0.3, 0.4), Point3(0.6, 0.5, 0.4)};
  const VoxelGrid g = voxelize(c, grid_params(1.0, 4));
  CHECK(g.voxels.empty());
  CHECK(g.discarded_voxels == 1);
  CHECK(g.discarded_points == 2);

  // min_points cannot go below 4, so check the analytic form on four points:
  // two pairs of coincident points.
  c.points = {Point3(0.2, 0.3, 0.4), Point3(0.2, 0.3, 0.4), Point3(0.6, 0.5, 0.4), Point3(0.6, 0.5, 0.4)};
  const VoxelGrid g4 = voxelize(c, grid_params(1.0, 4));
  REQUIRE(g4.voxels.size() == 1);
  const GaussianVoxel& v = g4.voxels[0];
  CHECK((v.gaussian.mean - Point3(0.4, 0.4, 0.4)).norm() < 1e-15);
  // Sum of squared deviations is 4 * (d/2)(d/2)^T = d d^T; divided by n - 1 = 3.
  const Eigen::Vector3d d(0.4, 0.2, 0.0);
  const Eigen::Matrix3d expect = d * d.transpose() / 3.0 + kCovarianceEpsilon * Eigen::Matrix3d::Identity();
  CHECK((v.gaussian.covariance.matrix() - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("floor division sends negatives to the lower voxel") {
  CHECK(voxel_index_of(Point3(-0.01, 0, 0), 1.0) == VoxelIndex{-1, 0, 0});
  CHECK(voxel_index_of(Point3(0.01, 0, 0), 1.0) == VoxelIndex{0, 0, 0});
  CHECK(voxel_index_of(Point3(-3.0, 2.999, 3.0), 3.0) == VoxelIndex{-1, 0, 1});
  CHECK(voxel_index_of(Point3(1.5, 0, 0), 1.0, Point3(1.0, 0, 0)) == VoxelIndex{0, 0, 0});
  CHECK_THROWS_AS(voxel_index_of(Point3(1e300, 0, 0), 1.0), NumericError);
}

TEST_CASE("voxelize equals a group-by oracle") {
  std::mt19937_64 rng(99);
  const PointCloud c = testing::random_cloud(rng, 100000, -3, 3);
  const VoxelGrid g = voxelize(c, grid_params(0.5));

  std::map<std::tuple<int, int, int>, std::vector<Point3>> groups;
  for (const Point3& p : c.points) {
    groups[{static_cast<int>(std::floor(p.x() / 0.5)), static_cast<int>(std::floor(p.y() / 0.5)),
            static_cast<int>(std::floor(p.z() / 0.5))}]
        .push_back(p);
  }
  std::size_t kept = 0;
  for (const auto& [key, pts] : groups) {
    const VoxelIndex idx{std::get<0>(key), std::get<1>(key), std::get<2>(key)};
    const GaussianVoxel* v = g.find(idx);
    if (pts.size() < 10) {
      CHECK(v == nullptr);
      continue;
    }
    ++kept;
    REQUIRE(v != nullptr);
    CHECK(v->count == pts.size());
    Point3 mean = Point3::Zero();
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
    cov /= static_cast<double>(pts.size() - 1);
    cov += kCovarianceEpsilon * Eigen::Matrix3d::Identity();
    CHECK((v->gaussian.mean - mean).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((v->gaussian.covariance.matrix() - cov).cwiseAbs().maxCoeff() < 1e-9);

    // The mean lies inside its voxel.
    for (int a = 0; a < 3; ++a) {
      const int i = a == 0 ? idx.x : a == 1 ? idx.y : idx.z;
      CHECK(v->gaussian.mean[a] >= 0.5 * i);
      CHECK(v->gaussian.mean[a] <= 0.5 * (i + 1));
    }
  }
  CHECK(kept == g.voxels.size());
  CHECK(std::is_sorted(g.voxels.begin(), g.voxels.end(), [](const auto& a, const auto& b) { return a.index < b.index; }));
}

TEST_CASE("voxel field basics") {
  std::mt19937_64 rng(5);
  const PointCloud c = testing::random_cloud(rng, 20000, 0, 4);
  const VoxelGrid g = voxelize(c, grid_params(1.0));
  const VoxelErrorField self = voxel_wasserstein_field(g, g);
  CHECK(self.size() == g.voxels.size());
  for (const auto& e : self.entries) CHECK(e.w_m == 0.0);
  CHECK(*awd(self) == 0.0);

  const VoxelGrid far = voxelize(translated(c, Eigen::Vector3d(100, 0, 0)), grid_params(1.0));
  const VoxelErrorField disjoint = voxel_wasserstein_field(g, far);
  CHECK(disjoint.empty());
  CHECK(disjoint.gt_only_voxels == g.voxels.size());
  CHECK_FALSE(awd(disjoint).has_value());

  CHECK_THROWS_AS(voxel_wasserstein_field(g, voxelize(c, grid_params(2.0))), std::invalid_argument);
}

TEST_CASE("small shift moves interior voxel means") {
  const double s = 1.0;
  const PointCloud gt = voxel_clusters(s, 200, 1);
  const Eigen::Vector3d delta(0.03, -0.02, 0.01);
  const VoxelErrorField f =
      voxel_wasserstein_field(voxelize(gt, grid_params(s)), voxelize(translated(gt, delta), grid_params(s)));
  REQUIRE(f.size() == 216);
  for (const auto& e : f.entries) CHECK(std::abs(e.w_m - delta.norm()) < 0.1 * delta.norm());

  // Translation with s >= 10 |delta| keeps AWD within 20% of |delta|.
  CHECK(*awd(f) >= 80.0 * delta.norm());
  CHECK(*awd(f) <= 120.0 * delta.norm());
}

TEST_CASE("AWD is invariant under grid-preserving motions") {
  const double s = 0.5;
  std::mt19937_64 rng(3);
  const PointCloud gt = testing::random_cloud(rng, 50000, -2, 2);
  PointCloud est = gt;
  std::normal_distribution<double> noise(0.0, 0.02);
  for (auto& p : est.points) p += Point3(noise(rng), noise(rng), noise(rng));

  Eigen::Matrix3d quarter;
  quarter << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const RigidTransform t(quarter, Eigen::Vector3d(2 * s, -3 * s, s));
  const double a = *awd(voxel_wasserstein_field(voxelize(gt, grid_params(s)), voxelize(est, grid_params(s))));
  const double b = *awd(voxel_wasserstein_field(voxelize(apply_transform(t, gt), grid_params(s)),
                                                voxelize(apply_transform(t, est), grid_params(s))));
  CHECK(std::abs(a - b) <= 1e-9 * a);
}

TEST_CASE("awd of a two-entry field") {
  CHECK(*awd(field_of({{0, 0, 0, 0.01}, {1, 0, 0, 0.03}})) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("empirical CDF counting") {
  const EmpiricalCdf single = empirical_cdf(field_of({{0, 0, 0, 0.05}}));
  REQUIRE(single.steps.size() == 1);
  CHECK(single.steps[0].fraction == 1.0);
  CHECK(single(5.0) == 1.0);

  const EmpiricalCdf c = empirical_cdf(field_of({{0, 0, 0, 0.01}, {1, 0, 0, 0.01}, {2, 0, 0, 0.03}}));
  CHECK(c(1.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(c(3.0) == 1.0);
  CHECK(c(0.5) == 0.0);

  std::mt19937_64 rng(8);
  std::vector<std::tuple<int, int, int, double>> rows;
  for (int i = 0; i < 500; ++i) rows.emplace_back(i, 0, 0, 0.001 * static_cast<double>(rng() % 50));
  const VoxelErrorField f = field_of(rows);
  const EmpiricalCdf cdf = empirical_cdf(f);
  CHECK(cdf.steps.back().fraction == 1.0);
  for (const auto& e : f.entries) {
    const double w = 100.0 * e.w_m;
    std::size_t le = 0;
    for (const auto& o : f.entries) le += 100.0 * o.w_m <= w ? 1 : 0;
    const double mf = cdf(w) * 500.0;
    CHECK(mf == doctest::Approx(static_cast<double>(le)).epsilon(1e-12));
    CHECK(std::abs(mf - std::round(mf)) < 1e-9);
  }
  for (std::size_t i = 1; i < cdf.steps.size(); ++i) {
    CHECK(cdf.steps[i].w_cm > cdf.steps[i - 1].w_cm);
    CHECK(cdf.steps[i].fraction > cdf.steps[i - 1].fraction);
  }
}

TEST_CASE("mixture bound with one component is the sample moments") {
  std::mt19937_64 rng(4);
  std::vector<double> x;
  for (int i = 0; i < 300; ++i) x.push_back(testing::uniform(rng, 0, 10));
  MixtureParams p;
  p.components = 1;
  const MixtureBound b = fit_mixture_bound(x, p);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / 300.0;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / 300.0);
  CHECK(b.mean_cm == doctest::Approx(mean).epsilon(1e-12));
  CHECK(b.stddev_cm == doctest::Approx(sd).epsilon(1e-9));
  CHECK(b.bound_cm == doctest::Approx(mean + 3 * sd).epsilon(1e-9));
}

TEST_CASE("mixture bound on two clusters matches pooled moments") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> a(1.0, 0.1), c(10.0, 0.5);
  std::vector<double> x;
  for (int i = 0; i < 50; ++i) x.push_back(a(rng));
  for (int i = 0; i < 50; ++i) x.push_back(c(rng));
  const MixtureBound b = fit_mixture_bound(x);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / 100.0;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / 100.0);
  CHECK(std::abs(b.mean_cm - mean) < 0.01 * mean);
  CHECK(std::abs(b.stddev_cm - sd) < 0.01 * sd);
  REQUIRE(b.components.size() == 2);
  double wsum = 0.0;
  for (const auto& k : b.components) wsum += k.weight;
  CHECK(std::abs(wsum - 1.0) < 1e-9);
  CHECK(b.bound_cm >= b.mean_cm);
  CHECK(b.iterations <= 200);
}

TEST_CASE("mixture bound degenerate inputs") {
  const MixtureBound b = fit_mixture_bound(std::vector<double>(20, 4.0));
  CHECK(b.mean_cm == doctest::Approx(4.0));
  CHECK(b.stddev_cm == doctest::Approx(std::sqrt(1e-12)));
  CHECK(b.bound_cm == doctest::Approx(4.0).epsilon(1e-5));
  CHECK_THROWS_AS(fit_mixture_bound({1.0}), std::invalid_argument);
  CHECK_THROWS_AS(mixture_bound(VoxelErrorField{}), std::invalid_argument);
}

TEST_CASE("SCS on constant fields") {
  std::vector<std::tuple<int, int, int, double>> rows;
  for (int x = 0; x < 4; ++x)
    for (int y = 0; y < 4; ++y) rows.emplace_back(x, y, 0, 0.07);
  CHECK(*scs(field_of(rows)).value == 0.0);
  CHECK(*scs(field_of({{0, 0, 0, 0.02}, {1, 0, 0, 0.02}, {2, 0, 0, 0.02}})).value == 0.0);
}

TEST_CASE("SCS on a 3x3 sheet equals the hand-enumerated neighborhoods") {
  // W (m) laid out as rows y = 0..2: 1 2 3 / 4 5 6 / 7 8 9.
  std::vector<std::tuple<int, int, int, double>> rows;
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) rows.emplace_back(x, y, 0, 1.0 + x + 3 * y);
  const ScsResult r = scs(field_of(rows));
  const std::vector<std::vector<double>> neighborhoods = {
      {2, 4, 5},          {1, 3, 4, 5, 6}, {2, 5, 6},
      {1, 2, 5, 7, 8},    {1, 2, 3, 4, 6, 7, 8, 9}, {2, 3, 5, 8, 9},
      {4, 5, 8},          {4, 5, 6, 7, 9}, {5, 6, 8}};
  double expected = 0.0;
  for (const auto& n : neighborhoods) expected += population_cv(n);
  expected /= 9.0;
  CHECK(r.contributing_voxels == 9);
  CHECK(*r.value == doctest::Approx(expected).epsilon(1e-12));

  // Coefficient of variation ignores a common scale.
  std::vector<std::tuple<int, int, int, double>> scaled = rows;
  for (auto& row : scaled) std::get<3>(row) *= 0.37;
  CHECK(std::abs(*scs(field_of(scaled)).value - *r.value) < 1e-9);
}

TEST_CASE("SCS needs two neighbors") {
  const ScsResult lonely = scs(field_of({{0, 0, 0, 0.01}, {5, 5, 5, 0.02}}));
  CHECK_FALSE(lonely.value.has_value());
  CHECK(lonely.contributing_voxels == 0);
  // Chain of three: only the middle voxel has two neighbors.
  const ScsResult chain = scs(field_of({{0, 0, 0, 0.01}, {1, 0, 0, 0.05}, {2, 0, 0, 0.03}}));
  CHECK(chain.contributing_voxels == 1);
  CHECK(*chain.value == doctest::Approx(0.5).epsilon(1e-12));  // neighbors {1, 3}: sd 1, mean 2
  CHECK(*scs(field_of({{0, 0, 0, 0}, {1, 0, 0, 0}, {2, 0, 0, 0}})).value == 0.0);
}
