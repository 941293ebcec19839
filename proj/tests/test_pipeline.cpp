#include <doctest.h>

#include <cmath>
#include <thread>

#include "mapeval/parallel.hpp"
#include "mapeval/perturbation.hpp"
#include "mapeval/pipeline.hpp"

using namespace mapeval;

namespace {

PointCloud scene(double density = 40) {
  SceneSpec spec;
  spec.density = density;
  spec.seed = 1;
  return synth_scene(spec);
}

PointCloud noisy(const PointCloud& c, double sigma_cm, std::uint64_t seed = 9) {
  PerturbSpec spec;
  spec.sigma_cm = sigma_cm;
  spec.seed = seed;
  return add_gaussian_noise(c, spec);
}

bool same(const std::optional<double>& a, const std::optional<double>& b, double rel) {
  if (a.has_value() != b.has_value()) return false;
  if (!a) return true;
  return std::abs(*a - *b) <= rel * std::max(std::abs(*a), 1e-300);
}

}  // namespace

TEST_CASE("parallel reductions do not depend on thread count") {
  std::vector<double> v(100000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(static_cast<double>(i)) * 1e3;
  set_thread_count(1);
  const double one = parallel_sum(v.size(), [&](std::size_t i) { return v[i]; });
  set_thread_count(4);
  const double four = parallel_sum(v.size(), [&](std::size_t i) { return v[i]; });
  set_thread_count(0);
  CHECK(one == four);
  CHECK(thread_count() >= 1);
}

TEST_CASE("self-evaluation is a fixed point") {
  const PointCloud gt = scene();
  const EvaluationResult r = evaluate(gt, gt, EvaluationConfig{});
  const auto& m = r.report.metrics;
  CHECK(std::abs(*m.ac_cm) < 1e-6);
  CHECK(std::abs(*m.cd_cm) < 1e-6);
  CHECK(std::abs(*m.awd_cm) < 1e-6);
  CHECK(*m.com == 1.0);
  CHECK(*m.scs == 0.0);
  REQUIRE(r.report.cdf.size() == 1);
  CHECK(r.report.cdf[0].w_cm == 0.0);
  CHECK(r.report.cdf[0].fraction == 1.0);
  for (const auto& c : r.error_map->colors) CHECK(c == Rgb{0, 0, 255});
}

TEST_CASE("noisy evaluation has every metric") {
  // Dense enough that every MME sphere holds ten neighbors.
  const PointCloud gt = scene(400);
  const EvaluationResult r = evaluate(gt, noisy(gt, 1.0), EvaluationConfig{});
  const auto& m = r.report.metrics;
  CHECK(m.ac_cm.has_value());
  CHECK(m.com.has_value());
  CHECK(m.cd_cm.has_value());
  CHECK(m.mme.has_value());
  CHECK(m.scs.has_value());
  CHECK(m.w_bound_cm.has_value());
  REQUIRE(m.awd_cm.has_value());
  CHECK(*m.awd_cm > 0.0);
  CHECK(*m.w_bound_cm >= r.report.mixture->mean_cm);
  CHECK(r.report.counts.matched_voxels == r.report.voxels.size());
  CHECK(r.report.warnings.empty());
}

TEST_CASE("disjoint maps") {
  const PointCloud gt = scene(10);
  const PointCloud far = apply_transform(RigidTransform(Eigen::Matrix3d::Identity(), Eigen::Vector3d(500, 0, 0)), gt);
  const EvaluationResult r = evaluate(gt, far, EvaluationConfig{});
  CHECK_FALSE(r.report.metrics.awd_cm.has_value());
  CHECK_FALSE(r.report.metrics.ac_cm.has_value());
  CHECK_FALSE(r.report.metrics.scs.has_value());
  CHECK_FALSE(r.report.metrics.w_bound_cm.has_value());
  CHECK(*r.report.metrics.com == 0.0);
  CHECK(r.report.cdf.empty());
  CHECK_FALSE(r.report.warnings.empty());
}

TEST_CASE("skipped metrics are absent") {
  const PointCloud gt = scene(10);
  EvaluationConfig c;
  c.skip = {"cd", "mme", "error_map"};
  const EvaluationResult r = evaluate(gt, noisy(gt, 3.0), c);
  CHECK_FALSE(r.report.metrics.cd_cm.has_value());
  CHECK_FALSE(r.report.metrics.mme.has_value());
  CHECK_FALSE(r.error_map.has_value());
  CHECK(r.report.metrics.ac_cm.has_value());
  CHECK(r.report.metrics.awd_cm.has_value());

  c.skip = {"bogus"};
  CHECK_THROWS_AS(evaluate(gt, gt, c), std::invalid_argument);
  c.skip.clear();
  c.voxel_size = 0;
  CHECK_THROWS_AS(evaluate(gt, gt, c), std::invalid_argument);
  CHECK_THROWS_AS(evaluate(PointCloud{}, gt, EvaluationConfig{}), std::invalid_argument);
}

TEST_CASE("results agree across thread counts") {
  const PointCloud gt = scene();
  const PointCloud est = noisy(gt, 5.0);
  EvaluationConfig c;
  c.threads = 1;
  const auto a = evaluate(gt, est, c).report.metrics;
  for (int t : {2, 4, 0}) {
    c.threads = t;
    const auto b = evaluate(gt, est, c).report.metrics;
    CHECK(same(a.ac_cm, b.ac_cm, 1e-9));
    CHECK(same(a.com, b.com, 1e-9));
    CHECK(same(a.cd_cm, b.cd_cm, 1e-9));
    CHECK(same(a.mme, b.mme, 1e-9));
    CHECK(same(a.awd_cm, b.awd_cm, 1e-9));
    CHECK(same(a.scs, b.scs, 1e-9));
    CHECK(same(a.w_bound_cm, b.w_bound_cm, 1e-9));
  }
}

TEST_CASE("registration before scoring") {
  SceneSpec spec;
  spec.extent_x = 12;
  spec.density = 40;
  const PointCloud gt = synth_scene(spec);
  const RigidTransform motion = RigidTransform::from_axis_angle(Eigen::Vector3d::UnitZ(), 0.05, Eigen::Vector3d(0.2, -0.1, 0));
  EvaluationConfig c;
  c.register_first = true;
  const EvaluationResult r = evaluate(gt, apply_transform(motion, gt), c);
  REQUIRE(r.registration.has_value());
  CHECK(*r.report.metrics.ac_cm < 0.1);
  CHECK(*r.report.metrics.com > 0.999);
  CHECK(r.timings.registration > 0.0);
}

TEST_CASE("stage timings") {
  const PointCloud gt = scene();
  const EvaluationResult r = evaluate(gt, noisy(gt, 5.0), EvaluationConfig{});
  const StageTimings& t = r.timings;
  CHECK(t.ac > 0);
  CHECK(t.cd > 0);
  CHECK(t.mme > 0);
  CHECK(t.voxelization > 0);
  CHECK(t.awd > 0);
  CHECK(t.scs > 0);
  CHECK(t.awd < t.voxelization);
  CHECK(r.report.runtimes.classic_metrics == t.ac + t.cd);
}
