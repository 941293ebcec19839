#include "mapeval/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "mapeval/classic_metrics.hpp"
#include "mapeval/cloud_io.hpp"
#include "mapeval/parallel.hpp"
#include "mapeval/spatial_index.hpp"
#include "mapeval/voxel_metrics.hpp"

namespace mapeval {

namespace {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - start_).count();
    start_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

void validate_config(const EvaluationConfig& config) {
  if (!(config.tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (!(config.voxel_size > 0.0)) throw std::invalid_argument("voxel size must be positive");
  if (!(config.mme_radius > 0.0)) throw std::invalid_argument("MME radius must be positive");
  if (config.min_voxel_points < 4) throw std::invalid_argument("min voxel points must be at least 4");
  if (config.gmm_k < 1) throw std::invalid_argument("mixture component count must be at least 1");
  if (config.threads < 0) throw std::invalid_argument("thread count must be non-negative");
  for (const std::string& name : config.skip) {
    if (std::find(kMetricNames.begin(), kMetricNames.end(), name) == kMetricNames.end()) {
      throw std::invalid_argument("unknown metric '" + name + "' in skip list");
    }
  }
}

EvaluationResult evaluate(const PointCloud& gt, const PointCloud& est_input, const EvaluationConfig& config) {
  validate_config(config);
  if (gt.empty()) throw std::invalid_argument("ground-truth cloud is empty");
  if (est_input.empty()) throw std::invalid_argument("estimated cloud is empty");
  set_thread_count(config.threads);

  EvaluationResult result;
  EvaluationReport& report = result.report;
  report.config = {config.tau, config.voxel_size, config.mme_radius, config.min_voxel_points, config.gmm_k,
                   config.seed};
  report.counts.gt_points = gt.size();
  report.counts.est_points = est_input.size();
  if (config.tau > 10.0) report.warnings.push_back("tau exceeds 10 m; check units");

  const bool want_ac = config.enabled("ac") || config.enabled("com");
  const bool want_cd = config.enabled("cd");
  const bool want_map = config.enabled("error_map");
  const bool want_voxels = config.enabled("awd") || config.enabled("scs") || config.enabled("w_bound");

  Stopwatch clock;
  std::optional<SpatialIndex> gt_index;
  PointCloud registered;
  const PointCloud* est = &est_input;
  if (config.register_first) {
    gt_index.emplace(gt);
    const NormalCloud normals = estimate_normals(gt, *gt_index, config.icp.normal_neighbors);
    result.registration = icp_point_to_plane(est_input, gt, *gt_index, normals, config.init_pose, config.icp);
    registered = apply_transform(result.registration->transform, est_input);
    est = &registered;
    result.timings.registration = clock.lap();
    if (!result.registration->converged) report.warnings.push_back("ICP stopped before converging");
  }

  // Classic metrics share the gt->est nearest neighbors.
  clock.lap();
  std::optional<SpatialIndex> est_index;
  std::vector<Neighbor> g2e;
  if (want_ac || want_cd) {
    est_index.emplace(*est);
    g2e = nearest_neighbors(gt, *est_index);
    if (want_ac) {
      const CorrespondenceSet corr = build_correspondences(g2e, est->size(), config.tau);
      report.counts.correspondences = corr.pairs.size();
      if (config.enabled("ac")) {
        report.metrics.ac_cm = accuracy(corr);
        if (!report.metrics.ac_cm) report.warnings.push_back("no correspondences within tau; AC absent");
      }
      if (config.enabled("com")) report.metrics.com = completeness(corr);
    }
  }
  result.timings.ac = clock.lap();

  std::vector<Neighbor> e2g;
  if (want_cd || want_map) {
    if (!gt_index) gt_index.emplace(gt);
    e2g = nearest_neighbors(*est, *gt_index);
    if (want_cd) report.metrics.cd_cm = chamfer(g2e, e2g);
  }
  result.timings.cd = clock.lap();

  if (config.enabled("mme")) {
    MmeParams params;
    params.radius = config.mme_radius;
    const MmeResult mme = est_index ? mean_map_entropy(*est, *est_index, params) : mean_map_entropy(*est, params);
    report.metrics.mme = mme.value;
    report.counts.mme_valid_points = mme.valid_points;
    if (!mme.value) report.warnings.push_back("no point has enough neighbors within the MME radius; MME absent");
  }
  result.timings.mme = clock.lap();

  if (want_voxels) {
    VoxelGridParams vp;
    vp.voxel_size = config.voxel_size;
    vp.min_points = config.min_voxel_points;
    const VoxelGrid gt_grid = voxelize(gt, vp);
    const VoxelGrid est_grid = voxelize(*est, vp);
    report.counts.gt_voxels = gt_grid.voxels.size();
    report.counts.est_voxels = est_grid.voxels.size();
    result.timings.voxelization = clock.lap();

    const VoxelErrorField field = voxel_wasserstein_field(gt_grid, est_grid);
    const std::optional<double> awd_cm = awd(field);
    if (config.enabled("awd")) report.metrics.awd_cm = awd_cm;
    result.timings.awd = clock.lap();
    report.counts.matched_voxels = field.size();
    if (field.empty()) report.warnings.push_back("no voxel is occupied in both maps; voxel metrics absent");

    if (config.enabled("scs")) {
      const ScsResult s = scs(field);
      report.metrics.scs = s.value;
      report.counts.scs_voxels = s.contributing_voxels;
      if (!s.value && !field.empty()) report.warnings.push_back("no voxel has two occupied neighbors; SCS absent");
    }
    result.timings.scs = clock.lap();

    if (config.enabled("w_bound") && !field.empty()) {
      if (field.size() < static_cast<std::size_t>(config.gmm_k)) {
        report.warnings.push_back("fewer shared voxels than mixture components; w_bound absent");
      } else {
        MixtureParams mp;
        mp.components = config.gmm_k;
        report.mixture = mixture_bound(field, mp);
        report.metrics.w_bound_cm = report.mixture->bound_cm;
      }
    }
    report.cdf = empirical_cdf(field).steps;
    report.voxels = field.entries;
    clock.lap();
  }

  if (want_map) {
    std::vector<double> d(e2g.size());
    for (std::size_t i = 0; i < e2g.size(); ++i) d[i] = e2g[i].distance();
    result.error_map = export_error_map(*est, d, config.tau);
  }

  const StageTimings& t = result.timings;
  report.runtimes = {t.registration, t.ac + t.cd, t.voxelization, t.awd, t.scs, t.mme};
  return result;
}

}  // namespace mapeval
