// mapeval: command-line front end for map evaluation.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mapeval/cloud_io.hpp"
#include "mapeval/error.hpp"
#include "mapeval/parallel.hpp"
#include "mapeval/perturbation.hpp"
#include "mapeval/pipeline.hpp"
#include "mapeval/registration.hpp"
#include "mapeval/report.hpp"

namespace fs = std::filesystem;
using namespace mapeval;

namespace {

PointCloud load(const std::string& path) {
  ReadResult r = read_cloud(path);
  if (r.dropped_nonfinite > 0) {
    std::cerr << "warning: " << path << ": dropped " << r.dropped_nonfinite << " non-finite point(s)\n";
  }
  if (r.cloud.empty()) throw ParseError(path + ": no finite points");
  return std::move(r.cloud);
}

RigidTransform read_pose(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pose file " + path);
  std::vector<double> v;
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ParseError(path + ": invalid number '" + tok + "'");
    }
  }
  if (v.size() != 16) throw ParseError(path + ": expected 16 values, found " + std::to_string(v.size()));
  return RigidTransform::from_row_major(v);
}

std::string format_pose(const RigidTransform& t) {
  const auto m = t.row_major();
  std::string out;
  char buf[40];
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", m[static_cast<std::size_t>(4 * r + c)]);
      out += buf;
      out += c == 3 ? '\n' : ' ';
    }
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

nlohmann::json icp_json(const IcpResult& r) {
  return {{"iterations", r.iterations},
          {"converged", r.converged},
          {"rms_residual_m", r.rms_residual},
          {"correspondences", r.correspondences},
          {"rotation_angle_rad", r.transform.rotation_angle()},
          {"residual_history_m", r.residual_history}};
}

std::string show(const std::optional<double>& v, int precision = 4) {
  if (!v) return "absent";
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(precision);
  ss << *v;
  return ss.str();
}

void print_summary(const EvaluationReport& r) {
  const auto& m = r.metrics;
  std::printf("%-12s %14s\n", "metric", "value");
  std::printf("%-12s %14s\n", "AC [cm]", show(m.ac_cm).c_str());
  std::printf("%-12s %14s\n", "COM", show(m.com).c_str());
  std::printf("%-12s %14s\n", "CD [cm]", show(m.cd_cm).c_str());
  std::printf("%-12s %14s\n", "MME", show(m.mme).c_str());
  std::printf("%-12s %14s\n", "AWD [cm]", show(m.awd_cm).c_str());
  std::printf("%-12s %14s\n", "SCS", show(m.scs).c_str());
  std::printf("%-12s %14s\n", "W bound [cm]", show(m.w_bound_cm).c_str());
}

struct CommonOptions {
  std::string gt;
  std::string est;
  std::string out = ".";
  std::string init_pose;
  std::string skip;
  bool register_first = false;
  EvaluationConfig config;
};

void add_pair_options(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--gt", o.gt, "Ground-truth cloud (.ply or .pcd)")->required()->envname("MAPEVAL_GT");
  cmd->add_option("--est", o.est, "Estimated cloud (.ply or .pcd)")->required()->envname("MAPEVAL_EST");
  cmd->add_option("--init-pose", o.init_pose, "File with 16 row-major values of the initial est->gt pose")
      ->envname("MAPEVAL_INIT_POSE");
  cmd->add_option("--threads", o.config.threads, "Worker threads (0 = all cores)")
      ->envname("MAPEVAL_THREADS")
      ->check(CLI::NonNegativeNumber);
}

void add_config_options(CLI::App* cmd, CommonOptions& o) {
  auto& c = o.config;
  cmd->add_option("--tau", c.tau, "Correspondence threshold [m]")->envname("MAPEVAL_TAU")->capture_default_str();
  cmd->add_option("--voxel-size", c.voxel_size, "Voxel edge length [m]; 2-3 suits indoor maps, 3-4 outdoor")
      ->envname("MAPEVAL_VOXEL_SIZE")
      ->capture_default_str();
  cmd->add_option("--mme-radius", c.mme_radius, "MME neighborhood radius [m]")
      ->envname("MAPEVAL_MME_RADIUS")
      ->capture_default_str();
  cmd->add_option("--min-voxel-points", c.min_voxel_points, "Points needed to fit a voxel Gaussian")
      ->envname("MAPEVAL_MIN_VOXEL_POINTS")
      ->capture_default_str();
  cmd->add_option("--gmm-k", c.gmm_k, "Mixture components of the error bound")
      ->envname("MAPEVAL_GMM_K")
      ->capture_default_str();
  cmd->add_option("--seed", c.seed, "Seed echoed into the report")->envname("MAPEVAL_SEED");
  cmd->add_option("--skip", o.skip, "Comma list of metrics to skip: ac,com,cd,mme,awd,scs,w_bound,error_map")
      ->envname("MAPEVAL_SKIP");
  cmd->add_flag("--register", o.register_first, "Align est to gt with ICP first")->envname("MAPEVAL_REGISTER");
}

EvaluationConfig finish_config(const CommonOptions& o) {
  EvaluationConfig c = o.config;
  std::stringstream ss(o.skip);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (!name.empty()) c.skip.insert(name == "w-bound" ? "w_bound" : name == "error-map" ? "error_map" : name);
  }
  c.register_first = o.register_first;
  if (!o.init_pose.empty()) c.init_pose = read_pose(o.init_pose);
  validate_config(c);
  return c;
}

int run_register(const CommonOptions& o) {
  set_thread_count(o.config.threads);
  const PointCloud gt = load(o.gt);
  const PointCloud est = load(o.est);
  const RigidTransform init = o.init_pose.empty() ? RigidTransform::identity() : read_pose(o.init_pose);
  const IcpResult r = icp_point_to_plane(est, gt, init);

  const fs::path dir(o.out);
  ensure_dir(dir);
  write_cloud(dir / "aligned.ply", apply_transform(r.transform, est));
  write_text(dir / "pose.txt", format_pose(r.transform));
  write_text(dir / "icp_stats.json", icp_json(r).dump(2) + "\n");
  std::cout << format_pose(r.transform);
  std::printf("iterations %d, rms residual %.6g m, %s\n", r.iterations, r.rms_residual,
              r.converged ? "converged" : "not converged");
  return 0;
}

int run_evaluate(const CommonOptions& o) {
  const EvaluationConfig config = finish_config(o);
  const PointCloud gt = load(o.gt);
  const PointCloud est = load(o.est);
  const EvaluationResult result = evaluate(gt, est, config);

  const fs::path dir(o.out);
  write_report(result.report, dir);
  if (result.error_map) write_cloud(dir / "error_map.ply", *result.error_map);
  if (result.registration) {
    write_text(dir / "pose.txt", format_pose(result.registration->transform));
    write_text(dir / "icp_stats.json", icp_json(*result.registration).dump(2) + "\n");
  }
  for (const std::string& w : result.report.warnings) std::cerr << "warning: " << w << "\n";
  print_summary(result.report);
  return 0;
}

int run_bench(const CommonOptions& o, int repeat) {
  EvaluationConfig config = finish_config(o);
  const PointCloud gt = load(o.gt);
  const PointCloud est = load(o.est);

  // Registration always runs so every column is measured.
  config.register_first = true;
  nlohmann::json runs = nlohmann::json::array();
  for (int i = 0; i < repeat; ++i) {
    const EvaluationResult r = evaluate(gt, est, config);
    const StageTimings& t = r.timings;
    runs.push_back({{"registration", t.registration},
                    {"ac", t.ac},
                    {"cd", t.cd},
                    {"mme", t.mme},
                    {"voxelization", t.voxelization},
                    {"awd", t.awd},
                    {"scs", t.scs}});
  }
  nlohmann::json out = {{"gt_points", gt.size()},
                        {"est_points", est.size()},
                        {"threads", thread_count()},
                        {"runtimes_s", runs.back()},
                        {"runs", runs}};
  const std::string text = out.dump(2) + "\n";
  if (!o.out.empty() && o.out != "-") {
    ensure_dir(o.out);
    write_text(fs::path(o.out) / "bench.json", text);
  }
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evaluate an estimated point-cloud map against a ground-truth map"};
  app.require_subcommand(1);

  CommonOptions reg_opts;
  auto* reg = app.add_subcommand("register", "Align the estimated map to the ground truth (point-to-plane ICP)");
  add_pair_options(reg, reg_opts);
  reg->add_option("--out", reg_opts.out, "Output directory")->envname("MAPEVAL_OUT");

  CommonOptions eval_opts;
  auto* ev = app.add_subcommand("evaluate", "Compute all metrics and write the report bundle");
  add_pair_options(ev, eval_opts);
  add_config_options(ev, eval_opts);
  ev->add_option("--out", eval_opts.out, "Output directory")->envname("MAPEVAL_OUT");

  CommonOptions bench_opts;
  bench_opts.out.clear();
  int repeat = 1;
  auto* bench = app.add_subcommand("bench", "Time each pipeline stage");
  add_pair_options(bench, bench_opts);
  add_config_options(bench, bench_opts);
  bench->add_option("--out", bench_opts.out, "Directory for bench.json (default: stdout only)")
      ->envname("MAPEVAL_OUT");
  bench->add_option("--repeat", repeat, "Number of timed runs")->check(CLI::PositiveNumber);

  std::string input, output, mode = "noise";
  PerturbSpec spec;
  auto* pert = app.add_subcommand("perturb", "Displace a random subset of points by Gaussian offsets");
  pert->add_option("--input", input, "Input cloud")->required()->envname("MAPEVAL_INPUT");
  pert->add_option("--output", output, "Output cloud")->required()->envname("MAPEVAL_OUTPUT");
  pert->add_option("--mode", mode, "noise or outlier")
      ->check(CLI::IsMember({"noise", "outlier"}))
      ->envname("MAPEVAL_MODE")
      ->capture_default_str();
  pert->add_option("--fraction", spec.fraction, "Fraction of points displaced, in (0, 1]")
      ->envname("MAPEVAL_FRACTION")
      ->capture_default_str();
  pert->add_option("--sigma-cm", spec.sigma_cm, "Per-axis standard deviation [cm]")
      ->envname("MAPEVAL_SIGMA_CM")
      ->capture_default_str();
  pert->add_option("--seed", spec.seed, "PRNG seed")->envname("MAPEVAL_SEED");

  SceneSpec scene;
  std::string kind = "box-room", synth_out;
  std::vector<double> extents;
  auto* syn = app.add_subcommand("synth", "Sample a synthetic scene");
  syn->add_option("--kind", kind, "box-room, planar-sheet or corridor")
      ->check(CLI::IsMember({"box-room", "planar-sheet", "corridor"}))
      ->envname("MAPEVAL_KIND")
      ->capture_default_str();
  syn->add_option("--extent", extents, "Extents x y z [m] (default 30 7 4)")->expected(3)->envname("MAPEVAL_EXTENT");
  syn->add_option("--density", scene.density, "Points per square meter")
      ->envname("MAPEVAL_DENSITY")
      ->capture_default_str();
  syn->add_option("--seed", scene.seed, "PRNG seed")->envname("MAPEVAL_SEED");
  syn->add_option("--output", synth_out, "Output cloud")->required()->envname("MAPEVAL_OUTPUT");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*reg) return run_register(reg_opts);
    if (*ev) return run_evaluate(eval_opts);
    if (*bench) return run_bench(bench_opts, repeat);
    if (*pert) {
      spec.mode = mode == "noise" ? PerturbMode::kNoise : PerturbMode::kOutlier;
      write_cloud(output, perturb(load(input), spec));
      return 0;
    }
    if (*syn) {
      scene.kind = kind == "box-room" ? SceneKind::kBoxRoom
                   : kind == "corridor" ? SceneKind::kCorridor
                                        : SceneKind::kPlanarSheet;
      if (!extents.empty()) {
        scene.extent_x = extents[0];
        scene.extent_y = extents[1];
        scene.extent_z = extents[2];
      }
      const PointCloud cloud = synth_scene(scene);
      write_cloud(synth_out, cloud);
      std::printf("%zu points\n", cloud.size());
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
