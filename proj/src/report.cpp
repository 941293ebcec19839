#include "mapeval/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mapeval/error.hpp"

namespace mapeval {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(std::string("report.json: missing key '") + key + "'");
  if (it->is_null()) return std::nullopt;
  return it->get<double>();
}

void check_distance(const std::optional<double>& v, const char* name) {
  if (v && (!std::isfinite(*v) || *v < 0.0)) {
    throw std::invalid_argument(std::string(name) + " must be finite and non-negative");
  }
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

void validate_report(const EvaluationReport& report) {
  const auto& m = report.metrics;
  if (m.com && !(*m.com >= 0.0 && *m.com <= 1.0)) throw std::invalid_argument("com must lie in [0, 1]");
  check_distance(m.ac_cm, "ac_cm");
  check_distance(m.cd_cm, "cd_cm");
  check_distance(m.awd_cm, "awd_cm");
  check_distance(m.scs, "scs");
  check_distance(m.w_bound_cm, "w_bound_cm");
  if (m.mme && !std::isfinite(*m.mme)) throw std::invalid_argument("mme must be finite");

  double prev_w = -1.0, prev_f = 0.0;
  for (const CdfStep& s : report.cdf) {
    if (!(s.w_cm >= 0.0) || !std::isfinite(s.w_cm)) throw std::invalid_argument("cdf w must be finite and non-negative");
    if (s.w_cm < prev_w) throw std::invalid_argument("cdf w values must be nondecreasing");
    if (!(s.fraction >= prev_f) || s.fraction > 1.0) throw std::invalid_argument("cdf F values must be nondecreasing in [0, 1]");
    prev_w = s.w_cm;
    prev_f = s.fraction;
  }
  if (!report.cdf.empty() && report.cdf.back().fraction != 1.0) throw std::invalid_argument("cdf must end at F = 1");
}

std::string report_to_json(const EvaluationReport& report) {
  const auto& c = report.config;
  const auto& m = report.metrics;
  const auto& r = report.runtimes;
  const auto& n = report.counts;

  json j;
  j["config"] = {{"tau_m", c.tau_m},
                 {"voxel_size_m", c.voxel_size_m},
                 {"mme_radius_m", c.mme_radius_m},
                 {"min_voxel_points", c.min_voxel_points},
                 {"gmm_k", c.gmm_k},
                 {"seed", c.seed}};
  j["metrics"] = {{"ac_cm", optional_number(m.ac_cm)},   {"com", optional_number(m.com)},
                  {"cd_cm", optional_number(m.cd_cm)},   {"mme", optional_number(m.mme)},
                  {"awd_cm", optional_number(m.awd_cm)}, {"scs", optional_number(m.scs)},
                  {"w_bound_cm", optional_number(m.w_bound_cm)}};
  json cdf = json::array();
  for (const CdfStep& s : report.cdf) cdf.push_back(json::array({s.w_cm, s.fraction}));
  j["cdf"] = std::move(cdf);
  j["runtimes_s"] = {{"registration", r.registration}, {"classic_metrics", r.classic_metrics},
                     {"voxelization", r.voxelization}, {"awd", r.awd},
                     {"scs", r.scs},                   {"mme", r.mme}};
  j["counts"] = {{"gt_points", n.gt_points},
                 {"est_points", n.est_points},
                 {"correspondences", n.correspondences},
                 {"gt_voxels", n.gt_voxels},
                 {"est_voxels", n.est_voxels},
                 {"matched_voxels", n.matched_voxels},
                 {"mme_valid_points", n.mme_valid_points},
                 {"scs_voxels", n.scs_voxels}};
  if (report.mixture) {
    const MixtureBound& mb = *report.mixture;
    json comps = json::array();
    for (const auto& k : mb.components) {
      comps.push_back({{"weight", k.weight}, {"mean_cm", k.mean}, {"variance_cm2", k.variance}});
    }
    j["mixture"] = {{"mean_cm", mb.mean_cm},
                    {"stddev_cm", mb.stddev_cm},
                    {"bound_cm", mb.bound_cm},
                    {"iterations", mb.iterations},
                    {"log_likelihood", mb.log_likelihood},
                    {"components", std::move(comps)}};
  } else {
    j["mixture"] = nullptr;
  }
  j["warnings"] = report.warnings;
  // nlohmann emits the shortest decimal form that parses back to the same double.
  return j.dump(2) + "\n";
}

EvaluationReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("report.json: ") + e.what());
  }
  EvaluationReport r;
  try {
    const json& c = j.at("config");
    r.config.tau_m = c.at("tau_m").get<double>();
    r.config.voxel_size_m = c.at("voxel_size_m").get<double>();
    r.config.mme_radius_m = c.at("mme_radius_m").get<double>();
    r.config.min_voxel_points = c.at("min_voxel_points").get<std::size_t>();
    r.config.gmm_k = c.value("gmm_k", 2);
    r.config.seed = c.at("seed").get<std::uint64_t>();

    const json& m = j.at("metrics");
    r.metrics.ac_cm = read_optional(m, "ac_cm");
    r.metrics.com = read_optional(m, "com");
    r.metrics.cd_cm = read_optional(m, "cd_cm");
    r.metrics.mme = read_optional(m, "mme");
    r.metrics.awd_cm = read_optional(m, "awd_cm");
    r.metrics.scs = read_optional(m, "scs");
    r.metrics.w_bound_cm = read_optional(m, "w_bound_cm");

    for (const json& step : j.at("cdf")) {
      if (!step.is_array() || step.size() != 2) throw ParseError("report.json: cdf entries must be [w_cm, F] pairs");
      r.cdf.push_back({step[0].get<double>(), step[1].get<double>()});
    }

    const json& t = j.at("runtimes_s");
    r.runtimes.registration = t.at("registration").get<double>();
    r.runtimes.classic_metrics = t.at("classic_metrics").get<double>();
    r.runtimes.voxelization = t.at("voxelization").get<double>();
    r.runtimes.awd = t.at("awd").get<double>();
    r.runtimes.scs = t.at("scs").get<double>();
    r.runtimes.mme = t.at("mme").get<double>();

    if (const auto it = j.find("counts"); it != j.end()) {
      const json& n = *it;
      r.counts.gt_points = n.value("gt_points", std::size_t{0});
      r.counts.est_points = n.value("est_points", std::size_t{0});
      r.counts.correspondences = n.value("correspondences", std::size_t{0});
      r.counts.gt_voxels = n.value("gt_voxels", std::size_t{0});
      r.counts.est_voxels = n.value("est_voxels", std::size_t{0});
      r.counts.matched_voxels = n.value("matched_voxels", std::size_t{0});
      r.counts.mme_valid_points = n.value("mme_valid_points", std::size_t{0});
      r.counts.scs_voxels = n.value("scs_voxels", std::size_t{0});
    }
    if (const auto it = j.find("mixture"); it != j.end() && !it->is_null()) {
      MixtureBound mb;
      mb.mean_cm = it->at("mean_cm").get<double>();
      mb.stddev_cm = it->at("stddev_cm").get<double>();
      mb.bound_cm = it->at("bound_cm").get<double>();
      mb.iterations = it->at("iterations").get<int>();
      mb.log_likelihood = it->at("log_likelihood").get<double>();
      for (const json& k : it->at("components")) {
        mb.components.push_back(
            {k.at("weight").get<double>(), k.at("mean_cm").get<double>(), k.at("variance_cm2").get<double>()});
      }
      r.mixture = std::move(mb);
    }
    if (const auto it = j.find("warnings"); it != j.end()) r.warnings = it->get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("report.json: ") + e.what());
  }
  return r;
}

void write_report(const EvaluationReport& report, const fs::path& dir) {
  validate_report(report);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());

  write_text(dir / "report.json", report_to_json(report));

  std::string csv = "ix,iy,iz,w_cm,n_gt,n_est\n";
  for (const VoxelError& v : report.voxels) {
    csv += std::to_string(v.index.x) + ',' + std::to_string(v.index.y) + ',' + std::to_string(v.index.z) + ',' +
           format_g17(100.0 * v.w_m) + ',' + std::to_string(v.n_gt) + ',' + std::to_string(v.n_est) + '\n';
  }
  write_text(dir / "voxel_errors.csv", csv);

  std::string cdf = "w_cm,F\n";
  for (const CdfStep& s : report.cdf) cdf += format_g17(s.w_cm) + ',' + format_g17(s.fraction) + '\n';
  write_text(dir / "cdf.csv", cdf);
}

std::vector<VoxelError> read_voxel_errors_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "ix,iy,iz,w_cm,n_gt,n_est") {
    throw ParseError(path.string() + ":1: unexpected header");
  }
  std::vector<VoxelError> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    VoxelError v;
    double w_cm = 0.0;
    char c1, c2, c3, c4, c5;
    if (!(ss >> v.index.x >> c1 >> v.index.y >> c2 >> v.index.z >> c3 >> w_cm >> c4 >> v.n_gt >> c5 >> v.n_est) ||
        c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',' || c5 != ',') {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": malformed row");
    }
    v.w_m = w_cm / 100.0;
    rows.push_back(v);
  }
  return rows;
}

EvaluationReport read_report(const fs::path& dir) {
  std::ifstream in(dir / "report.json", std::ios::binary);
  if (!in) throw IoError("cannot open " + (dir / "report.json").string());
  std::ostringstream ss;
  ss << in.rdbuf();
  EvaluationReport r = report_from_json(ss.str());
  r.voxels = read_voxel_errors_csv(dir / "voxel_errors.csv");
  return r;
}

}  // namespace mapeval
