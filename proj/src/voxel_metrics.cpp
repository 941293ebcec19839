#include "mapeval/voxel_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mapeval/error.hpp"
#include "mapeval/parallel.hpp"

namespace mapeval {

namespace {

// Running sums in coordinates local to the voxel's minimum corner, which keeps
// the one-pass covariance well conditioned far from the origin.
struct Accumulator {
  std::size_t count = 0;
  double sx = 0, sy = 0, sz = 0;
  double sxx = 0, sxy = 0, sxz = 0, syy = 0, syz = 0, szz = 0;

  void add(double x, double y, double z) {
    ++count;
    sx += x; sy += y; sz += z;
    sxx += x * x; sxy += x * y; sxz += x * z;
    syy += y * y; syz += y * z; szz += z * z;
  }

  void merge(const Accumulator& o) {
    count += o.count;
    sx += o.sx; sy += o.sy; sz += o.sz;
    sxx += o.sxx; sxy += o.sxy; sxz += o.sxz;
    syy += o.syy; syz += o.syz; szz += o.szz;
  }
};

// Open addressing with linear probing; entries are kept contiguous so the
// merge and the final sort walk plain vectors.
class AccumulatorMap {
 public:
  explicit AccumulatorMap(std::size_t expected = 16) {
    std::size_t cap = 16;
    while (cap < 2 * expected) cap <<= 1;
    slots_.assign(cap, kEmpty);
  }

  Accumulator& operator[](const VoxelIndex& idx) {
    std::size_t mask = slots_.size() - 1;
    for (std::size_t s = VoxelIndexHash{}(idx) & mask;; s = (s + 1) & mask) {
      const std::uint32_t e = slots_[s];
      if (e == kEmpty) {
        if (2 * (entries_.size() + 1) > slots_.size()) {
          grow();
          return (*this)[idx];
        }
        slots_[s] = static_cast<std::uint32_t>(entries_.size());
        entries_.emplace_back(idx, Accumulator{});
        return entries_.back().second;
      }
      if (entries_[e].first == idx) return entries_[e].second;
    }
  }

  const std::vector<std::pair<VoxelIndex, Accumulator>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  static constexpr std::uint32_t kEmpty = std::numeric_limits<std::uint32_t>::max();

  void grow() {
    slots_.assign(slots_.size() * 2, kEmpty);
    const std::size_t mask = slots_.size() - 1;
    for (std::size_t e = 0; e < entries_.size(); ++e) {
      std::size_t s = VoxelIndexHash{}(entries_[e].first) & mask;
      while (slots_[s] != kEmpty) s = (s + 1) & mask;
      slots_[s] = static_cast<std::uint32_t>(e);
    }
  }

  std::vector<std::uint32_t> slots_;
  std::vector<std::pair<VoxelIndex, Accumulator>> entries_;
};

constexpr std::size_t kVoxelBlock = 1 << 16;

std::int32_t checked_floor(double v) {
  const double f = std::floor(v);
  if (!(f >= std::numeric_limits<std::int32_t>::min() && f <= std::numeric_limits<std::int32_t>::max())) {
    throw NumericError("voxel index out of range; coordinate too large for the voxel size");
  }
  return static_cast<std::int32_t>(f);
}

Point3 voxel_corner(const VoxelIndex& idx, const VoxelGridParams& params) {
  return params.origin + params.voxel_size * Point3(idx.x, idx.y, idx.z);
}

GaussianVoxel finalize(const VoxelIndex& idx, const Accumulator& a, const VoxelGridParams& params) {
  const double n = static_cast<double>(a.count);
  const Eigen::Vector3d m(a.sx / n, a.sy / n, a.sz / n);
  const double k = 1.0 / (n - 1.0);
  const SymMatrix3 cov((a.sxx - n * m.x() * m.x()) * k, (a.sxy - n * m.x() * m.y()) * k,
                       (a.sxz - n * m.x() * m.z()) * k, (a.syy - n * m.y() * m.y()) * k,
                       (a.syz - n * m.y() * m.z()) * k, (a.szz - n * m.z() * m.z()) * k);
  GaussianVoxel v;
  v.index = idx;
  v.count = a.count;
  v.gaussian.mean = voxel_corner(idx, params) + m;
  v.gaussian.covariance = cov.with_diagonal_added(kCovarianceEpsilon);
  return v;
}

double log_normal_pdf(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * variance) - d * d / (2.0 * variance);
}

}  // namespace

const GaussianVoxel* VoxelGrid::find(const VoxelIndex& index) const {
  auto it = std::lower_bound(voxels.begin(), voxels.end(), index,
                             [](const GaussianVoxel& v, const VoxelIndex& i) { return v.index < i; });
  if (it == voxels.end() || it->index != index) return nullptr;
  return &*it;
}

VoxelIndex voxel_index_of(const Point3& p, double voxel_size, const Point3& origin) {
  return {checked_floor((p.x() - origin.x()) / voxel_size), checked_floor((p.y() - origin.y()) / voxel_size),
          checked_floor((p.z() - origin.z()) / voxel_size)};
}

VoxelGrid voxelize(const PointCloud& cloud, const VoxelGridParams& params) {
  if (!(params.voxel_size > 0.0)) throw std::invalid_argument("voxel size must be positive");
  if (params.min_points < 4) throw std::invalid_argument("min_points must be at least 4");

  const std::size_t n = cloud.size();
  std::vector<AccumulatorMap> partials(block_count(n, kVoxelBlock));
  parallel_blocks(n, kVoxelBlock, [&](std::size_t begin, std::size_t end) {
    AccumulatorMap& map = partials[begin / kVoxelBlock];
    VoxelIndex last{};
    Accumulator* acc = nullptr;
    Point3 corner = Point3::Zero();
    for (std::size_t i = begin; i < end; ++i) {
      const Point3& p = cloud.points[i];
      const VoxelIndex idx = voxel_index_of(p, params.voxel_size, params.origin);
      if (acc == nullptr || idx != last) {
        acc = &map[idx];
        last = idx;
        corner = voxel_corner(idx, params);
      }
      acc->add(p.x() - corner.x(), p.y() - corner.y(), p.z() - corner.z());
    }
  });

  AccumulatorMap merged;
  if (!partials.empty()) merged = std::move(partials.front());
  for (std::size_t b = 1; b < partials.size(); ++b) {
    for (const auto& [idx, acc] : partials[b].entries()) merged[idx].merge(acc);
    partials[b] = AccumulatorMap();
  }

  VoxelGrid grid;
  grid.params = params;
  std::vector<std::pair<VoxelIndex, const Accumulator*>> kept;
  kept.reserve(merged.size());
  for (const auto& [idx, acc] : merged.entries()) {
    if (acc.count < params.min_points) {
      ++grid.discarded_voxels;
      grid.discarded_points += acc.count;
    } else {
      kept.emplace_back(idx, &acc);
    }
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  grid.voxels.reserve(kept.size());
  for (const auto& [idx, acc] : kept) grid.voxels.push_back(finalize(idx, *acc, params));
  return grid;
}

VoxelErrorField voxel_wasserstein_field(const VoxelGrid& gt, const VoxelGrid& est) {
  if (gt.params.voxel_size != est.params.voxel_size || gt.params.origin != est.params.origin) {
    throw std::invalid_argument("voxel grids differ in voxel size or origin");
  }

  VoxelErrorField field;
  std::vector<std::pair<const GaussianVoxel*, const GaussianVoxel*>> pairs;
  auto g = gt.voxels.begin();
  auto e = est.voxels.begin();
  while (g != gt.voxels.end() && e != est.voxels.end()) {
    if (g->index < e->index) {
      ++field.gt_only_voxels;
      ++g;
    } else if (e->index < g->index) {
      ++field.est_only_voxels;
      ++e;
    } else {
      pairs.emplace_back(&*g, &*e);
      ++g;
      ++e;
    }
  }
  field.gt_only_voxels += static_cast<std::size_t>(gt.voxels.end() - g);
  field.est_only_voxels += static_cast<std::size_t>(est.voxels.end() - e);

  field.entries.resize(pairs.size());
  parallel_blocks(pairs.size(), 256, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto [vg, ve] = pairs[i];
      field.entries[i] = {vg->index, wasserstein_gaussian(vg->gaussian, ve->gaussian), vg->count, ve->count};
    }
  });
  return field;
}

std::optional<double> awd(const VoxelErrorField& field) {
  if (field.empty()) return std::nullopt;
  double sum = 0.0;
  for (const VoxelError& v : field.entries) sum += v.w_m;
  return 100.0 * sum / static_cast<double>(field.size());
}

double EmpiricalCdf::operator()(double w_cm) const {
  auto it = std::upper_bound(steps.begin(), steps.end(), w_cm,
                             [](double w, const CdfStep& s) { return w < s.w_cm; });
  if (it == steps.begin()) return 0.0;
  return std::prev(it)->fraction;
}

EmpiricalCdf empirical_cdf(const VoxelErrorField& field) {
  std::vector<double> w;
  w.reserve(field.size());
  for (const VoxelError& v : field.entries) w.push_back(100.0 * v.w_m);
  std::sort(w.begin(), w.end());

  EmpiricalCdf cdf;
  cdf.samples = w.size();
  const double m = static_cast<double>(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i + 1 < w.size() && w[i + 1] == w[i]) continue;
    cdf.steps.push_back({w[i], static_cast<double>(i + 1) / m});
  }
  return cdf;
}

MixtureBound fit_mixture_bound(std::vector<double> x, const MixtureParams& params) {
  const int k_count = params.components;
  if (k_count < 1) throw std::invalid_argument("mixture needs at least one component");
  if (x.size() < static_cast<std::size_t>(k_count)) {
    throw std::invalid_argument("mixture has more components than samples");
  }
  std::sort(x.begin(), x.end());
  const std::size_t m = x.size();
  const double md = static_cast<double>(m);
  const auto k_size = static_cast<std::size_t>(k_count);

  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= md;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var = std::max(var / md, params.variance_floor);

  std::vector<MixtureComponent> comp(k_size);
  for (std::size_t k = 0; k < k_size; ++k) {
    const double q = (static_cast<double>(k) + 0.5) / static_cast<double>(k_count);
    const auto pos = std::min(m - 1, static_cast<std::size_t>(q * md));
    comp[k] = {1.0 / k_count, x[pos], var};
  }

  std::vector<double> resp(m * k_size);
  std::vector<double> logp(k_size);
  double prev_ll = -std::numeric_limits<double>::infinity();
  MixtureBound out;
  for (int it = 1; it <= params.max_iterations; ++it) {
    // E-step
    double ll = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < k_size; ++k) {
        logp[k] = comp[k].weight > 0.0
                      ? std::log(comp[k].weight) + log_normal_pdf(x[i], comp[k].mean, comp[k].variance)
                      : -std::numeric_limits<double>::infinity();
        best = std::max(best, logp[k]);
      }
      double total = 0.0;
      for (std::size_t k = 0; k < k_size; ++k) total += std::exp(logp[k] - best);
      const double log_total = best + std::log(total);
      ll += log_total;
      for (std::size_t k = 0; k < k_size; ++k) resp[i * k_size + k] = std::exp(logp[k] - log_total);
    }

    // M-step
    for (std::size_t k = 0; k < k_size; ++k) {
      double nk = 0.0, sum = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        nk += resp[i * k_size + k];
        sum += resp[i * k_size + k] * x[i];
      }
      if (nk <= 0.0) {
        comp[k].weight = 0.0;
        continue;
      }
      const double mu = sum / nk;
      double sq = 0.0;
      for (std::size_t i = 0; i < m; ++i) sq += resp[i * k_size + k] * (x[i] - mu) * (x[i] - mu);
      comp[k] = {nk / md, mu, std::max(sq / nk, params.variance_floor)};
    }

    out.iterations = it;
    out.log_likelihood = ll;
    if (std::abs(ll - prev_ll) / md < params.tolerance) break;
    prev_ll = ll;
  }

  double mu_w = 0.0;
  for (const auto& c : comp) mu_w += c.weight * c.mean;
  double var_w = 0.0;
  for (const auto& c : comp) var_w += c.weight * (c.variance + (c.mean - mu_w) * (c.mean - mu_w));

  out.components = std::move(comp);
  out.mean_cm = mu_w;
  out.stddev_cm = std::sqrt(var_w);
  out.bound_cm = mu_w + 3.0 * out.stddev_cm;
  return out;
}

MixtureBound mixture_bound(const VoxelErrorField& field, const MixtureParams& params) {
  std::vector<double> w;
  w.reserve(field.size());
  for (const VoxelError& v : field.entries) w.push_back(100.0 * v.w_m);
  return fit_mixture_bound(std::move(w), params);
}

ScsResult scs(const VoxelErrorField& field) {
  std::unordered_map<VoxelIndex, double, VoxelIndexHash> lookup;
  lookup.reserve(field.size());
  for (const VoxelError& v : field.entries) lookup.emplace(v.index, v.w_m);

  // NaN marks a voxel with too few neighbors.
  std::vector<double> cv(field.size(), std::numeric_limits<double>::quiet_NaN());
  parallel_blocks(field.size(), 256, [&](std::size_t begin, std::size_t end) {
    double w[26];
    for (std::size_t i = begin; i < end; ++i) {
      const VoxelIndex c = field.entries[i].index;
      int n = 0;
      for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dz = -1; dz <= 1; ++dz) {
            if (dx == 0 && dy == 0 && dz == 0) continue;
            auto it = lookup.find({c.x + dx, c.y + dy, c.z + dz});
            if (it != lookup.end()) w[n++] = it->second;
          }
      if (n < 2) continue;
      double mean = 0.0;
      for (int j = 0; j < n; ++j) mean += w[j];
      mean /= n;
      if (mean <= 0.0) {
        cv[i] = 0.0;
        continue;
      }
      double var = 0.0;
      for (int j = 0; j < n; ++j) var += (w[j] - mean) * (w[j] - mean);
      cv[i] = std::sqrt(var / n) / mean;
    }
  });

  ScsResult out;
  double sum = 0.0;
  for (double v : cv) {
    if (std::isnan(v)) continue;
    sum += v;
    ++out.contributing_voxels;
  }
  if (out.contributing_voxels > 0) out.value = sum / static_cast<double>(out.contributing_voxels);
  return out;
}

}  // namespace mapeval
