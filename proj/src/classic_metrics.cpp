#include "mapeval/classic_metrics.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <utility>

#include "mapeval/geometry.hpp"
#include "mapeval/parallel.hpp"

namespace mapeval {

std::optional<double> accuracy(const CorrespondenceSet& corr) {
  if (corr.pairs.empty()) return std::nullopt;
  const double sum = parallel_sum(corr.pairs.size(), [&](std::size_t i) { return corr.pairs[i].distance; });
  return 100.0 * sum / static_cast<double>(corr.pairs.size());
}

double completeness(const CorrespondenceSet& corr) {
  if (corr.gt_count == 0) throw std::invalid_argument("completeness needs a non-empty ground truth");
  return static_cast<double>(corr.pairs.size()) / static_cast<double>(corr.gt_count);
}

double mean_distance(std::span<const Neighbor> nn) {
  if (nn.empty()) throw std::invalid_argument("mean distance of an empty set");
  return parallel_sum(nn.size(), [&](std::size_t i) { return nn[i].distance(); }) / static_cast<double>(nn.size());
}

double chamfer(std::span<const Neighbor> gt_to_est, std::span<const Neighbor> est_to_gt) {
  return 100.0 * (mean_distance(gt_to_est) + mean_distance(est_to_gt));
}

double chamfer(const PointCloud& gt, const PointCloud& est) {
  if (gt.empty() || est.empty()) throw std::invalid_argument("chamfer distance needs non-empty clouds");
  const SpatialIndex gt_index(gt);
  const SpatialIndex est_index(est);
  const auto g2e = nearest_neighbors(gt, est_index);
  const auto e2g = nearest_neighbors(est, gt_index);
  return chamfer(g2e, e2g);
}

MmeResult mean_map_entropy(const PointCloud& cloud, const SpatialIndex& index, const MmeParams& params) {
  if (!(params.radius > 0.0)) throw std::invalid_argument("MME radius must be positive");
  if (params.min_neighbors < 2) throw std::invalid_argument("MME needs at least 2 neighbors");

  const double log_2pie = std::log(2.0 * std::numbers::pi * std::numbers::e);
  constexpr double kInvalid = std::numeric_limits<double>::quiet_NaN();

  auto point_entropy = [&](std::size_t i) {
    const Point3& q = cloud.points[i];
    // Sums relative to the query point stay well conditioned.
    std::size_t n = 0;
    double sx = 0, sy = 0, sz = 0, sxx = 0, sxy = 0, sxz = 0, syy = 0, syz = 0, szz = 0;
    index.for_each_in_radius(q, params.radius, [&](std::uint32_t, const Point3& p) {
      const double x = p.x() - q.x(), y = p.y() - q.y(), z = p.z() - q.z();
      ++n;
      sx += x; sy += y; sz += z;
      sxx += x * x; sxy += x * y; sxz += x * z;
      syy += y * y; syz += y * z; szz += z * z;
    });
    if (n < params.min_neighbors) return kInvalid;
    const double nd = static_cast<double>(n);
    const double mx = sx / nd, my = sy / nd, mz = sz / nd;
    const double k = 1.0 / (nd - 1.0);
    const SymMatrix3 cov = SymMatrix3((sxx - nd * mx * mx) * k, (sxy - nd * mx * my) * k, (sxz - nd * mx * mz) * k,
                                      (syy - nd * my * my) * k, (syz - nd * my * mz) * k, (szz - nd * mz * mz) * k)
                               .with_diagonal_added(kCovarianceEpsilon);
    if (params.formula == EntropyFormula::kSmallestEigenvalue) {
      return -std::log(std::max(eigen_decompose(cov).values[0], kCovarianceEpsilon));
    }
    return 0.5 * (3.0 * log_2pie + std::log(std::max(cov.determinant(), 1e-300)));
  };

  using Partial = std::pair<double, std::size_t>;
  const Partial total = parallel_reduce(
      cloud.size(), Partial{0.0, 0},
      [&](std::size_t begin, std::size_t end) {
        Partial p{0.0, 0};
        for (std::size_t i = begin; i < end; ++i) {
          const double h = point_entropy(i);
          if (std::isnan(h)) continue;
          p.first += h;
          ++p.second;
        }
        return p;
      },
      [](Partial a, const Partial& b) { return Partial{a.first + b.first, a.second + b.second}; });

  MmeResult out;
  out.valid_points = total.second;
  out.excluded_points = cloud.size() - total.second;
  if (total.second > 0) out.value = total.first / static_cast<double>(total.second);
  return out;
}

MmeResult mean_map_entropy(const PointCloud& cloud, const MmeParams& params) {
  if (cloud.empty()) return {};
  return mean_map_entropy(cloud, SpatialIndex(cloud), params);
}

}  // namespace mapeval
