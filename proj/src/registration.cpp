#include "mapeval/registration.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "mapeval/error.hpp"
#include "mapeval/parallel.hpp"

namespace mapeval {

namespace {

using Matrix6 = Eigen::Matrix<double, 6, 6, Eigen::DontAlign>;
using Vector6 = Eigen::Matrix<double, 6, 1, Eigen::DontAlign>;

struct NormalEquations {
  Matrix6 h = Matrix6::Zero();
  Vector6 b = Vector6::Zero();
  double sum_sq = 0.0;
  std::size_t count = 0;

  NormalEquations& operator+=(const NormalEquations& o) {
    h += o.h;
    b += o.b;
    sum_sq += o.sum_sq;
    count += o.count;
    return *this;
  }
};

constexpr double kMaxCondition = 1e12;

NormalEquations accumulate(const PointCloud& est, const PointCloud& gt, const SpatialIndex& gt_index,
                           const NormalCloud& normals, const RigidTransform& t, double max_dist_sq) {
  return parallel_reduce(
      est.size(), NormalEquations{},
      [&](std::size_t begin, std::size_t end) {
        NormalEquations eq;
        for (std::size_t j = begin; j < end; ++j) {
          const Point3 q = t * est.points[j];
          const Neighbor nb = gt_index.nearest(q);
          if (nb.distance_sq > max_dist_sq || !normals.valid[nb.id]) continue;
          const Eigen::Vector3d& n = normals.normals[nb.id];
          const double r = (q - gt.points[nb.id]).dot(n);
          Vector6 jac;
          jac.head<3>() = q.cross(n);
          jac.tail<3>() = n;
          eq.h.noalias() += jac * jac.transpose();
          eq.b.noalias() += jac * r;
          eq.sum_sq += r * r;
          ++eq.count;
        }
        return eq;
      },
      [](NormalEquations a, const NormalEquations& b) { return a += b; });
}

}  // namespace

IcpResult icp_point_to_plane(const PointCloud& est, const PointCloud& gt, const SpatialIndex& gt_index,
                             const NormalCloud& gt_normals, const RigidTransform& init,
                             const IcpParams& params) {
  if (est.size() < 100 || gt.size() < 100) throw std::invalid_argument("ICP needs at least 100 points per cloud");
  if (params.max_iterations <= 0 || params.translation_epsilon <= 0 || params.rotation_epsilon <= 0 ||
      params.max_correspondence_distance <= 0) {
    throw std::invalid_argument("ICP parameters must be positive");
  }
  if (gt_normals.size() != gt.size()) throw std::invalid_argument("normal count does not match gt cloud");

  const double max_dist_sq = params.max_correspondence_distance * params.max_correspondence_distance;
  IcpResult result;
  RigidTransform current = init;
  RigidTransform previous = init;

  for (int it = 1; it <= params.max_iterations; ++it) {
    const NormalEquations eq = accumulate(est, gt, gt_index, gt_normals, current, max_dist_sq);
    if (eq.count < 6) {
      throw RegistrationError("ICP iteration " + std::to_string(it) + ": only " + std::to_string(eq.count) +
                              " valid correspondences");
    }
    const double rms = std::sqrt(eq.sum_sq / static_cast<double>(eq.count));
    if (!result.residual_history.empty() && rms > result.residual_history.back() * (1.0 + 1e-9) + 1e-15) {
      current = previous;
      break;
    }
    result.residual_history.push_back(rms);
    result.rms_residual = rms;
    result.correspondences = eq.count;
    result.iterations = it;

    const Eigen::Matrix<double, 6, 6> h = eq.h;
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(h, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues()[0];
    const double hi = eig.eigenvalues()[5];
    if (!(lo > 0.0) || hi / lo > kMaxCondition) {
      throw RegistrationError("ICP iteration " + std::to_string(it) +
                              ": degenerate geometry, normal system is singular");
    }
    const Eigen::Matrix<double, 6, 1> x = h.ldlt().solve(-Eigen::Matrix<double, 6, 1>(eq.b));
    const Eigen::Vector3d omega = x.head<3>();
    const Eigen::Vector3d v = x.tail<3>();

    previous = current;
    current = RigidTransform::exp(omega, v) * current;
    if (v.norm() < params.translation_epsilon && omega.norm() < params.rotation_epsilon) {
      result.converged = true;
      break;
    }
  }
  result.transform = current;
  return result;
}

IcpResult icp_point_to_plane(const PointCloud& est, const PointCloud& gt, const RigidTransform& init,
                             const IcpParams& params) {
  if (gt.size() < 100) throw std::invalid_argument("ICP needs at least 100 points per cloud");
  const SpatialIndex index(gt);
  const NormalCloud normals = estimate_normals(gt, index, params.normal_neighbors);
  return icp_point_to_plane(est, gt, index, normals, init, params);
}

std::vector<Neighbor> nearest_neighbors(const PointCloud& queries, const SpatialIndex& index) {
  std::vector<Neighbor> out(queries.size());
  parallel_blocks(queries.size(), kBlockSize, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) out[i] = index.nearest(queries.points[i]);
  });
  return out;
}

CorrespondenceSet build_correspondences(std::span<const Neighbor> gt_to_est, std::size_t est_count, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  CorrespondenceSet set;
  set.gt_count = gt_to_est.size();
  set.est_count = est_count;
  set.tau = tau;
  const double tau_sq = tau * tau;
  for (std::size_t i = 0; i < gt_to_est.size(); ++i) {
    const Neighbor& nb = gt_to_est[i];
    if (nb.distance_sq < tau_sq) {
      const double d = nb.distance();
      if (d < tau) set.pairs.push_back({static_cast<std::uint32_t>(i), nb.id, d});
    }
  }
  return set;
}

CorrespondenceSet build_correspondences(const PointCloud& gt, const PointCloud& est, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (gt.empty() || est.empty()) {
    CorrespondenceSet set;
    set.gt_count = gt.size();
    set.est_count = est.size();
    set.tau = tau;
    return set;
  }
  const SpatialIndex est_index(est);
  const auto nn = nearest_neighbors(gt, est_index);
  return build_correspondences(nn, est.size(), tau);
}

}  // namespace mapeval
