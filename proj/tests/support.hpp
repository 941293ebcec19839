#pragma once

#include <cmath>
#include <random>

#include <Eigen/Geometry>

#include "mapeval/geometry.hpp"
#include "mapeval/point_cloud.hpp"

namespace testing {

using mapeval::Gaussian3;
using mapeval::Point3;
using mapeval::PointCloud;
using mapeval::SymMatrix3;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  Eigen::Vector3d axis(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  if (axis.norm() < 1e-3) axis = Eigen::Vector3d::UnitZ();
  return Eigen::AngleAxisd(uniform(rng, 0, 3.14159), axis.normalized()).toRotationMatrix();
}

// R diag(l) R^T with eigenvalues in [lo, hi].
inline SymMatrix3 random_spd(std::mt19937_64& rng, double lo = 0.01, double hi = 2.0) {
  const Eigen::Matrix3d r = random_rotation(rng);
  const Eigen::Vector3d l(uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi));
  return SymMatrix3::from_matrix(r * l.asDiagonal() * r.transpose());
}

inline Gaussian3 random_gaussian(std::mt19937_64& rng) {
  return {Point3(uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2)), random_spd(rng)};
}

inline PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  PointCloud c;
  c.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) c.points.emplace_back(uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi));
  return c;
}

// Cyclic Jacobi rotations on a full 3x3 symmetric matrix. Returns eigenvalues
// on the diagonal of `a` and eigenvectors as columns of `v`.
inline void jacobi_eigen(Eigen::Matrix3d a, Eigen::Vector3d& values, Eigen::Matrix3d& v) {
  v.setIdentity();
  for (int sweep = 0; sweep < 100; ++sweep) {
    const double off = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
    if (off < 1e-40) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        Eigen::Matrix3d j = Eigen::Matrix3d::Identity();
        j(p, p) = c;
        j(q, q) = c;
        j(p, q) = s;
        j(q, p) = -s;
        a = j.transpose() * a * j;
        v = v * j;
      }
    }
  }
  values = a.diagonal();
}

inline double rel_frobenius(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  return (a - b).norm() / std::max(1e-300, b.norm());
}

}  // namespace testing
