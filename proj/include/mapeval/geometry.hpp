#pragma once

#include <array>
#include <span>

#include <Eigen/Core>

#include "mapeval/point_cloud.hpp"

namespace mapeval {

/// Added to the diagonal of every fitted covariance (m^2). Planar and linear
/// point sets otherwise give rank-deficient matrices.
inline constexpr double kCovarianceEpsilon = 1e-9;

/// Symmetric 3x3 matrix stored as its six unique entries.
class SymMatrix3 {
 public:
  SymMatrix3() = default;
  SymMatrix3(double xx, double xy, double xz, double yy, double yz, double zz)
      : e_{xx, xy, xz, yy, yz, zz} {}

  static SymMatrix3 zero() { return {}; }
  static SymMatrix3 identity() { return {1, 0, 0, 1, 0, 1}; }
  static SymMatrix3 diagonal(double a, double b, double c) { return {a, 0, 0, b, 0, c}; }
  /// Symmetrizes m as (m + m^T) / 2.
  static SymMatrix3 from_matrix(const Eigen::Matrix3d& m);

  double xx() const { return e_[0]; }
  double xy() const { return e_[1]; }
  double xz() const { return e_[2]; }
  double yy() const { return e_[3]; }
  double yz() const { return e_[4]; }
  double zz() const { return e_[5]; }

  double operator()(int row, int col) const;
  Eigen::Matrix3d matrix() const;
  double trace() const { return e_[0] + e_[3] + e_[5]; }
  double determinant() const;
  double frobenius_norm() const;

  SymMatrix3 operator+(const SymMatrix3& o) const;
  SymMatrix3 operator-(const SymMatrix3& o) const;
  SymMatrix3 operator*(double s) const;
  SymMatrix3 with_diagonal_added(double eps) const { return *this + diagonal(eps, eps, eps); }

  friend bool operator==(const SymMatrix3&, const SymMatrix3&) = default;

 private:
  std::array<double, 6> e_{};
};

/// Eigenvalues in ascending order; column i of `vectors` pairs with values[i].
struct SymEigen {
  Eigen::Vector3d values;
  Eigen::Matrix3d vectors;
};

SymEigen eigen_decompose(const SymMatrix3& m);

/// Principal square root of a positive semidefinite matrix. Eigenvalues in
/// [-tol, 0) are clamped to zero; anything more negative throws NumericError.
/// tol is 1e-9 scaled by max(1, largest eigenvalue).
SymMatrix3 spd_sqrt(const SymMatrix3& m);

struct Gaussian3 {
  Point3 mean = Point3::Zero();
  SymMatrix3 covariance;
};

/// Closed-form 2-Wasserstein distance between two Gaussians, in the units of
/// the means:
///   W^2 = |mu_g - mu_e|^2 + tr(S_g + S_e - 2 (S_e^1/2 S_g S_e^1/2)^1/2)
/// A numerically negative radicand is clamped to zero.
double wasserstein_gaussian(const Gaussian3& g, const Gaussian3& e);

/// Rigid motion x -> R x + t.
class RigidTransform {
 public:
  RigidTransform() = default;
  RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
      : rotation_(rotation), translation_(translation) {}

  static RigidTransform identity() { return {}; }
  /// Rotation of `angle` radians about the (normalized) axis.
  static RigidTransform from_axis_angle(const Eigen::Vector3d& axis, double angle,
                                        const Eigen::Vector3d& translation = Eigen::Vector3d::Zero());
  /// Rotation given as a rotation vector (axis * angle), exact for any angle.
  static RigidTransform exp(const Eigen::Vector3d& rotation_vector, const Eigen::Vector3d& translation);
  /// Reads a homogeneous 4x4 matrix from 16 row-major values. The last row
  /// must be (0 0 0 1) and the rotation block orthonormal within 1e-6.
  static RigidTransform from_row_major(std::span<const double> values);

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Point3 operator*(const Point3& p) const { return rotation_ * p + translation_; }
  RigidTransform operator*(const RigidTransform& o) const;
  RigidTransform inverse() const;

  Eigen::Matrix4d matrix() const;
  std::array<double, 16> row_major() const;

  /// Angle of the rotation in radians, in [0, pi].
  double rotation_angle() const;

 private:
  Eigen::Matrix3d rotation_ = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
};

/// Applies t to every point; colors and ordering are kept.
PointCloud apply_transform(const RigidTransform& t, const PointCloud& cloud);

/// Moves a Gaussian by a rigid transform: mean -> R mu + t, cov -> R S R^T.
Gaussian3 transform_gaussian(const RigidTransform& t, const Gaussian3& g);

}  // namespace mapeval
