#include "mapeval/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "mapeval/error.hpp"

namespace mapeval {

SymMatrix3 SymMatrix3::from_matrix(const Eigen::Matrix3d& m) {
  return {m(0, 0), 0.5 * (m(0, 1) + m(1, 0)), 0.5 * (m(0, 2) + m(2, 0)),
          m(1, 1), 0.5 * (m(1, 2) + m(2, 1)), m(2, 2)};
}

double SymMatrix3::operator()(int row, int col) const {
  if (row > col) std::swap(row, col);
  // Row-major upper triangle: (0,0) (0,1) (0,2) (1,1) (1,2) (2,2).
  static constexpr int kIndex[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
  return e_[kIndex[row][col]];
}

Eigen::Matrix3d SymMatrix3::matrix() const {
  Eigen::Matrix3d m;
  m << xx(), xy(), xz(),
       xy(), yy(), yz(),
       xz(), yz(), zz();
  return m;
}

double SymMatrix3::determinant() const {
  return xx() * (yy() * zz() - yz() * yz()) - xy() * (xy() * zz() - yz() * xz()) +
         xz() * (xy() * yz() - yy() * xz());
}

double SymMatrix3::frobenius_norm() const {
  return std::sqrt(xx() * xx() + yy() * yy() + zz() * zz() +
                   2.0 * (xy() * xy() + xz() * xz() + yz() * yz()));
}

SymMatrix3 SymMatrix3::operator+(const SymMatrix3& o) const {
  SymMatrix3 r;
  for (std::size_t i = 0; i < 6; ++i) r.e_[i] = e_[i] + o.e_[i];
  return r;
}

SymMatrix3 SymMatrix3::operator-(const SymMatrix3& o) const {
  SymMatrix3 r;
  for (std::size_t i = 0; i < 6; ++i) r.e_[i] = e_[i] - o.e_[i];
  return r;
}

SymMatrix3 SymMatrix3::operator*(double s) const {
  SymMatrix3 r;
  for (std::size_t i = 0; i < 6; ++i) r.e_[i] = e_[i] * s;
  return r;
}

SymEigen eigen_decompose(const SymMatrix3& m) {
  // Tridiagonalization + implicit QR; ascending eigenvalues.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(m.matrix());
  return {solver.eigenvalues(), solver.eigenvectors()};
}

namespace {

SymMatrix3 compose(const SymEigen& eig, const Eigen::Vector3d& values) {
  return SymMatrix3::from_matrix(eig.vectors * values.asDiagonal() * eig.vectors.transpose());
}

}  // namespace

SymMatrix3 spd_sqrt(const SymMatrix3& m) {
  const SymEigen eig = eigen_decompose(m);
  const double tol = 1e-9 * std::max(1.0, eig.values[2]);
  if (eig.values[0] < -tol) {
    std::ostringstream msg;
    msg << "spd_sqrt: matrix has eigenvalue " << eig.values[0] << " below tolerance -" << tol;
    throw NumericError(msg.str());
  }
  Eigen::Vector3d roots;
  for (int i = 0; i < 3; ++i) roots[i] = std::sqrt(std::max(eig.values[i], 0.0));
  return compose(eig, roots);
}

double wasserstein_gaussian(const Gaussian3& g, const Gaussian3& e) {
  const double mean_term = (g.mean - e.mean).squaredNorm();

  // Equal covariances cancel exactly; the general route would leave rounding
  // residue of order 1e-16 * tr(S) under the square root.
  double cov_term = 0.0;
  if (!(g.covariance == e.covariance)) {
    const Eigen::Matrix3d root_e = spd_sqrt(e.covariance).matrix();
    const SymMatrix3 inner = SymMatrix3::from_matrix(root_e * g.covariance.matrix() * root_e);
    cov_term = g.covariance.trace() + e.covariance.trace() - 2.0 * spd_sqrt(inner).trace();
  }
  return std::sqrt(std::max(mean_term + cov_term, 0.0));
}

RigidTransform RigidTransform::from_axis_angle(const Eigen::Vector3d& axis, double angle,
                                               const Eigen::Vector3d& translation) {
  return {Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix(), translation};
}

RigidTransform RigidTransform::exp(const Eigen::Vector3d& rotation_vector,
                                   const Eigen::Vector3d& translation) {
  const double angle = rotation_vector.norm();
  if (angle == 0.0) return {Eigen::Matrix3d::Identity(), translation};
  return {Eigen::AngleAxisd(angle, rotation_vector / angle).toRotationMatrix(), translation};
}

RigidTransform RigidTransform::from_row_major(std::span<const double> values) {
  if (values.size() != 16) {
    throw ParseError("pose must have 16 values, got " + std::to_string(values.size()));
  }
  Eigen::Matrix3d r;
  Eigen::Vector3d t;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r(i, j) = values[static_cast<std::size_t>(4 * i + j)];
    t[i] = values[static_cast<std::size_t>(4 * i + 3)];
  }
  const bool last_row_ok = std::abs(values[12]) < 1e-9 && std::abs(values[13]) < 1e-9 &&
                           std::abs(values[14]) < 1e-9 && std::abs(values[15] - 1.0) < 1e-9;
  if (!last_row_ok) throw ParseError("pose last row must be 0 0 0 1");
  if ((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6 ||
      std::abs(r.determinant() - 1.0) > 1e-6) {
    throw ParseError("pose rotation block is not a proper rotation");
  }
  return {r, t};
}

RigidTransform RigidTransform::operator*(const RigidTransform& o) const {
  return {rotation_ * o.rotation_, rotation_ * o.translation_ + translation_};
}

RigidTransform RigidTransform::inverse() const {
  const Eigen::Matrix3d rt = rotation_.transpose();
  return {rt, -(rt * translation_)};
}

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

std::array<double, 16> RigidTransform::row_major() const {
  const Eigen::Matrix4d m = matrix();
  std::array<double, 16> out{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) out[static_cast<std::size_t>(4 * i + j)] = m(i, j);
  return out;
}

double RigidTransform::rotation_angle() const {
  const Eigen::Matrix3d& r = rotation_;
  const double s = 0.5 * Eigen::Vector3d(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)).norm();
  const double c = 0.5 * (r.trace() - 1.0);
  return std::atan2(s, c);
}

PointCloud apply_transform(const RigidTransform& t, const PointCloud& cloud) {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const Point3& p : cloud.points) out.points.push_back(t * p);
  out.colors = cloud.colors;
  return out;
}

Gaussian3 transform_gaussian(const RigidTransform& t, const Gaussian3& g) {
  const Eigen::Matrix3d& r = t.rotation();
  return {t * g.mean, SymMatrix3::from_matrix(r * g.covariance.matrix() * r.transpose())};
}

}  // namespace mapeval
