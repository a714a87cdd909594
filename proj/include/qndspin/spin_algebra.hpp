// Copyright 2026 The qndspin Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <complex>
#include <numbers>

#include <Eigen/Dense>

namespace qnd {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat2c = Eigen::Matrix2cd;

/// Rotation vector: axis times angle (radians). The operator it stands for is
/// exp(-i theta . I) with I = sigma / 2.
using RotVec3 = Eigen::Vector3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Spin-1/2 rotation exp(-i theta . I) = cos(|theta|/2) - i sigma . n sin(|theta|/2),
/// stored as U = scalar + i vector . sigma, i.e. (cos(|theta|/2), -n sin(|theta|/2)).
class Rotor {
 public:
  Rotor() = default;
  Rotor(double scalar, const Vec3 &vector) : scalar_(scalar), vector_(vector) {}

  static Rotor identity() { return {}; }

  double scalar() const { return scalar_; }
  const Vec3 &vector() const { return vector_; }

  double norm() const { return std::sqrt(scalar_ * scalar_ + vector_.squaredNorm()); }

  Rotor normalized() const {
    double n = norm();
    return {scalar_ / n, vector_ / n};
  }

  /// Hermitian adjoint, i.e. the inverse rotation.
  Rotor adjoint() const { return {scalar_, -vector_}; }

  Rotor operator-() const { return {-scalar_, -vector_}; }

  /// Dense 2x2 form w*1 + i v.sigma.
  Mat2c matrix() const {
    using C = std::complex<double>;
    const C i(0.0, 1.0);
    Mat2c m;
    m(0, 0) = C(scalar_, 0.0) + i * vector_.z();
    m(0, 1) = i * C(vector_.x(), -vector_.y());
    m(1, 0) = i * C(vector_.x(), vector_.y());
    m(1, 1) = C(scalar_, 0.0) - i * vector_.z();
    return m;
  }

 private:
  double scalar_ = 1.0;
  Vec3 vector_ = Vec3::Zero();
};

/// Returns r2 after r1 (operator product r2 r1), renormalized.
inline Rotor rotor_compose(const Rotor &r2, const Rotor &r1) {
  double w = r2.scalar() * r1.scalar() - r2.vector().dot(r1.vector());
  Vec3 v = r2.scalar() * r1.vector() + r1.scalar() * r2.vector() - r2.vector().cross(r1.vector());
  return Rotor(w, v).normalized();
}

/// Operator-product order: (a * b) applies b first.
inline Rotor operator*(const Rotor &a, const Rotor &b) { return rotor_compose(a, b); }

inline Rotor rotor_exp(const RotVec3 &theta) {
  double angle = theta.norm();
  double half = 0.5 * angle;
  // sin(angle/2)/angle, with the series near zero.
  double k = angle < 1e-6 ? 0.5 - angle * angle / 48.0 : std::sin(half) / angle;
  return {std::cos(half), -k * theta};
}

namespace detail {

// theta with exp(theta) == r exactly (no sign folding); |theta| in [0, 2 pi].
inline RotVec3 log_unfolded(double w, const Vec3 &v) {
  double s = v.norm();
  double angle = 2.0 * std::atan2(s, w);
  if (s < 1e-9 && w > 0.0) {
    // angle / s = (2/w)(1 - s^2/(3w^2) + ...)
    double q = s / w;
    return -v * (2.0 / w) * (1.0 - q * q / 3.0);
  }
  return -v * (angle / s);
}

}  // namespace detail

/// Canonical logarithm with |theta| in [0, pi]; exp(log(r)) == +-r.
inline RotVec3 rotor_log(const Rotor &r) {
  Rotor u = r.normalized();
  if (u.scalar() < 0.0) u = -u;
  return detail::log_unfolded(u.scalar(), u.vector());
}

struct Su2Log {
  RotVec3 theta;
  bool degenerate = false;
};

/// Logarithm on the double cover: |theta| in [0, 2 pi] and exp(theta) == r,
/// not just up to sign. At r == -1 the axis is undefined; theta = (2 pi, 0, 0)
/// is returned with `degenerate` set.
inline Su2Log rotor_log_su2(const Rotor &r) {
  Rotor u = r.normalized();
  if (u.vector().norm() < 1e-15 && u.scalar() < 0.0) {
    return {RotVec3(kTwoPi, 0.0, 0.0), true};
  }
  return {detail::log_unfolded(u.scalar(), u.vector()), false};
}

/// Proper rotation matrix (the SO(3) image of a rotor).
class SO3Matrix {
 public:
  SO3Matrix() : m_(Mat3::Identity()) {}
  explicit SO3Matrix(const Mat3 &m) : m_(m) {}

  const Mat3 &matrix() const { return m_; }
  Vec3 apply(const Vec3 &v) const { return m_ * v; }
  SO3Matrix transpose() const { return SO3Matrix(m_.transpose()); }

  friend SO3Matrix operator*(const SO3Matrix &a, const SO3Matrix &b) { return SO3Matrix(a.m_ * b.m_); }

 private:
  Mat3 m_;
};

/// R such that U (sigma . v) U^dagger = sigma . (R v); a right-handed rotation
/// by |theta| about theta.
inline SO3Matrix so3_from_rotor(const Rotor &r) {
  const double w = r.scalar();
  const Vec3 &v = r.vector();
  Mat3 cross;
  cross << 0.0, -v.z(), v.y(),
           v.z(), 0.0, -v.x(),
           -v.y(), v.x(), 0.0;
  Mat3 m = (w * w - v.squaredNorm()) * Mat3::Identity() + 2.0 * v * v.transpose() - 2.0 * w * cross;
  return SO3Matrix(m);
}

inline Vec3 apply(const SO3Matrix &m, const Vec3 &v) { return m.apply(v); }

/// The rotation matrix R(theta).
inline SO3Matrix rotation_matrix(const RotVec3 &theta) { return so3_from_rotor(rotor_exp(theta)); }

/// Angle between two nonzero vectors, accurate near 0 and pi.
inline double angle_between(const Vec3 &a, const Vec3 &b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

}  // namespace qnd
