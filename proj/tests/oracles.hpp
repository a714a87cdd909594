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

// Reference computations that avoid the library's rotor algebra: dense 2x2
// complex matrices, Taylor-series exponentials, and direct time stepping.

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using C = std::complex<double>;
using Mat2c = Eigen::Matrix2cd;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline std::array<Mat2c, 3> pauli() {
  Mat2c sx, sy, sz;
  sx << 0, 1, 1, 0;
  sy << 0, C(0, -1), C(0, 1), 0;
  sz << 1, 0, 0, -1;
  return {sx, sy, sz};
}

/// v . sigma
inline Mat2c sigma_dot(const Vec3 &v) {
  const auto s = pauli();
  return v.x() * s[0] + v.y() * s[1] + v.z() * s[2];
}

/// exp(m) by a truncated power series.
inline Mat2c expm_series(const Mat2c &m, int terms = 30) {
  Mat2c acc = Mat2c::Identity();
  Mat2c term = Mat2c::Identity();
  for (int k = 1; k < terms; ++k) {
    term = term * m / static_cast<double>(k);
    acc += term;
  }
  return acc;
}

/// exp(-i theta . I) with I = sigma/2, by power series. Large angles are
/// split into small slices so the series converges quickly.
inline Mat2c spin_rotation(const Vec3 &theta, int terms = 30) {
  const int slices = 1 + static_cast<int>(theta.norm());
  const Mat2c gen = C(0, -0.5 / slices) * sigma_dot(theta);
  const Mat2c piece = expm_series(gen, terms);
  Mat2c out = Mat2c::Identity();
  for (int k = 0; k < slices; ++k) out = piece * out;
  return out;
}

/// R_ij = Tr(sigma_i U sigma_j U^dagger) / 2.
inline Mat3 conjugation_matrix(const Mat2c &u) {
  const auto s = pauli();
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = 0.5 * (s[i] * u * s[j] * u.adjoint()).trace().real();
  return r;
}

/// Equal up to a global sign (same SO(3) element).
inline double sign_insensitive_distance(const Mat2c &a, const Mat2c &b) {
  return std::min((a - b).cwiseAbs().maxCoeff(), (a + b).cwiseAbs().maxCoeff());
}

/// Propagator of the piecewise-constant Hamiltonian H(t) = b(t) . I over
/// [0, t_end], using `steps` uniform steps. field(t) returns b at time t.
template <typename Field>
Mat2c time_step_propagator(Field &&field, double t_end, int steps) {
  const double dt = t_end / steps;
  Mat2c u = Mat2c::Identity();
  for (int k = 0; k < steps; ++k) {
    const double t = (k + 0.5) * dt;
    u = spin_rotation(field(t) * dt, 14) * u;
  }
  return u;
}

/// Bloch vector of a 2x2 density matrix, rho = 1/2 + I . n, i.e. n_i = Tr(rho sigma_i).
inline Vec3 bloch_of(const Mat2c &rho) {
  const auto s = pauli();
  return {(rho * s[0]).trace().real(), (rho * s[1]).trace().real(), (rho * s[2]).trace().real()};
}

inline Mat2c density_of(const Vec3 &n) { return 0.5 * (Mat2c::Identity() + sigma_dot(n)); }

inline Vec3 random_vector(std::mt19937_64 &g, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(g), u(g), u(g)};
}

inline Vec3 random_unit(std::mt19937_64 &g) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v(n(g), n(g), n(g));
  return v.normalized();
}

/// Binomial probability by the multiplicative recurrence (no log-gamma).
inline std::vector<double> binomial_recurrence(int n, double p) {
  std::vector<double> out(n + 1, 0.0);
  if (p <= 0.0 || p >= 1.0) {
    out[p <= 0.0 ? 0 : n] = 1.0;
    return out;
  }
  // Start from the mode and walk outwards to stay in range for large n.
  const int mode = static_cast<int>(std::floor((n + 1) * p)) > n ? n : static_cast<int>(std::floor((n + 1) * p));
  out[mode] = 1.0;
  for (int k = mode; k < n; ++k) out[k + 1] = out[k] * (n - k) / (k + 1.0) * p / (1.0 - p);
  for (int k = mode; k > 0; --k) out[k - 1] = out[k] * k / (n - k + 1.0) * (1.0 - p) / p;
  double total = 0.0;
  for (double x : out) total += x;
  for (double &x : out) x /= total;
  return out;
}

}  // namespace oracle
