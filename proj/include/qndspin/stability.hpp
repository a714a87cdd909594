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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qndspin/hyperfine_system.hpp"
#include "qndspin/parallel.hpp"
#include "qndspin/rng.hpp"
#include "qndspin/spin_algebra.hpp"

namespace qnd {

inline constexpr double kInfiniteLifetime = std::numeric_limits<double>::infinity();

/// Outcome-averaged Bloch map of one binary measurement, [R(a) + R(-a)]/2.
struct DephasingMap {
  Mat3 matrix = Mat3::Identity();

  Vec3 apply(const Vec3 &v) const { return matrix * v; }
};

inline DephasingMap dephasing_map(const RotVec3 &alpha_vec) {
  return {0.5 * (rotation_matrix(alpha_vec).matrix() + rotation_matrix(-alpha_vec).matrix())};
}

/// Per-cycle rotation errors applied after each measurement.
struct RotationErrorModel {
  enum class Kind { systematic, random, explicit_errors, full_rotations };
  enum class Axis { fixed, isotropic };

  Kind kind = Kind::systematic;
  RotVec3 delta = RotVec3::Zero();         // systematic
  Axis axis_policy = Axis::fixed;          // random
  Vec3 axis = Vec3::UnitZ();               // random, fixed axis
  double std_dev = 0.0;                    // random
  std::optional<std::uint64_t> seed;       // random
  std::vector<RotVec3> errors;             // explicit, reused cyclically
  std::vector<Mat3> rotations;             // full per-cycle maps, reused cyclically

  static RotationErrorModel systematic(const RotVec3 &d) {
    RotationErrorModel m;
    m.kind = Kind::systematic;
    m.delta = d;
    return m;
  }
  static RotationErrorModel random_fixed_axis(const Vec3 &axis, double std_dev, std::uint64_t seed) {
    RotationErrorModel m;
    m.kind = Kind::random;
    m.axis_policy = Axis::fixed;
    m.axis = axis;
    m.std_dev = std_dev;
    m.seed = seed;
    return m;
  }
  /// Each Cartesian component drawn with std_dev.
  static RotationErrorModel random_isotropic(double std_dev, std::uint64_t seed) {
    RotationErrorModel m;
    m.kind = Kind::random;
    m.axis_policy = Axis::isotropic;
    m.std_dev = std_dev;
    m.seed = seed;
    return m;
  }
  static RotationErrorModel explicit_errors(std::vector<RotVec3> errs) {
    RotationErrorModel m;
    m.kind = Kind::explicit_errors;
    m.errors = std::move(errs);
    return m;
  }
  /// Full per-cycle rotations R(phi_actual); they replace R(delta phi) entirely.
  static RotationErrorModel full_rotations(std::vector<Mat3> rots) {
    RotationErrorModel m;
    m.kind = Kind::full_rotations;
    m.rotations = std::move(rots);
    return m;
  }

  void validate() const {
    switch (kind) {
      case Kind::random:
        if (!(std_dev >= 0.0)) throw std::invalid_argument("RotationErrorModel: std must be nonnegative");
        if (!seed) throw std::invalid_argument("RotationErrorModel: random errors need a seed");
        if (axis_policy == Axis::fixed && axis.norm() == 0.0)
          throw std::invalid_argument("RotationErrorModel: random axis must be nonzero");
        break;
      case Kind::explicit_errors:
        if (errors.empty()) throw std::invalid_argument("RotationErrorModel: explicit error list is empty");
        break;
      case Kind::full_rotations:
        if (rotations.empty()) throw std::invalid_argument("RotationErrorModel: rotation list is empty");
        break;
      case Kind::systematic:
        break;
    }
  }
};

/// S(N) = alpha_hat . alpha_hat(N) for N = 0..N_max.
struct SurvivalCurve {
  std::vector<double> values;
  double lifetime = kInfiniteLifetime;  // first N with S <= 1/e
  std::int64_t n_max = 0;
};

inline Vec3 measurement_axis(const RotVec3 &alpha_vec) {
  const double a = alpha_vec.norm();
  return a > 0.0 ? Vec3(alpha_vec / a) : Vec3::UnitX();
}

inline SurvivalCurve survival_curve(const RotVec3 &alpha_vec, const RotationErrorModel &model, std::int64_t n_max) {
  if (n_max < 1) throw std::invalid_argument("survival_curve: N_max must be >= 1");
  model.validate();
  const Vec3 ah = measurement_axis(alpha_vec);
  const Mat3 m = dephasing_map(alpha_vec).matrix;
  const double threshold = std::exp(-1.0);

  std::optional<Rng> rng;
  if (model.kind == RotationErrorModel::Kind::random) rng.emplace(*model.seed);
  const Mat3 fixed_error = rotation_matrix(model.delta).matrix();
  const Vec3 fixed_axis = model.axis.normalized();

  auto cycle_map = [&](std::int64_t i) -> Mat3 {
    using K = RotationErrorModel::Kind;
    switch (model.kind) {
      case K::systematic:
        return fixed_error * m;
      case K::random: {
        RotVec3 d;
        if (model.axis_policy == RotationErrorModel::Axis::fixed) {
          d = model.std_dev * rng->normal() * fixed_axis;
        } else {
          const double x = rng->normal(), y = rng->normal(), z = rng->normal();
          d = model.std_dev * Vec3(x, y, z);
        }
        return rotation_matrix(d).matrix() * m;
      }
      case K::explicit_errors:
        return rotation_matrix(model.errors[i % model.errors.size()]).matrix() * m;
      case K::full_rotations:
        return model.rotations[i % model.rotations.size()] * m;
    }
    return m;
  };

  SurvivalCurve c;
  c.n_max = n_max;
  c.values.reserve(static_cast<std::size_t>(n_max) + 1);
  c.values.push_back(1.0);
  Vec3 v = ah;
  for (std::int64_t i = 0; i < n_max; ++i) {
    v = cycle_map(i) * v;
    const double s = ah.dot(v);
    c.values.push_back(s);
    if (std::isinf(c.lifetime) && s <= threshold) c.lifetime = static_cast<double>(i + 1);
  }
  return c;
}

inline double lifetime(const SurvivalCurve &c) { return c.lifetime; }

/// First N with alpha_hat . K^N alpha_hat <= 1/e, or the infinite sentinel if
/// none up to n_max. Nothing is stored, for large scans.
inline double lifetime_of_map(const Mat3 &cycle, const Vec3 &alpha_hat, std::int64_t n_max) {
  const double threshold = std::exp(-1.0);
  Vec3 v = alpha_hat;
  for (std::int64_t i = 1; i <= n_max; ++i) {
    v = cycle * v;
    if (alpha_hat.dot(v) <= threshold) return static_cast<double>(i);
  }
  return kInfiniteLifetime;
}

/// Mean and standard error of S(N) over independent random-error runs.
struct EnsembleSurvival {
  std::vector<double> mean;
  std::vector<double> std_error;
};

/// Run i uses stream_seed(master_seed, i).
inline EnsembleSurvival ensemble_survival(const RotVec3 &alpha_vec, RotationErrorModel model, int runs,
                                          std::uint64_t master_seed, std::int64_t n_max, unsigned threads = 0) {
  if (runs < 2) throw std::invalid_argument("ensemble_survival: need at least 2 runs");
  if (model.kind != RotationErrorModel::Kind::random)
    throw std::invalid_argument("ensemble_survival: random error model expected");
  model.seed = master_seed;
  model.validate();
  std::vector<std::vector<double>> curves(runs);
  parallel_for(
      static_cast<std::size_t>(runs),
      [&](std::size_t i) {
        RotationErrorModel local = model;
        local.seed = stream_seed(master_seed, i);
        curves[i] = survival_curve(alpha_vec, local, n_max).values;
      },
      threads);
  EnsembleSurvival out;
  const std::size_t len = static_cast<std::size_t>(n_max) + 1;
  out.mean.assign(len, 0.0);
  out.std_error.assign(len, 0.0);
  for (std::size_t k = 0; k < len; ++k) {
    double s = 0.0, s2 = 0.0;
    for (const auto &c : curves) {
      s += c[k];
      s2 += c[k] * c[k];
    }
    const double mean = s / runs;
    const double var = std::max(0.0, (s2 - runs * mean * mean) / (runs - 1));
    out.mean[k] = mean;
    out.std_error[k] = std::sqrt(var / runs);
  }
  return out;
}

enum class ErrorKind { systematic, random };

/// Small-error exponential laws: systematic error perpendicular to alpha_hat
/// gives exp(-N dphi^2 / (2 tan^2(alpha/2))); iid random errors give
/// exp(-N dphi^2 / 2).
inline double analytic_survival(ErrorKind kind, double alpha, double dphi, std::int64_t n) {
  if (n == 0) return 1.0;
  const double nn = static_cast<double>(n);
  if (kind == ErrorKind::random) return std::exp(-0.5 * nn * dphi * dphi);
  const double t = std::tan(0.5 * alpha);
  if (t == 0.0) return dphi == 0.0 ? 1.0 : 0.0;
  return std::exp(-0.5 * nn * dphi * dphi / (t * t));
}

/// cos(alpha) = 0, errors perpendicular to alpha_hat: S(N) = prod cos(dphi_i).
inline double survival_perpendicular_product(const std::vector<double> &dphi, std::size_t n) {
  if (n > dphi.size()) throw std::invalid_argument("survival_perpendicular_product: not enough errors");
  double s = 1.0;
  for (std::size_t i = 0; i < n; ++i) s *= std::cos(dphi[i]);
  return s;
}

/// cos(alpha) = -1, errors along one perpendicular axis: S(N) = cos(sum (-1)^i dphi_i).
inline double survival_echo(const std::vector<double> &dphi, std::size_t n) {
  if (n > dphi.size()) throw std::invalid_argument("survival_echo: not enough errors");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += (i % 2 == 0 ? -1.0 : 1.0) * dphi[i];  // i is zero-based
  return std::cos(acc);
}

/// Tolerated rotation error: D |tan(alpha/2)| (systematic) or D (random).
inline double tolerance(double strength_D, double alpha, ErrorKind kind) {
  if (!(strength_D > 0.0)) throw std::invalid_argument("tolerance: D must be positive");
  return kind == ErrorKind::random ? strength_D : strength_D * std::abs(std::tan(0.5 * alpha));
}

/// Waiting-time tolerance Delta phi / |omega + A/2|.
inline double tolerance_time(double delta_phi, const SpinSystem &sys) {
  const double f = sys.field(+1).norm();
  if (!(f > 0.0)) throw std::invalid_argument("tolerance_time: zero waiting-time field");
  return delta_phi / f;
}

}  // namespace qnd
