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
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qndspin/hyperfine_system.hpp"
#include "qndspin/spin_algebra.hpp"

namespace qnd {

/// Waiting interval of length t_R with electron pi-flips at flip_times. The
/// electron starts the wait in |+z>.
struct FlipSchedule {
  double t_R = 0.0;
  std::vector<double> flip_times;

  void validate() const {
    if (!(t_R >= 0.0)) throw std::invalid_argument("FlipSchedule: t_R must be nonnegative");
    if (!std::is_sorted(flip_times.begin(), flip_times.end()))
      throw std::invalid_argument("FlipSchedule: flip times must be sorted");
    if (!flip_times.empty() && (flip_times.front() < 0.0 || flip_times.back() > t_R))
      throw std::invalid_argument("FlipSchedule: flip times must lie within [0, t_R]");
  }
};

struct QndResidual {
  double angle_defect = 0.0;  // radians, in [0, pi]
};

/// Nuclear rotor accumulated during the wait.
inline Rotor waiting_rotor(const SpinSystem &sys, const FlipSchedule &sched) {
  sched.validate();
  Rotor r;
  double t0 = 0.0;
  int s = 1;
  auto advance = [&](double t1) {
    if (t1 > t0) r = rotor_exp(sys.field(s) * (t1 - t0)) * r;
    t0 = t1;
  };
  for (double tf : sched.flip_times) {
    advance(tf);
    s = -s;
  }
  advance(sched.t_R);
  return r;
}

/// phi_R as a canonical rotation vector (same SO(3) image as the product).
inline RotVec3 waiting_rotation(const SpinSystem &sys, const FlipSchedule &sched) {
  sched.validate();
  if (sched.flip_times.empty()) {
    RotVec3 direct = sys.field(+1) * sched.t_R;
    if (direct.norm() < kPi) return direct;
  }
  return rotor_log(waiting_rotor(sys, sched));
}

/// exp(-i phi.I) = exp(-i phi_R.I) exp(-i phi_DD.I).
inline Rotor total_cycle_rotation(const RotVec3 &phi_r, const RotVec3 &phi_dd) {
  return rotor_exp(phi_r) * rotor_exp(phi_dd);
}

/// Angle between alpha_hat and R(phi) alpha_hat; zero iff the cycle rotation
/// commutes with alpha_hat . I.
inline QndResidual qnd_residual(const Rotor &total, const Vec3 &alpha_hat) {
  return {angle_between(alpha_hat, so3_from_rotor(total).apply(alpha_hat))};
}

struct WaitingTimeMinimum {
  double t_R = 0.0;
  double residual = 0.0;
};

/// Local minima of the QND residual over free-precession waiting times
/// t_R in [t_lo, t_hi] (electron kept in |+z>, phi_R = (omega + A/2) t_R).
/// Minima come from a dense grid and are refined by golden-section search.
inline std::vector<WaitingTimeMinimum> solve_waiting_time(const SpinSystem &sys, const RotVec3 &phi_dd,
                                                          const Vec3 &alpha_hat, double t_lo, double t_hi,
                                                          int grid_points = 2048) {
  if (!(t_hi > t_lo)) throw std::invalid_argument("solve_waiting_time: empty search window");
  if (grid_points < 3) throw std::invalid_argument("solve_waiting_time: need at least 3 grid points");

  const Vec3 n = alpha_hat.normalized();
  const Vec3 target = rotation_matrix(phi_dd).apply(n);  // alpha_hat_DD
  const Vec3 field = sys.field(+1);
  auto residual = [&](double t) { return angle_between(n, rotation_matrix(field * t).apply(target)); };

  const double h = (t_hi - t_lo) / (grid_points - 1);
  std::vector<double> ts(grid_points), fs(grid_points);
  for (int i = 0; i < grid_points; ++i) {
    ts[i] = i + 1 == grid_points ? t_hi : t_lo + i * h;
    fs[i] = residual(ts[i]);
  }

  const double t_eps = 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t_lo), std::abs(t_hi));
  std::vector<WaitingTimeMinimum> out;
  for (int i = 0; i < grid_points; ++i) {
    const double left = i > 0 ? fs[i - 1] : std::numeric_limits<double>::infinity();
    const double right = i + 1 < grid_points ? fs[i + 1] : std::numeric_limits<double>::infinity();
    // Strict on the left so a flat pair is reported once.
    if (!(fs[i] < left && fs[i] <= right)) continue;

    double a = ts[std::max(i - 1, 0)];
    double b = ts[std::min(i + 1, grid_points - 1)];
    WaitingTimeMinimum best{ts[i], fs[i]};
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    double f1 = residual(x1), f2 = residual(x2);
    for (int it = 0; it < 400 && best.residual > 1e-13 && (b - a) > t_eps; ++it) {
      if (f1 < f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - g * (b - a);
        f1 = residual(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + g * (b - a);
        f2 = residual(x2);
      }
      if (f1 < best.residual) best = {x1, f1};
      if (f2 < best.residual) best = {x2, f2};
    }
    if (!out.empty() && std::abs(out.back().t_R - best.t_R) < 0.5 * h) {
      if (best.residual < out.back().residual) out.back() = best;
      continue;
    }
    out.push_back(best);
  }
  return out;
}

/// Smallest residual among the minima returned by solve_waiting_time.
inline WaitingTimeMinimum best_waiting_time(const std::vector<WaitingTimeMinimum> &minima) {
  if (minima.empty()) throw std::invalid_argument("best_waiting_time: no minima");
  return *std::min_element(minima.begin(), minima.end(),
                           [](const auto &x, const auto &y) { return x.residual < y.residual; });
}

/// Repetitions of the order-l concatenated sequence U_l = (U_{l-1})_{flip} U_{l-1},
/// built from free blocks of length tau/4. l = 1 is periodic DD, l = 2 is CPMG.
/// Odd orders end with a pulse at t_DD that returns the electron to |+z>.
inline DDSequence concatenated_dd(int order, double base_tau, int n_repeats) {
  if (order < 1) throw std::invalid_argument("concatenated_dd: order must be >= 1");
  if (order > 20) throw std::invalid_argument("concatenated_dd: order too large");
  if (!(base_tau > 0.0)) throw std::invalid_argument("concatenated_dd: tau must be positive");
  if (n_repeats < 1) throw std::invalid_argument("concatenated_dd: n_repeats must be >= 1");

  std::vector<int> pattern{1};
  for (int l = 0; l < order; ++l) {
    const std::size_t m = pattern.size();
    for (std::size_t k = 0; k < m; ++k) pattern.push_back(-pattern[k]);
  }
  const double block = 0.25 * base_tau;
  const std::size_t per = pattern.size();
  const std::size_t total = per * n_repeats;
  std::vector<double> pulses;
  for (std::size_t k = 1; k < total; ++k) {
    if (pattern[k % per] != pattern[(k - 1) % per]) pulses.push_back(k * block);
  }
  const double duration = total * block;
  if (pattern.back() != pattern.front()) pulses.push_back(duration);
  return {std::move(pulses), duration};
}

namespace detail {

inline double su2_mismatch(const Rotor &a, const Rotor &b) {
  return std::abs(a.scalar() - b.scalar()) + (a.vector() - b.vector()).norm();
}

}  // namespace detail

/// (c, d) with exp(-i(c + S_z d).I) = exp(-i(c0 - S_z d0).I) exp(-i(c0 + S_z d0).I).
/// c lies in the c0-d0 plane and d is parallel to c0 x d0.
inline std::pair<Vec3, Vec3> decompose_joint(const Vec3 &c0, const Vec3 &d0) {
  // S_z = +-1/2 branches.
  const Rotor up = rotor_exp(c0 - 0.5 * d0) * rotor_exp(c0 + 0.5 * d0);
  const Rotor um = rotor_exp(c0 + 0.5 * d0) * rotor_exp(c0 - 0.5 * d0);
  const Vec3 tp = rotor_log_su2(up).theta;  // c + d/2
  const Vec3 tm = rotor_log_su2(um).theta;  // c - d/2
  return {0.5 * (tp + tm), tp - tm};
}

/// (c~, d~) with exp(-i c~.I) exp(-i 2 S_z d~.I) = exp(-i(c + S_z d).I), for c
/// perpendicular to d. Then c~ || c and d~ || R(-c~/2) d.
inline std::pair<Vec3, Vec3> split_conditional(const Vec3 &c, const Vec3 &d) {
  const double scale = std::max(1.0, c.norm() * d.norm());
  if (std::abs(c.dot(d)) > 1e-9 * scale) throw std::invalid_argument("split_conditional: c and d must be orthogonal");
  const Rotor up = rotor_exp(c + 0.5 * d);
  const Rotor um = rotor_exp(c - 0.5 * d);
  Su2Log lg = rotor_log_su2(up.adjoint() * um);
  const Vec3 d_tilde = lg.degenerate ? Vec3(kPi, 0.0, 0.0) : Vec3(-0.5 * lg.theta);
  const Rotor c_rotor = up * rotor_exp(-d_tilde);
  if (detail::su2_mismatch(c_rotor, um * rotor_exp(d_tilde)) > 1e-10)
    throw std::logic_error("split_conditional: inconsistent branches");
  return {rotor_log_su2(c_rotor).theta, d_tilde};
}

}  // namespace qnd
