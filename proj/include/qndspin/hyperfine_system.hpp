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
#include <complex>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qndspin/spin_algebra.hpp"

namespace qnd {

/// Electron-nuclear system H = omega . I + S_z A . I in the electron
/// interaction picture. All frequencies in rad/s.
struct SpinSystem {
  double omega_n = 0.0;          // bare nuclear Zeeman frequency (signed)
  Vec3 a_plus = Vec3::Zero();    // hyperfine vector, electron in |+z>
  Vec3 a_minus = Vec3::Zero();   // hyperfine vector, electron in |-z>

  /// Build from the effective fields directly (omega_n is folded into a_+-).
  static SpinSystem effective(const Vec3 &omega, const Vec3 &a) {
    return {0.0, omega + 0.5 * a, omega - 0.5 * a};
  }

  Vec3 omega() const { return omega_n * Vec3::UnitZ() + 0.5 * (a_plus + a_minus); }
  Vec3 hyperfine() const { return a_plus - a_minus; }

  /// Component of A perpendicular to omega.
  Vec3 a_perp() const {
    Vec3 w = omega();
    Vec3 a = hyperfine();
    double wn = w.squaredNorm();
    if (wn == 0.0) return a;
    return a - (a.dot(w) / wn) * w;
  }

  /// Precession vector while the electron sits in |+-z>.
  Vec3 field(int electron_sign) const { return omega() + 0.5 * electron_sign * hyperfine(); }
};

/// Instantaneous electron pi-pulses at sorted times within [0, duration].
class DDSequence {
 public:
  DDSequence() = default;
  DDSequence(std::vector<double> pulse_times, double duration)
      : pulses_(std::move(pulse_times)), duration_(duration) {
    if (!(duration_ >= 0.0)) throw std::invalid_argument("DD duration must be nonnegative");
    if (!std::is_sorted(pulses_.begin(), pulses_.end()))
      throw std::invalid_argument("DD pulse times must be sorted");
    if (!pulses_.empty() && (pulses_.front() < 0.0 || pulses_.back() > duration_))
      throw std::invalid_argument("DD pulse times must lie within [0, duration]");
  }

  const std::vector<double> &pulse_times() const { return pulses_; }
  double duration() const { return duration_; }
  std::size_t num_pulses() const { return pulses_.size(); }

  /// Calls f(t_start, t_end, s) for each pulse-free interval; s starts at +1.
  template <typename F>
  void for_each_interval(F &&f) const {
    double t0 = 0.0;
    int s = 1;
    for (double tp : pulses_) {
      f(t0, tp, s);
      t0 = tp;
      s = -s;
    }
    f(t0, duration_, s);
  }

  /// Integral of s(t) over [0, duration]. Balanced sequences give zero.
  double modulation_integral() const {
    double acc = 0.0;
    for_each_interval([&](double a, double b, int s) { acc += s * (b - a); });
    return acc;
  }

 private:
  std::vector<double> pulses_;
  double duration_ = 0.0;
};

/// N-period CPMG (tau/4 - pi - tau/2 - pi - tau/4)^N.
inline DDSequence cpmg(int n_periods, double tau) {
  if (n_periods < 1) throw std::invalid_argument("cpmg: n_periods must be >= 1");
  if (!(tau > 0.0)) throw std::invalid_argument("cpmg: tau must be positive");
  std::vector<double> t;
  t.reserve(2 * n_periods);
  for (int k = 0; k < n_periods; ++k) {
    // One rounding per pulse time.
    t.push_back((4.0 * k + 1.0) * tau / 4.0);
    t.push_back((4.0 * k + 3.0) * tau / 4.0);
  }
  return {std::move(t), n_periods * tau};
}

/// Nuclear evolution conditioned on the initial electron state |+-z>.
struct ConditionalEvolution {
  Rotor u_plus;
  Rotor u_minus;
};

/// Exact toggling-frame product: every interval has a constant Hamiltonian.
inline ConditionalEvolution exact_dd_evolution(const SpinSystem &sys, const DDSequence &seq) {
  const Vec3 w = sys.omega();
  const Vec3 half_a = 0.5 * sys.hyperfine();
  Rotor up, um;
  seq.for_each_interval([&](double a, double b, int s) {
    double dt = b - a;
    if (dt <= 0.0) return;
    up = rotor_exp((w + s * half_a) * dt) * up;
    um = rotor_exp((w - s * half_a) * dt) * um;
  });
  return {up, um};
}

/// Decomposition u_+- = exp(-i phi_DD.I) exp(-+i alpha.I).
struct AlphaPhi {
  RotVec3 alpha = RotVec3::Zero();
  RotVec3 phi_dd = RotVec3::Zero();
  bool degenerate = false;  // u_+^dagger u_- == -1: alpha axis fixed to e_x
};

/// Recovers alpha (|alpha| in [0, pi]) and phi_DD (canonical branch) from the
/// two conditional evolutions. Throws std::logic_error if the two
/// reconstructions of exp(-i phi_DD.I) disagree.
inline AlphaPhi extract_alpha_phi(const Rotor &u_plus, const Rotor &u_minus) {
  // exp(2i alpha.I) = u_+^dagger u_-, i.e. the rotor of theta = -2 alpha.
  Su2Log lg = rotor_log_su2(u_plus.adjoint() * u_minus);
  AlphaPhi out;
  out.degenerate = lg.degenerate;
  out.alpha = lg.degenerate ? RotVec3(kPi, 0.0, 0.0) : RotVec3(-0.5 * lg.theta);

  Rotor from_plus = u_plus * rotor_exp(-out.alpha);
  Rotor from_minus = u_minus * rotor_exp(out.alpha);
  double mismatch = std::abs(from_plus.scalar() - from_minus.scalar()) +
                    (from_plus.vector() - from_minus.vector()).norm();
  if (mismatch > 1e-10) throw std::logic_error("extract_alpha_phi: inconsistent conditional evolutions");
  out.phi_dd = rotor_log(from_plus);
  return out;
}

inline AlphaPhi extract_alpha_phi(const ConditionalEvolution &u) { return extract_alpha_phi(u.u_plus, u.u_minus); }

/// f_DD = (1/t_DD) int_0^t_DD s(t) exp(i |omega| t) dt, summed interval by interval.
inline std::complex<double> filter_function(const DDSequence &seq, double omega_mag) {
  if (!(omega_mag > 0.0)) throw std::invalid_argument("filter_function: |omega| must be positive");
  // Extended precision keeps the relative error small near zeros of f.
  using L = long double;
  const L w = omega_mag;
  std::complex<L> acc = 0.0L;
  seq.for_each_interval([&](double a, double b, int s) {
    // exp(iwb) - exp(iwa) = 2i sin(w(b-a)/2) exp(iw(a+b)/2)
    const L half = 0.5L * w * (static_cast<L>(b) - static_cast<L>(a));
    const L mid = 0.5L * w * (static_cast<L>(a) + static_cast<L>(b));
    acc += static_cast<L>(s) * 2.0L * std::sin(half) * std::complex<L>(std::cos(mid), std::sin(mid));
  });
  const std::complex<L> f = acc / (w * static_cast<L>(seq.duration()));
  return {static_cast<double>(f.real()), static_cast<double>(f.imag())};
}

/// Closed form for CPMG; falls back to the interval sum where cos(|w| tau/4)
/// vanishes (removable singularity).
inline std::complex<double> cpmg_filter_closed_form(int n_periods, double tau, double omega_mag) {
  using L = long double;
  const L w = omega_mag, tl = tau;
  const L t_dd = n_periods * tl;
  const L c = std::cos(w * tl / 4.0L);
  if (std::abs(c) < 1e-6L) return filter_function(cpmg(n_periods, tau), omega_mag);
  const L s8 = std::sin(w * tl / 8.0L);
  const L mag = 4.0L / (w * t_dd) * s8 * s8 * std::sin(w * t_dd / 2.0L) / c;
  const L ph = w * t_dd / 2.0L;
  return {static_cast<double>(-mag * std::cos(ph)), static_cast<double>(-mag * std::sin(ph))};
}

/// First-order Magnus estimate: phi_DD ~ omega t_DD,
/// alpha ~ |f| R(-arg(f) omega_hat) A_perp t_DD / 2.
inline AlphaPhi weak_coupling_alpha(const SpinSystem &sys, const DDSequence &seq) {
  const Vec3 w = sys.omega();
  const double t = seq.duration();
  AlphaPhi out;
  out.phi_dd = w * t;
  const Vec3 a_perp = sys.a_perp();
  if (a_perp.norm() == 0.0 || w.norm() == 0.0) return out;
  const std::complex<double> f = filter_function(seq, w.norm());
  out.alpha = std::abs(f) * rotation_matrix(-std::arg(f) * w.normalized()).apply(0.5 * t * a_perp);
  return out;
}

}  // namespace qnd
