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
#include <complex>
#include <limits>
#include <stdexcept>
#include <utility>

#include "qndspin/spin_algebra.hpp"

namespace qnd {

/// Electron readout: p_+- is the probability of reporting +- when the
/// electron is in |+-_phi>.
struct ReadoutModel {
  double p_plus = 1.0;
  double p_minus = 1.0;

  static ReadoutModel ideal() { return {}; }

  double delta_p() const { return p_plus - p_minus; }
  double p_bar() const { return p_plus + p_minus - 1.0; }
  bool is_ideal() const { return p_plus == 1.0 && p_minus == 1.0; }

  void validate() const {
    if (!(p_plus >= 0.0 && p_plus <= 1.0 && p_minus >= 0.0 && p_minus <= 1.0))
      throw std::invalid_argument("ReadoutModel: p_plus and p_minus must lie in [0, 1]");
  }
};

struct MeasurementSetting {
  RotVec3 alpha_vec = RotVec3::Zero();
  double phi = 0.0;
  ReadoutModel readout;

  double alpha() const { return alpha_vec.norm(); }

  /// Measurement axis; e_x when alpha vanishes.
  Vec3 axis() const {
    double a = alpha();
    return a > 0.0 ? Vec3(alpha_vec / a) : Vec3::UnitX();
  }
};

/// Which eigenstate of alpha_hat . I the nucleus starts in.
enum class Branch { plus, minus };

inline int branch_sign(Branch b) { return b == Branch::plus ? 1 : -1; }

struct BinaryStats {
  double mean_plus = 0.0;
  double mean_minus = 0.0;
  double sigma_plus = 0.0;
  double sigma_minus = 0.0;
  double strength_D = 0.0;  // +inf when projective
  bool projective = false;
};

namespace detail {

// <u>_a with a = sign * alpha, including imperfect readout.
inline double conditional_mean(const MeasurementSetting &s, int sign) {
  const double c = std::cos(s.phi - sign * s.alpha());
  return s.readout.delta_p() + s.readout.p_bar() * c;
}

}  // namespace detail

/// P(u | a) for u in {+1, -1}.
inline double outcome_prob(const MeasurementSetting &s, Branch a, int u) {
  s.readout.validate();
  if (u != 1 && u != -1) throw std::invalid_argument("outcome_prob: u must be +1 or -1");
  const double p = 0.5 * (1.0 + u * detail::conditional_mean(s, branch_sign(a)));
  if (p < -1e-12 || p > 1.0 + 1e-12) throw std::invalid_argument("outcome_prob: invalid ReadoutModel");
  return std::clamp(p, 0.0, 1.0);
}

inline BinaryStats binary_stats(const MeasurementSetting &s) {
  s.readout.validate();
  BinaryStats st;
  st.mean_plus = detail::conditional_mean(s, +1);
  st.mean_minus = detail::conditional_mean(s, -1);
  auto sigma = [&](int sign, double mean) {
    // Same value as sqrt(1 - mean^2), without the cancellation near |mean| = 1.
    if (s.readout.is_ideal()) return std::abs(std::sin(s.phi - sign * s.alpha()));
    return std::sqrt(std::max(0.0, 1.0 - mean * mean));
  };
  st.sigma_plus = sigma(+1, st.mean_plus);
  st.sigma_minus = sigma(-1, st.mean_minus);
  const double signal = std::abs(st.mean_plus - st.mean_minus);
  const double noise = st.sigma_plus + st.sigma_minus;
  if (noise <= 1e-12) {
    st.projective = signal > 0.0;
    st.strength_D = st.projective ? std::numeric_limits<double>::infinity() : 0.0;
  } else {
    st.strength_D = signal / noise;
  }
  return st;
}

/// Kraus pair M_u = [exp(i(alpha.I - phi/2)) + u exp(-i(alpha.I - phi/2))] / 2.
/// Only defined for ideal electron readout.
inline std::pair<Mat2c, Mat2c> kraus_pair(const MeasurementSetting &s) {
  if (!s.readout.is_ideal())
    throw std::invalid_argument("kraus_pair: Kraus operators are only defined for ideal readout");
  const std::complex<double> half_phase = std::polar(1.0, -0.5 * s.phi);
  // exp(+i alpha.I) is the rotor of -alpha.
  const Mat2c fwd = half_phase * rotor_exp(-s.alpha_vec).matrix();
  const Mat2c bwd = std::conj(half_phase) * rotor_exp(s.alpha_vec).matrix();
  return {0.5 * (fwd + bwd), 0.5 * (fwd - bwd)};
}

}  // namespace qnd
