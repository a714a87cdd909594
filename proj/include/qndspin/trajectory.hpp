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
#include <stdexcept>
#include <utility>
#include <vector>

#include "qndspin/parallel.hpp"
#include "qndspin/rng.hpp"
#include "qndspin/spin_algebra.hpp"
#include "qndspin/weak_measurement.hpp"

namespace qnd {

/// rho = 1/2 + I . bloch.
struct NuclearState {
  Vec3 bloch = Vec3::Zero();

  static NuclearState maximally_mixed() { return {}; }
  /// The pure eigenstate |+-alpha> of alpha_hat . I.
  static NuclearState eigenstate(const MeasurementSetting &s, Branch b) { return {branch_sign(b) * s.axis()}; }
};

struct TrajectoryRecord {
  std::vector<std::int8_t> outcomes;
  double u_bar = 0.0;
  NuclearState final_state;
  std::uint64_t seed = 0;
};

/// Kraus update plus cycle rotation in Bloch form. Both Kraus operators are
/// diagonal in the alpha_hat basis with real off-diagonal ratio, so a step
/// rescales the parallel and perpendicular parts and then rotates.
class TrajectoryKernel {
 public:
  TrajectoryKernel(const MeasurementSetting &s, const Rotor &cycle) {
    if (!s.readout.is_ideal())
      throw std::invalid_argument("TrajectoryKernel: post-measurement states need ideal readout");
    axis_ = s.axis();
    const double cp = 0.5 * (s.phi - s.alpha());  // |+alpha> branch
    const double cm = 0.5 * (s.phi + s.alpha());  // |-alpha> branch
    // |m_u(+-)|^2 and m_u(+) conj(m_u(-)) for u = +1 (index 0) and u = -1 (index 1).
    w_plus_[0] = std::cos(cp) * std::cos(cp);
    w_minus_[0] = std::cos(cm) * std::cos(cm);
    cross_[0] = std::cos(cp) * std::cos(cm);
    w_plus_[1] = std::sin(cp) * std::sin(cp);
    w_minus_[1] = std::sin(cm) * std::sin(cm);
    cross_[1] = std::sin(cp) * std::sin(cm);
    rotation_ = so3_from_rotor(cycle).matrix();
  }

  /// Probability of u = +1 given the current state.
  double prob_plus(const NuclearState &st) const { return prob(st, 0); }

  /// Applies the update for outcome u in {+1, -1}.
  NuclearState update(const NuclearState &st, int u) const {
    const int idx = u == 1 ? 0 : 1;
    const double p = prob(st, idx);
    if (p < -1e-12) throw std::logic_error("TrajectoryKernel: negative outcome probability");
    if (p <= 0.0) throw std::logic_error("TrajectoryKernel: zero-probability outcome");
    const double par = axis_.dot(st.bloch);
    const Vec3 perp = st.bloch - par * axis_;
    const double new_par = (w_plus_[idx] * (1.0 + par) - w_minus_[idx] * (1.0 - par)) / (2.0 * p);
    const Vec3 measured = new_par * axis_ + (cross_[idx] / p) * perp;
    return {rotation_ * measured};
  }

  /// Samples u, updates the state in place, returns u.
  int step(NuclearState &st, Rng &rng) const {
    const double p_plus = std::clamp(prob(st, 0), 0.0, 1.0);
    const int u = rng.uniform() < p_plus ? 1 : -1;
    st = update(st, u);
    return u;
  }

 private:
  double prob(const NuclearState &st, int idx) const {
    const double par = axis_.dot(st.bloch);
    return 0.5 * (w_plus_[idx] * (1.0 + par) + w_minus_[idx] * (1.0 - par));
  }

  Vec3 axis_;
  double w_plus_[2]{}, w_minus_[2]{}, cross_[2]{};
  Mat3 rotation_;
};

/// One measurement cycle: sample u, apply M_u, then the cycle rotation.
inline std::pair<int, NuclearState> step(const NuclearState &state, const MeasurementSetting &s, const Rotor &cycle,
                                         Rng &rng) {
  const TrajectoryKernel k(s, cycle);
  NuclearState st = state;
  const int u = k.step(st, rng);
  return {u, st};
}

inline TrajectoryRecord run(const MeasurementSetting &s, const Rotor &cycle, const NuclearState &initial, int n,
                            std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("run: n must be >= 1");
  const TrajectoryKernel k(s, cycle);
  Rng rng(seed);
  TrajectoryRecord rec;
  rec.seed = seed;
  rec.outcomes.reserve(n);
  NuclearState st = initial;
  long sum = 0;
  for (int i = 0; i < n; ++i) {
    const int u = k.step(st, rng);
    rec.outcomes.push_back(static_cast<std::int8_t>(u));
    sum += u;
  }
  rec.u_bar = static_cast<double>(sum) / n;
  rec.final_state = st;
  return rec;
}

/// Per-trajectory result without the outcome list.
struct TrajectorySummary {
  std::uint64_t seed = 0;
  int plus_count = 0;
  double u_bar = 0.0;
  NuclearState final_state;
};

/// Trajectory i uses stream_seed(master_seed, i); output is in index order
/// regardless of thread count.
inline std::vector<TrajectorySummary> run_ensemble(const MeasurementSetting &s, const Rotor &cycle,
                                                   const NuclearState &initial, int n, std::size_t count,
                                                   std::uint64_t master_seed, unsigned threads = 0) {
  if (n < 1) throw std::invalid_argument("run_ensemble: n must be >= 1");
  const TrajectoryKernel k(s, cycle);
  std::vector<TrajectorySummary> out(count);
  parallel_for(
      count,
      [&](std::size_t i) {
        const std::uint64_t seed = stream_seed(master_seed, i);
        Rng rng(seed);
        NuclearState st = initial;
        int plus = 0;
        for (int j = 0; j < n; ++j) plus += k.step(st, rng) == 1;
        out[i] = {seed, plus, static_cast<double>(2 * plus - n) / n, st};
      },
      threads);
  return out;
}

/// Empirical law of u_bar on the grid k = number of +1 outcomes.
inline std::vector<double> empirical_law(const std::vector<TrajectorySummary> &runs, int n) {
  std::vector<double> p(n + 1, 0.0);
  if (runs.empty()) return p;
  for (const auto &r : runs) p.at(r.plus_count) += 1.0;
  for (double &x : p) x /= static_cast<double>(runs.size());
  return p;
}

}  // namespace qnd
