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
#include <numeric>
#include <stdexcept>
#include <vector>

#include "qndspin/weak_measurement.hpp"

namespace qnd {

/// Conditional laws of the averaged record u_bar over n binary outcomes.
/// Entry k corresponds to u_bar = (2k - n)/n, i.e. k outcomes equal to +1.
struct OutcomeDistribution {
  int n = 0;
  std::vector<double> probs_plus;
  std::vector<double> probs_minus;

  double u_bar(int k) const { return static_cast<double>(2 * k - n) / n; }
};

struct FidelityReport {
  double u_threshold = 0.0;
  double F_plus = 0.0;
  double F_minus = 0.0;
  double F_bar = 0.0;
  double F_erf = 0.0;        // 1/2 + erf(DN / sqrt 2)/2
  double strength_DN = 0.0;  // sqrt(n) D
  std::int64_t N_c = 0;
};

/// Cascaded strength needed for the threshold fidelity.
inline const double kThresholdStrength = std::sqrt(2.0);
inline constexpr double kThresholdFidelity = 0.92;

namespace detail {

inline void normalize(std::vector<double> &p) {
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  if (!(total > 0.0)) throw std::logic_error("OutcomeDistribution: zero total mass");
  for (double &x : p) x /= total;
}

inline std::vector<double> binomial_pmf(int n, double p) {
  std::vector<double> out(n + 1, 0.0);
  if (p <= 0.0) {
    out.front() = 1.0;
    return out;
  }
  if (p >= 1.0) {
    out.back() = 1.0;
    return out;
  }
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  const double lnf = std::lgamma(n + 1.0);
  for (int k = 0; k <= n; ++k) {
    out[k] = std::exp(lnf - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * lp + (n - k) * lq);
  }
  normalize(out);
  return out;
}

inline std::vector<double> gaussian_on_grid(int n, double mean, double sigma) {
  std::vector<double> out(n + 1, 0.0);
  const double h = 2.0 / n;
  if (sigma <= 0.0) {
    const long k = std::lround((mean + 1.0) / h);
    out[std::clamp<long>(k, 0, n)] = 1.0;
    return out;
  }
  const double s = sigma / std::sqrt(static_cast<double>(n));
  const double norm = h / (std::sqrt(2.0 * kPi) * s);
  for (int k = 0; k <= n; ++k) {
    const double z = (static_cast<double>(2 * k - n) / n - mean) / s;
    out[k] = norm * std::exp(-0.5 * z * z);
  }
  normalize(out);
  return out;
}

inline double mean_of(const OutcomeDistribution &d, const std::vector<double> &p) {
  double m = 0.0;
  for (int k = 0; k <= d.n; ++k) m += p[k] * d.u_bar(k);
  return m;
}

}  // namespace detail

/// Binomial law of u_bar conditioned on |+-alpha>.
inline OutcomeDistribution exact_distribution(const MeasurementSetting &s, int n) {
  if (n < 1) throw std::invalid_argument("exact_distribution: n must be >= 1");
  return {n, detail::binomial_pmf(n, outcome_prob(s, Branch::plus, +1)),
          detail::binomial_pmf(n, outcome_prob(s, Branch::minus, +1))};
}

/// Large-n Gaussian approximation sampled on the u_bar grid and renormalized.
inline OutcomeDistribution gaussian_distribution(const MeasurementSetting &s, int n) {
  if (n < 1) throw std::invalid_argument("gaussian_distribution: n must be >= 1");
  const BinaryStats st = binary_stats(s);
  return {n, detail::gaussian_on_grid(n, st.mean_plus, st.sigma_plus),
          detail::gaussian_on_grid(n, st.mean_minus, st.sigma_minus)};
}

/// Total variation distance between two laws on the same grid.
inline double total_variation(const std::vector<double> &p, const std::vector<double> &q) {
  if (p.size() != q.size()) throw std::invalid_argument("total_variation: size mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) acc += std::abs(p[k] - q[k]);
  return 0.5 * acc;
}

/// Grid threshold where the two conditional laws cross, between their means.
/// When a grid point has equal likelihoods the threshold sits on it;
/// otherwise it sits halfway between the two grid points of the crossing.
inline double optimal_threshold(const OutcomeDistribution &d) {
  const double m_plus = detail::mean_of(d, d.probs_plus);
  const double m_minus = detail::mean_of(d, d.probs_minus);
  double max_diff = 0.0;
  for (int k = 0; k <= d.n; ++k) max_diff = std::max(max_diff, std::abs(d.probs_plus[k] - d.probs_minus[k]));
  if (max_diff < 1e-15 || m_plus == m_minus) throw std::invalid_argument("optimal_threshold: states indistinguishable");

  // Orient so `hi` has the larger mean; scan for the - to + crossing of hi - lo.
  const auto &hi = m_plus > m_minus ? d.probs_plus : d.probs_minus;
  const auto &lo = m_plus > m_minus ? d.probs_minus : d.probs_plus;
  const double m_lo = std::min(m_plus, m_minus), m_hi = std::max(m_plus, m_minus);
  const double mid = 0.5 * (m_lo + m_hi);

  double best = mid;
  double best_dist = std::numeric_limits<double>::infinity();
  auto consider = [&](double t) {
    if (std::abs(t - mid) < best_dist) {
      best_dist = std::abs(t - mid);
      best = t;
    }
  };
  int prev_sign = 0;
  int prev_k = -1;
  for (int k = 0; k <= d.n; ++k) {
    const double diff = hi[k] - lo[k];
    // Ignore grid points carrying no mass in either law.
    if (hi[k] == 0.0 && lo[k] == 0.0) continue;
    // Likelihoods equal to rounding count as a tie.
    const double tol = 1e-12 * std::max(hi[k], lo[k]);
    const int sign = diff > tol ? 1 : (diff < -tol ? -1 : 0);
    if (sign == 0) {
      consider(d.u_bar(k));
    } else if (prev_sign == -1 && sign == 1) {
      consider(0.5 * (d.u_bar(prev_k) + d.u_bar(k)));
    }
    if (sign != 0) {
      prev_sign = sign;
      prev_k = k;
    }
  }
  return best;
}

/// Closed-form Gaussian threshold weighted by the inverse widths.
inline double gaussian_threshold(const BinaryStats &st) {
  if (st.sigma_plus <= 0.0 || st.sigma_minus <= 0.0) return 0.5 * (st.mean_plus + st.mean_minus);
  return (st.mean_plus / st.sigma_plus + st.mean_minus / st.sigma_minus) /
         (1.0 / st.sigma_plus + 1.0 / st.sigma_minus);
}

/// ceil(2 / D^2); one shot suffices for a projective measurement.
inline std::int64_t critical_n(double strength_D) {
  if (std::isinf(strength_D) && strength_D > 0.0) return 1;
  if (!(strength_D > 0.0)) throw std::invalid_argument("critical_n: no information per shot (D = 0)");
  const double nc = std::ceil(2.0 / (strength_D * strength_D));
  if (nc > 9.0e18) throw std::overflow_error("critical_n: N_c out of range");
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(nc));
}

/// 1/2 + erf(DN / sqrt 2)/2.
inline double erf_fidelity(double strength_DN) {
  if (std::isinf(strength_DN)) return 1.0;
  return 0.5 + 0.5 * std::erf(strength_DN / std::sqrt(2.0));
}

/// Tail sums around the threshold. Mass exactly at the threshold counts half
/// to each side. Assumes mean_plus > mean_minus (F_plus is the upper tail).
inline FidelityReport readout_fidelity(const MeasurementSetting &s, const OutcomeDistribution &d, double threshold) {
  const BinaryStats st = binary_stats(s);
  const bool plus_upper = st.mean_plus >= st.mean_minus;
  const double tie = 1e-12;
  FidelityReport r;
  r.u_threshold = threshold;
  double upper_plus = 0.0, lower_minus = 0.0;
  for (int k = 0; k <= d.n; ++k) {
    const double u = d.u_bar(k);
    const double w_up = u > threshold + tie ? 1.0 : (u < threshold - tie ? 0.0 : 0.5);
    upper_plus += w_up * d.probs_plus[k];
    lower_minus += (1.0 - w_up) * d.probs_minus[k];
  }
  if (plus_upper) {
    r.F_plus = upper_plus;
    r.F_minus = lower_minus;
  } else {
    r.F_plus = 1.0 - upper_plus;
    r.F_minus = 1.0 - lower_minus;
  }
  r.F_bar = 0.5 * (r.F_plus + r.F_minus);
  r.strength_DN = st.projective ? std::numeric_limits<double>::infinity() : std::sqrt(static_cast<double>(d.n)) * st.strength_D;
  r.F_erf = erf_fidelity(r.strength_DN);
  r.N_c = critical_n(st.strength_D);
  return r;
}

/// Exact distributions, optimal threshold, fidelity.
inline FidelityReport cascaded_fidelity(const MeasurementSetting &s, int n) {
  const OutcomeDistribution d = exact_distribution(s, n);
  return readout_fidelity(s, d, optimal_threshold(d));
}

}  // namespace qnd
