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
#include <stdexcept>
#include <string>
#include <vector>

#include "qndspin/cascade.hpp"
#include "qndspin/hyperfine_system.hpp"
#include "qndspin/parallel.hpp"
#include "qndspin/qnd_control.hpp"
#include "qndspin/spin_algebra.hpp"
#include "qndspin/stability.hpp"
#include "qndspin/units.hpp"
#include "qndspin/weak_measurement.hpp"

namespace qnd {

/// NV center with a single 13C nucleus. |+z> = m_S = 0, |-z> = m_S = -1.
struct NvParams {
  double B_tesla = 0.0;
  double gamma_n_mhz_per_t = -10.71;
  Vec3 A_mhz = Vec3(0.316 / std::sqrt(2.0), 0.316 / std::sqrt(2.0), 0.330);
  int n_dd = 6;

  void validate() const {
    if (!(B_tesla > 0.0)) throw std::invalid_argument("NvParams: B must be positive");
    if (n_dd < 1) throw std::invalid_argument("NvParams: N_DD must be >= 1");
  }
};

/// Presets "P1", "P2", "P3".
inline NvParams nv_preset(const std::string &name) {
  NvParams p;
  if (name == "P1") {
    p.n_dd = 6;
    p.B_tesla = units::gauss_to_tesla(691.0);
  } else if (name == "P2") {
    p.n_dd = 6;
    p.B_tesla = units::gauss_to_tesla(305.0);
  } else if (name == "P3") {
    p.n_dd = 8;
    p.B_tesla = units::gauss_to_tesla(305.0);
  } else {
    throw std::invalid_argument("unknown NV preset '" + name + "' (expected P1, P2 or P3)");
  }
  return p;
}

/// Bare 13C Larmor frequency gamma_n B in rad/s (signed).
inline double nv_omega_n(const NvParams &p) { return units::mhz_to_rad_per_s(p.gamma_n_mhz_per_t * p.B_tesla); }

/// omega = omega_n e_z - A/2; the nucleus sees omega_n e_z in m_S = 0 and
/// omega_n e_z - A in m_S = -1.
inline SpinSystem nv_system(const NvParams &p) {
  p.validate();
  const double wn = nv_omega_n(p);
  const Vec3 a = p.A_mhz * units::kRadPerSecPerMHz;
  return {wn, Vec3::Zero(), -a};
}

struct LarmorPeriods {
  double T_R = 0.0;  // 2 pi / |omega_n|, waiting time
  double T = 0.0;    // 2 pi / |omega|, during DD
};

inline LarmorPeriods larmor_periods(const NvParams &p) {
  const SpinSystem sys = nv_system(p);
  return {kTwoPi / std::abs(nv_omega_n(p)), kTwoPi / sys.omega().norm()};
}

/// Photon-counting readout: nonzero counts read as u = +.
inline ReadoutModel room_temp_readout(double n_plus, double n_minus) {
  if (!(n_plus >= 0.0 && n_plus <= 1.0 && n_minus >= 0.0 && n_minus <= 1.0))
    throw std::invalid_argument("room_temp_readout: photon numbers must lie in [0, 1]");
  ReadoutModel r{n_plus, 1.0 - n_minus};
  r.validate();
  return r;
}

inline double mean_photon_number(double n_plus, double n_minus) { return 0.5 * (n_plus + n_minus); }

inline double contrast(double n_plus, double n_minus) {
  if (!(n_plus + n_minus > 0.0)) throw std::invalid_argument("contrast: no photons");
  return (n_plus - n_minus) / (n_plus + n_minus);
}

/// sqrt(n_bar) C for a readout in photon-counting form, with n_bar = (1 + dp)/2
/// and C = p_bar / (2 n_bar).
inline double readout_figure(const ReadoutModel &r) {
  const double nbar = 0.5 * (1.0 + r.delta_p());
  if (!(nbar > 0.0)) return 0.0;
  return r.p_bar() / (2.0 * std::sqrt(nbar));
}

struct ScanConfig {
  NvParams params;
  ReadoutModel readout = room_temp_readout(0.1, 0.07);
  int n_tdd = 256;
  int n_tr = 256;
  double tdd_half_width = 0.5;  // in units of T, around N_DD T
  double phi = kPi / 2.0;
  std::int64_t n_max = 1000000;
  unsigned threads = 0;

  void validate() const {
    params.validate();
    readout.validate();
    if (n_tdd < 1 || n_tr < 2) throw std::invalid_argument("ScanConfig: grids must be non-empty");
    if (!(tdd_half_width >= 0.0)) throw std::invalid_argument("ScanConfig: t_DD half width must be nonnegative");
    if (n_max < 1) throw std::invalid_argument("ScanConfig: N_max must be >= 1");
  }
};

struct ScanRow {
  double t_dd = 0.0;  // s
  double t_r = 0.0;   // s
  double alpha = 0.0;
  double qnd_residual = 0.0;
  double D = 0.0;
  double N_c = 0.0;  // +inf when D = 0
  double N_L = 0.0;  // +inf when no 1/e crossing within N_max
};

/// Quantities that depend on t_DD only.
struct ScanColumn {
  double t_dd = 0.0;
  RotVec3 alpha = RotVec3::Zero();
  RotVec3 phi_dd = RotVec3::Zero();
  double D = 0.0;
  double N_c = 0.0;
};

struct ScanResult {
  ScanConfig config;
  LarmorPeriods periods;
  std::vector<double> t_dd_grid;
  std::vector<double> t_r_grid;  // half-open period [-T_R/2, T_R/2)
  std::vector<ScanColumn> columns;
  std::vector<ScanRow> rows;  // t_DD-major, t_R-minor

  const ScanRow &at(std::size_t i_dd, std::size_t i_r) const { return rows.at(i_dd * t_r_grid.size() + i_r); }
};

inline ScanColumn scan_column(const SpinSystem &sys, const ScanConfig &cfg, double t_dd) {
  ScanColumn c;
  c.t_dd = t_dd;
  const AlphaPhi ap = extract_alpha_phi(exact_dd_evolution(sys, cpmg(cfg.params.n_dd, t_dd / cfg.params.n_dd)));
  c.alpha = ap.alpha;
  c.phi_dd = ap.phi_dd;
  const BinaryStats st = binary_stats({c.alpha, cfg.phi, cfg.readout});
  c.D = st.strength_D;
  if (st.projective) {
    c.N_c = 1.0;
  } else if (c.D > 0.0) {
    c.N_c = std::max(1.0, std::ceil(2.0 / (c.D * c.D)));
  } else {
    c.N_c = std::numeric_limits<double>::infinity();
  }
  return c;
}

/// Cycle map R(phi) M with phi_R = omega_n t_R e_z, and the QND residual.
struct CycleMap {
  Mat3 map;
  double residual = 0.0;
};

inline CycleMap cycle_map(const SpinSystem &sys, const ScanColumn &c, double t_r) {
  const Vec3 ah = measurement_axis(c.alpha);
  const Rotor total = total_cycle_rotation(sys.field(+1) * t_r, c.phi_dd);
  return {so3_from_rotor(total).matrix() * dephasing_map(c.alpha).matrix, qnd_residual(total, ah).angle_defect};
}

inline ScanResult scan_2d(const ScanConfig &cfg) {
  cfg.validate();
  ScanResult out;
  out.config = cfg;
  out.periods = larmor_periods(cfg.params);
  const SpinSystem sys = nv_system(cfg.params);
  const double center = cfg.params.n_dd * out.periods.T;
  const double hw = cfg.tdd_half_width * out.periods.T;
  for (int i = 0; i < cfg.n_tdd; ++i) {
    const double f = cfg.n_tdd == 1 ? 0.5 : static_cast<double>(i) / (cfg.n_tdd - 1);
    out.t_dd_grid.push_back(center - hw + 2.0 * hw * f);
  }
  for (int j = 0; j < cfg.n_tr; ++j) out.t_r_grid.push_back(out.periods.T_R * (static_cast<double>(j) / cfg.n_tr - 0.5));

  out.columns.resize(out.t_dd_grid.size());
  parallel_for(
      out.columns.size(), [&](std::size_t i) { out.columns[i] = scan_column(sys, cfg, out.t_dd_grid[i]); },
      cfg.threads);

  const std::size_t nr = out.t_r_grid.size();
  out.rows.resize(out.columns.size() * nr);
  parallel_for(
      out.rows.size(),
      [&](std::size_t k) {
        const ScanColumn &c = out.columns[k / nr];
        const double t_r = out.t_r_grid[k % nr];
        const CycleMap cm = cycle_map(sys, c, t_r);
        ScanRow &r = out.rows[k];
        r.t_dd = c.t_dd;
        r.t_r = t_r;
        r.alpha = c.alpha.norm();
        r.qnd_residual = cm.residual;
        r.D = c.D;
        r.N_c = c.N_c;
        r.N_L = lifetime_of_map(cm.map, measurement_axis(c.alpha), cfg.n_max);
      },
      cfg.threads);
  return out;
}

struct ToleranceRow {
  double t_dd = 0.0;
  double dtR_measured = 0.0;
  double dtR_worst_case = 0.0;
  double N_c = 0.0;
};

/// (T_R / pi) sqrt(n_bar) C sin^2(alpha/2).
inline double worst_case_waiting_tolerance(double T_R, const ReadoutModel &r, double alpha) {
  const double s = std::sin(0.5 * alpha);
  return T_R / kPi * readout_figure(r) * s * s;
}

namespace detail {

// N_L >= N_c at t_r, with the same N_max cap as the grid.
inline bool high_fidelity(const SpinSystem &sys, const ScanColumn &c, double t_r, std::int64_t n_max) {
  if (std::isinf(c.N_c)) return false;
  const CycleMap cm = cycle_map(sys, c, t_r);
  const auto limit = static_cast<std::int64_t>(std::min<double>(c.N_c, static_cast<double>(n_max)));
  return std::isinf(lifetime_of_map(cm.map, measurement_axis(c.alpha), limit));
}

// Boundary between a good point and a bad point.
inline double bisect_edge(const SpinSystem &sys, const ScanColumn &c, double good, double bad, std::int64_t n_max) {
  for (int it = 0; it < 40 && std::abs(bad - good) > 1e-15; ++it) {
    const double mid = 0.5 * (good + bad);
    (high_fidelity(sys, c, mid, n_max) ? good : bad) = mid;
  }
  return 0.5 * (good + bad);
}

}  // namespace detail

/// Per t_DD: measure of {t_R : N_L >= N_c} over one waiting-time period and the
/// worst-case estimate. Regions come from high-fidelity grid points and from
/// exact QND roots; every edge is refined by bisection against the nearest
/// low-fidelity grid point.
inline std::vector<ToleranceRow> tolerance_profile(const ScanResult &scan) {
  const ScanConfig &cfg = scan.config;
  const SpinSystem sys = nv_system(cfg.params);
  const std::size_t nr = scan.t_r_grid.size();
  const double period = scan.periods.T_R;
  const double h = period / static_cast<double>(nr);
  std::vector<ToleranceRow> out(scan.columns.size());

  parallel_for(
      scan.columns.size(),
      [&](std::size_t i) {
        const ScanColumn &c = scan.columns[i];
        ToleranceRow &row = out[i];
        row.t_dd = c.t_dd;
        row.N_c = c.N_c;
        row.dtR_worst_case = worst_case_waiting_tolerance(period, cfg.readout, c.alpha.norm());
        if (std::isinf(c.N_c)) return;

        std::vector<char> good(nr);
        for (std::size_t j = 0; j < nr; ++j) {
          const ScanRow &r = scan.at(i, j);
          good[j] = r.N_L >= r.N_c;
        }
        // Grid points at exact QND roots that fall between grid samples.
        std::vector<double> seeds;
        const Vec3 ah = measurement_axis(c.alpha);
        if (c.alpha.norm() > 0.0) {
          for (const auto &m : solve_waiting_time(sys, c.phi_dd, ah, -0.5 * period, 0.5 * period)) {
            if (m.residual < 1e-9 && detail::high_fidelity(sys, c, m.t_R, cfg.n_max)) seeds.push_back(m.t_R);
          }
        }

        const bool all_good = std::all_of(good.begin(), good.end(), [](char g) { return g != 0; });
        if (all_good) {
          row.dtR_measured = period;
          return;
        }
        double total = 0.0;
        // Cyclic runs of good grid points, starting just after a bad point.
        std::size_t start = 0;
        while (good[start]) ++start;
        std::vector<std::pair<double, double>> intervals;
        for (std::size_t step = 1; step <= nr; ++step) {
          const std::size_t j = (start + step) % nr;
          if (!good[j]) continue;
          std::size_t len = 0;
          while (good[(j + len) % nr]) ++len;
          const double first = scan.t_r_grid[j] + ((j < start) ? period : 0.0);
          const double last = first + static_cast<double>(len - 1) * h;
          const double lo = detail::bisect_edge(sys, c, first, first - h, cfg.n_max);
          const double hi = detail::bisect_edge(sys, c, last, last + h, cfg.n_max);
          intervals.emplace_back(lo, hi);
          total += hi - lo;
          step += len;
        }
        for (double s : seeds) {
          const bool covered = std::any_of(intervals.begin(), intervals.end(), [&](const auto &iv) {
            for (double shift : {-period, 0.0, period}) {
              if (s + shift >= iv.first && s + shift <= iv.second) return true;
            }
            return false;
          });
          if (covered) continue;
          // Neighboring grid points are low-fidelity (otherwise covered).
          const double below = scan.t_r_grid[0] + std::floor((s - scan.t_r_grid[0]) / h) * h;
          const double lo = detail::bisect_edge(sys, c, s, below, cfg.n_max);
          const double hi = detail::bisect_edge(sys, c, s, below + h, cfg.n_max);
          intervals.emplace_back(lo, hi);
          total += hi - lo;
        }
        row.dtR_measured = total;
      },
      cfg.threads);
  return out;
}

}  // namespace qnd
