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

#include <catch_amalgamated.hpp>

#include <iostream>

#include "qndspin/nv_scan.hpp"

using namespace qnd;
using Catch::Approx;

namespace {

ScanConfig small_config(const char *preset) {
  ScanConfig cfg;
  cfg.params = nv_preset(preset);
  cfg.n_tdd = 3;
  cfg.n_tr = 48;
  cfg.tdd_half_width = 0.1;
  cfg.n_max = 200000;
  return cfg;
}

}  // namespace

TEST_CASE("NV parameter sets", "[nv_scan]") {
  SECTION("Larmor periods") {
    struct Row {
      const char *name;
      double t_r_ns, t_ns;
    };
    for (const Row &r : {Row{"P1", 1351, 1088}, Row{"P2", 3061, 1936}, Row{"P3", 3061, 1936}}) {
      const LarmorPeriods p = larmor_periods(nv_preset(r.name));
      INFO(r.name << ": T_R = " << units::s_to_ns(p.T_R) << " ns, T = " << units::s_to_ns(p.T) << " ns");
      REQUIRE(std::abs(units::s_to_ns(p.T_R) - r.t_r_ns) <= 1.0);
      REQUIRE(std::abs(units::s_to_ns(p.T) - r.t_ns) <= 1.0);
    }
  }
  SECTION("no hyperfine coupling gives equal periods") {
    NvParams p = nv_preset("P1");
    p.A_mhz = Vec3::Zero();
    const LarmorPeriods per = larmor_periods(p);
    REQUIRE(per.T == Approx(per.T_R).epsilon(1e-15));
  }
  SECTION("sign convention") {
    const NvParams p = nv_preset("P2");
    const SpinSystem sys = nv_system(p);
    const Vec3 a = p.A_mhz * units::kRadPerSecPerMHz;
    REQUIRE((sys.field(+1) - nv_omega_n(p) * Vec3::UnitZ()).norm() < 1e-9);
    REQUIRE((sys.omega() - (nv_omega_n(p) * Vec3::UnitZ() - 0.5 * a)).norm() < 1e-9);
    REQUIRE((sys.hyperfine() - a).norm() < 1e-9);
    REQUIRE(nv_omega_n(p) < 0.0);
  }
  SECTION("presets and validation") {
    REQUIRE(nv_preset("P3").n_dd == 8);
    REQUIRE_THROWS_AS(nv_preset("P4"), std::invalid_argument);
    NvParams p;
    REQUIRE_THROWS_AS(nv_system(p), std::invalid_argument);
  }
}

TEST_CASE("room-temperature readout", "[nv_scan]") {
  SECTION("typical photon numbers") {
    const ReadoutModel r = room_temp_readout(0.1, 0.07);
    REQUIRE(r.p_plus == 0.1);
    REQUIRE(r.p_minus == Approx(0.93));
    REQUIRE(mean_photon_number(0.1, 0.07) == Approx(0.085));
    REQUIRE(contrast(0.1, 0.07) == Approx(0.176).margin(1e-3));
    REQUIRE(r.p_bar() == Approx(0.03));
    REQUIRE(r.delta_p() == Approx(2 * 0.085 - 1));
    REQUIRE(r.p_bar() == Approx(2 * 0.085 * contrast(0.1, 0.07)));
    REQUIRE(readout_figure(r) == Approx(std::sqrt(0.085) * contrast(0.1, 0.07)).epsilon(1e-12));
  }
  SECTION("dark state gives full contrast") { REQUIRE(contrast(0.2, 0.0) == 1.0); }
  SECTION("out of range") {
    REQUIRE_THROWS_AS(room_temp_readout(1.2, 0.1), std::invalid_argument);
    REQUIRE_THROWS_AS(contrast(0.0, 0.0), std::invalid_argument);
  }
  SECTION("low-temperature readout and the enhancement ratio") {
    MeasurementSetting s;
    s.alpha_vec = Vec3(0.3, 0, 0);
    s.phi = kPi / 2;
    s.readout = {0.89, 0.99};
    const double low_t = binary_stats(s).strength_D;
    REQUIRE(low_t / std::sin(0.3) == Approx(0.9).epsilon(0.15));
    s.readout = room_temp_readout(0.1, 0.07);
    const double room = binary_stats(s).strength_D;
    std::cout << "low-temperature / room-temperature strength ratio at alpha = 0.3: " << low_t / room << "\n";
    REQUIRE(low_t > room);
  }
}

TEST_CASE("scan structure", "[nv_scan]") {
  const ScanConfig cfg = small_config("P2");
  const ScanResult scan = scan_2d(cfg);
  const SpinSystem sys = nv_system(cfg.params);

  SECTION("grids and ordering") {
    REQUIRE(scan.t_dd_grid.size() == 3);
    REQUIRE(scan.t_r_grid.size() == 48);
    REQUIRE(scan.t_dd_grid[1] == Approx(cfg.params.n_dd * scan.periods.T));
    REQUIRE(scan.t_r_grid.front() == Approx(-0.5 * scan.periods.T_R));
    REQUIRE(scan.t_r_grid.back() < 0.5 * scan.periods.T_R);
    REQUIRE(scan.rows.size() == 3 * 48);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 48; ++j) {
        REQUIRE(scan.at(i, j).t_dd == scan.t_dd_grid[i]);
        REQUIRE(scan.at(i, j).t_r == scan.t_r_grid[j]);
        REQUIRE(scan.at(i, j).N_c >= 1.0);
        REQUIRE(scan.at(i, j).N_L >= 0.0);
      }
  }
  SECTION("deterministic and independent of the thread count") {
    ScanConfig one = cfg;
    one.threads = 1;
    ScanConfig many = cfg;
    many.threads = 7;
    const ScanResult a = scan_2d(one), b = scan_2d(many);
    for (std::size_t k = 0; k < a.rows.size(); ++k) {
      REQUIRE(a.rows[k].alpha == b.rows[k].alpha);
      REQUIRE(a.rows[k].qnd_residual == b.rows[k].qnd_residual);
      REQUIRE(a.rows[k].N_L == b.rows[k].N_L);
    }
  }
  SECTION("QND roots never decay, distant waiting times decay before N_c") {
    for (const ScanColumn &c : scan.columns) {
      const Vec3 ah = measurement_axis(c.alpha);
      const auto minima = solve_waiting_time(sys, c.phi_dd, ah, -0.5 * scan.periods.T_R, 0.5 * scan.periods.T_R);
      const WaitingTimeMinimum root = best_waiting_time(minima);
      REQUIRE(root.residual < 1e-9);
      const CycleMap at_root = cycle_map(sys, c, root.t_R);
      REQUIRE(at_root.residual < 1e-8);
      REQUIRE(std::isinf(lifetime_of_map(at_root.map, ah, cfg.n_max)));
      // A quarter period away the residual is large.
      double far = root.t_R + 0.25 * scan.periods.T_R;
      const CycleMap off = cycle_map(sys, c, far);
      REQUIRE(lifetime_of_map(off.map, ah, cfg.n_max) < c.N_c);
    }
  }
  SECTION("tolerance profile") {
    const auto prof = tolerance_profile(scan);
    REQUIRE(prof.size() == 3);
    for (const ToleranceRow &r : prof) {
      INFO("t_DD = " << units::s_to_ns(r.t_dd) << " ns, measured " << units::s_to_ns(r.dtR_measured)
                     << " ns, worst case " << units::s_to_ns(r.dtR_worst_case) << " ns");
      REQUIRE(r.dtR_measured > 1e-10);
      REQUIRE(r.dtR_measured < 100e-9);
      REQUIRE(r.dtR_worst_case <= r.dtR_measured);
    }
  }
  SECTION("worst-case width vanishes without entanglement") {
    REQUIRE(worst_case_waiting_tolerance(3e-6, cfg.readout, 0.0) == 0.0);
  }
}
