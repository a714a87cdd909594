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

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "qndspin/stability.hpp"
#include "qndspin/weak_measurement.hpp"

using namespace qnd;
using Catch::Approx;

namespace {

Vec3 perpendicular_to(const Vec3 &n) {
  const Vec3 trial = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return n.cross(trial).normalized();
}

double curve_lifetime(const std::vector<double> &s) {
  for (std::size_t k = 0; k < s.size(); ++k)
    if (s[k] <= std::exp(-1.0)) return static_cast<double>(k);
  return kInfiniteLifetime;
}

}  // namespace

TEST_CASE("dephasing_map", "[stability]") {
  std::mt19937_64 g(91);
  SECTION("no rotation is the identity") { REQUIRE((dephasing_map(Vec3::Zero()).matrix - Mat3::Identity()).norm() == 0.0); }
  SECTION("quarter turn keeps only the axis") {
    Mat3 expected = Mat3::Zero();
    expected(2, 2) = 1.0;
    REQUIRE((dephasing_map(Vec3(0, 0, kPi / 2)).matrix - expected).cwiseAbs().maxCoeff() < 1e-15);
  }
  SECTION("eigenvalues 1, cos a, cos a with the axis preserved") {
    for (int i = 0; i < 300; ++i) {
      const Vec3 a = oracle::random_vector(g, 3.0);
      const DephasingMap m = dephasing_map(a);
      REQUIRE((m.apply(a.normalized()) - a.normalized()).norm() < 1e-12);
      Eigen::SelfAdjointEigenSolver<Mat3> es(m.matrix);
      std::vector<double> ev{es.eigenvalues()(0), es.eigenvalues()(1), es.eigenvalues()(2)};
      std::vector<double> ref{1.0, std::cos(a.norm()), std::cos(a.norm())};
      std::sort(ev.begin(), ev.end());
      std::sort(ref.begin(), ref.end());
      for (int k = 0; k < 3; ++k) REQUIRE(ev[k] == Approx(ref[k]).margin(1e-12));
    }
  }
  SECTION("matches the outcome average of the Kraus update") {
    for (int i = 0; i < 100; ++i) {
      MeasurementSetting s;
      s.alpha_vec = oracle::random_vector(g, 3.0);
      s.phi = 0.7;
      const Vec3 n = oracle::random_unit(g) * 0.8;
      const Mat2c rho = oracle::density_of(n);
      const auto [mp, mm] = kraus_pair(s);
      const Mat2c avg = mp * rho * mp.adjoint() + mm * rho * mm.adjoint();
      REQUIRE((oracle::bloch_of(avg) - dephasing_map(s.alpha_vec).apply(n)).norm() < 1e-12);
    }
  }
}

TEST_CASE("survival_curve special cases", "[stability]") {
  std::mt19937_64 g(93);
  SECTION("exact QND never decays") {
    const SurvivalCurve c = survival_curve(Vec3(0.3, 0.1, 0.2), RotationErrorModel::systematic(Vec3::Zero()), 500);
    REQUIRE(c.values.size() == 501);
    for (double s : c.values) REQUIRE(s == Approx(1.0).epsilon(1e-12));
    REQUIRE(std::isinf(lifetime(c)));
  }
  SECTION("errors along the axis are harmless") {
    const Vec3 a(0.2, -0.4, 0.5);
    const SurvivalCurve c = survival_curve(a, RotationErrorModel::systematic(0.3 * a.normalized()), 200);
    for (double s : c.values) REQUIRE(s == Approx(1.0).epsilon(1e-12));
  }
  SECTION("cos a = 0 with perpendicular errors gives a product of cosines") {
    for (int trial = 0; trial < 20; ++trial) {
      const Vec3 ah = oracle::random_unit(g);
      std::uniform_real_distribution<double> d(-0.5, 0.5), ang(0.0, kTwoPi);
      std::vector<RotVec3> errs;
      std::vector<double> mags;
      for (int i = 0; i < 60; ++i) {
        // Random direction in the plane perpendicular to the axis.
        const Vec3 e = rotation_matrix(ang(g) * ah).apply(perpendicular_to(ah));
        mags.push_back(d(g));
        errs.push_back(mags.back() * e);
      }
      const SurvivalCurve c = survival_curve(ah * kPi / 2, RotationErrorModel::explicit_errors(errs), 60);
      for (std::size_t n = 0; n <= 60; ++n) REQUIRE(c.values[n] == Approx(survival_perpendicular_product(mags, n)).margin(1e-12));
    }
  }
  SECTION("cos a = -1 with errors along one perpendicular axis echoes") {
    std::uniform_real_distribution<double> d(-0.4, 0.4);
    const Vec3 ah = Vec3::UnitX();
    std::vector<RotVec3> errs;
    std::vector<double> mags;
    for (int i = 0; i < 80; ++i) {
      mags.push_back(d(g));
      errs.push_back(mags.back() * Vec3::UnitZ());
    }
    const SurvivalCurve c = survival_curve(ah * kPi, RotationErrorModel::explicit_errors(errs), 80);
    for (std::size_t n = 0; n <= 80; ++n) REQUIRE(c.values[n] == Approx(survival_echo(mags, n)).margin(1e-12));
  }
  SECTION("explicit lists are reused cyclically") {
    const std::vector<RotVec3> errs{Vec3(0, 0.1, 0), Vec3(0, 0, -0.05)};
    const SurvivalCurve a = survival_curve(Vec3(0.4, 0, 0), RotationErrorModel::explicit_errors(errs), 10);
    std::vector<RotVec3> repeated;
    for (int i = 0; i < 10; ++i) repeated.push_back(errs[i % 2]);
    const SurvivalCurve b = survival_curve(Vec3(0.4, 0, 0), RotationErrorModel::explicit_errors(repeated), 10);
    for (int n = 0; n <= 10; ++n) REQUIRE(a.values[n] == b.values[n]);
  }
  SECTION("full per-cycle rotations reduce to the error form") {
    for (int trial = 0; trial < 50; ++trial) {
      const Vec3 a = oracle::random_vector(g, 3.0);
      std::vector<RotVec3> errs;
      std::vector<Mat3> rots;
      for (int i = 0; i < 30; ++i) {
        errs.push_back(oracle::random_vector(g, 0.3));
        rots.push_back(rotation_matrix(errs.back()).matrix());
      }
      const SurvivalCurve x = survival_curve(a, RotationErrorModel::explicit_errors(errs), 30);
      const SurvivalCurve y = survival_curve(a, RotationErrorModel::full_rotations(rots), 30);
      for (int n = 0; n <= 30; ++n) REQUIRE(x.values[n] == Approx(y.values[n]).margin(1e-13));
    }
  }
  SECTION("bounded and starting at one") {
    for (int trial = 0; trial < 50; ++trial) {
      const SurvivalCurve c = survival_curve(oracle::random_vector(g, 3.0),
                                             RotationErrorModel::random_isotropic(0.3, 1000 + trial), 200);
      REQUIRE(c.values.front() == 1.0);
      for (double s : c.values) REQUIRE(std::abs(s) <= 1.0 + 1e-12);
    }
  }
  SECTION("random errors are reproducible from the seed") {
    const auto m = RotationErrorModel::random_fixed_axis(Vec3::UnitZ(), 0.1, 42);
    REQUIRE(survival_curve(Vec3(0.5, 0, 0), m, 300).values == survival_curve(Vec3(0.5, 0, 0), m, 300).values);
  }
  SECTION("invalid models") {
    RotationErrorModel m;
    m.kind = RotationErrorModel::Kind::random;
    m.std_dev = 0.1;
    REQUIRE_THROWS_AS(survival_curve(Vec3::UnitX(), m, 10), std::invalid_argument);
    REQUIRE_THROWS_AS(survival_curve(Vec3::UnitX(), RotationErrorModel::explicit_errors({}), 10), std::invalid_argument);
    REQUIRE_THROWS_AS(survival_curve(Vec3::UnitX(), RotationErrorModel::random_fixed_axis(Vec3::UnitZ(), -1.0, 1), 10),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(survival_curve(Vec3::UnitX(), RotationErrorModel::systematic(Vec3::Zero()), 0), std::invalid_argument);
  }
}

TEST_CASE("echo identity", "[stability]") {
  const Mat3 m = dephasing_map(Vec3(kPi, 0, 0)).matrix;
  for (double d : {1e-3, 0.1, 0.7, 2.5}) {
    const Mat3 lhs = m * rotation_matrix(Vec3(0, 0, d)).matrix() * m;
    REQUIRE((lhs - rotation_matrix(Vec3(0, 0, -d)).matrix()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("survival laws", "[stability]") {
  SECTION("systematic perpendicular error") {
    for (double alpha : {0.5, 1.0, 2.0}) {
      const double t2 = std::pow(std::tan(alpha / 2), 2);
      const double dphi = std::min(0.1 * t2, 0.1);
      const Vec3 ah = Vec3(1, 1, 0).normalized();
      const std::int64_t n_max = static_cast<std::int64_t>(6.0 * t2 / (dphi * dphi));
      const SurvivalCurve c = survival_curve(alpha * ah, RotationErrorModel::systematic(dphi * Vec3::UnitZ()), n_max);
      double worst = 0.0;
      for (std::int64_t n = 0; n <= n_max; ++n)
        worst = std::max(worst, std::abs(c.values[n] - analytic_survival(ErrorKind::systematic, alpha, dphi, n)));
      INFO("alpha " << alpha << " worst " << worst);
      REQUIRE(worst < 0.05);
      REQUIRE(lifetime(c) == Approx(2 * t2 / (dphi * dphi)).epsilon(0.2));
    }
  }
  SECTION("near-echo regime") {
    const double alpha = kPi - 0.1;
    const Vec3 ah = Vec3(1, 1, 0).normalized();
    const double dphi = 0.1;
    const std::int64_t n_max = 200000;
    const SurvivalCurve c = survival_curve(alpha * ah, RotationErrorModel::systematic(dphi * Vec3::UnitZ()), n_max);
    double worst = 0.0;
    for (std::int64_t n = 0; n <= n_max; n += 7)
      worst = std::max(worst, std::abs(c.values[n] - analytic_survival(ErrorKind::systematic, alpha, dphi, n)));
    REQUIRE(worst < 0.05);
  }
  SECTION("random errors, ensemble mean") {
    const double dphi = 0.05;
    const Vec3 a = 0.8 * Vec3::UnitX();
    const auto model = RotationErrorModel::random_fixed_axis(Vec3::UnitZ(), dphi, 0);
    const EnsembleSurvival e = ensemble_survival(a, model, 2000, 7, 1500);
    int outside = 0;
    for (std::size_t n = 0; n < e.mean.size(); ++n) {
      const double expected = analytic_survival(ErrorKind::random, 0.8, dphi, static_cast<std::int64_t>(n));
      if (std::abs(e.mean[n] - expected) > 3.0 * e.std_error[n] + 1e-12) ++outside;
    }
    // Pointwise 3-sigma bands on a correlated curve: allow a few excursions.
    REQUIRE(outside < 0.05 * e.mean.size());
    REQUIRE(curve_lifetime(e.mean) == Approx(2.0 / (dphi * dphi)).epsilon(0.05));
  }
  SECTION("ensemble is independent of the thread count") {
    const auto model = RotationErrorModel::random_isotropic(0.05, 0);
    const EnsembleSurvival a = ensemble_survival(Vec3(0.5, 0, 0), model, 64, 11, 100, 1);
    const EnsembleSurvival b = ensemble_survival(Vec3(0.5, 0, 0), model, 64, 11, 100, 4);
    REQUIRE(a.mean == b.mean);
  }
  SECTION("N = 0 is one for every kind") {
    REQUIRE(analytic_survival(ErrorKind::systematic, 0.3, 0.2, 0) == 1.0);
    REQUIRE(analytic_survival(ErrorKind::random, 0.3, 0.2, 0) == 1.0);
  }
}

TEST_CASE("worst-case error direction", "[stability]") {
  std::mt19937_64 g(97);
  SECTION("perpendicular is the fastest systematic decay") {
    for (int trial = 0; trial < 20; ++trial) {
      const Vec3 ah = oracle::random_unit(g);
      const double alpha = 0.3 + 2.5 * trial / 20.0, dphi = 0.05;
      const double perp = lifetime_of_map(rotation_matrix(dphi * perpendicular_to(ah)).matrix() * dephasing_map(alpha * ah).matrix,
                                          ah, 1000000);
      for (int k = 0; k < 10; ++k) {
        const Vec3 dir = oracle::random_unit(g);
        const double other = lifetime_of_map(rotation_matrix(dphi * dir).matrix() * dephasing_map(alpha * ah).matrix, ah, 1000000);
        REQUIRE(perp <= other * (1.0 + 1e-9));
      }
    }
  }
  SECTION("systematic perpendicular error decays faster than random errors up to a quarter turn") {
    for (double alpha : {0.3, 0.8, 1.5}) {
      const double dphi = 0.05;
      const Vec3 ah = Vec3::UnitX();
      const double sys = lifetime(survival_curve(alpha * ah, RotationErrorModel::systematic(dphi * Vec3::UnitZ()), 5000));
      const auto fixed = RotationErrorModel::random_fixed_axis(Vec3::UnitY(), dphi, 0);
      // Same rms error magnitude as the fixed-axis model.
      const auto iso = RotationErrorModel::random_isotropic(dphi / std::sqrt(3.0), 0);
      const double r1 = curve_lifetime(ensemble_survival(alpha * ah, fixed, 400, 3, 5000).mean);
      const double r2 = curve_lifetime(ensemble_survival(alpha * ah, iso, 400, 5, 5000).mean);
      REQUIRE(sys <= r1);
      REQUIRE(sys <= r2);
    }
  }
}

TEST_CASE("tolerances", "[stability]") {
  SECTION("formula") {
    REQUIRE(tolerance(0.1, 0.1, ErrorKind::systematic) == Approx(5.0e-3).epsilon(0.01));
    REQUIRE(tolerance(0.1, 0.1, ErrorKind::random) == 0.1);
    REQUIRE_THROWS_AS(tolerance(0.0, 0.1, ErrorKind::random), std::invalid_argument);
  }
  SECTION("constant 2 p_bar near a half turn with poor readout") {
    MeasurementSetting s;
    s.alpha_vec = Vec3(kPi - 1e-3, 0, 0);
    s.phi = kPi / 2;
    s.readout = {0.51, 0.51};
    const double dphi = tolerance(binary_stats(s).strength_D, s.alpha(), ErrorKind::systematic);
    REQUIRE(dphi == Approx(2.0 * s.readout.p_bar()).epsilon(0.01));
  }
  SECTION("quadratic versus linear growth for small alpha") {
    auto tol = [](double a, ErrorKind k) {
      MeasurementSetting s;
      s.alpha_vec = Vec3(a, 0, 0);
      s.phi = kPi / 2;
      return tolerance(binary_stats(s).strength_D, a, k);
    };
    REQUIRE(tol(0.02, ErrorKind::systematic) / tol(0.01, ErrorKind::systematic) == Approx(4.0).epsilon(1e-3));
    REQUIRE(tol(0.02, ErrorKind::random) / tol(0.01, ErrorKind::random) == Approx(2.0).epsilon(1e-3));
    REQUIRE(tol(0.01, ErrorKind::systematic) == Approx(0.5 * 0.01 * 0.01).epsilon(1e-3));
  }
  SECTION("waiting-time tolerance") {
    const SpinSystem sys = SpinSystem::effective(Vec3(0, 0, 3.0), Vec3(0, 0, 2.0));
    REQUIRE(tolerance_time(0.04, sys) == Approx(0.01));
  }
}
