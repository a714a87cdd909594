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

#include "cli.hpp"

#include <CLI11.hpp>
#include <fmt/core.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "qndspin/cascade.hpp"
#include "qndspin/nv_scan.hpp"
#include "qndspin/qnd_control.hpp"
#include "qndspin/stability.hpp"
#include "qndspin/trajectory.hpp"

#ifndef QNDSPIN_VERSION
#define QNDSPIN_VERSION "0.0.0"
#endif

namespace qnd::cli {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Option specs: every input has one key, shared by the JSON config, the
// command-line flag (underscores become dashes) and the manifest.

enum class Kind { number, integer, text, vec3, integer_list, vec3_list };

struct OptionSpec {
  std::string key;
  Kind kind;
  json fallback;  // null means "not set"
  std::string help;
};

std::string flag_name(const std::string &key) {
  std::string f = key;
  std::replace(f.begin(), f.end(), '_', '-');
  return "--" + f;
}

double parse_double(const std::string &key, const std::string &s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception &) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, s));
  }
  if (used != s.size()) throw ConfigError(fmt::format("{}: '{}' is not a number", key, s));
  return v;
}

long long parse_integer(const std::string &key, const std::string &s) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception &) {
    throw ConfigError(fmt::format("{}: '{}' is not an integer", key, s));
  }
  if (used != s.size()) throw ConfigError(fmt::format("{}: '{}' is not an integer", key, s));
  return v;
}

std::vector<std::string> split(const std::string &s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

json parse_vec3(const std::string &key, const std::string &s) {
  const auto parts = split(s, ',');
  if (parts.size() != 3) throw ConfigError(fmt::format("{}: expected three comma-separated numbers", key));
  return json::array({parse_double(key, parts[0]), parse_double(key, parts[1]), parse_double(key, parts[2])});
}

// Flag text to a JSON value of the option's kind.
json from_flag(const OptionSpec &spec, const std::string &s) {
  switch (spec.kind) {
    case Kind::number:
      return parse_double(spec.key, s);
    case Kind::integer:
      return parse_integer(spec.key, s);
    case Kind::text:
      return s;
    case Kind::vec3:
      return parse_vec3(spec.key, s);
    case Kind::integer_list: {
      json out = json::array();
      for (const auto &p : split(s, ',')) out.push_back(parse_integer(spec.key, p));
      return out;
    }
    case Kind::vec3_list: {
      json out = json::array();
      for (const auto &p : split(s, ';')) out.push_back(parse_vec3(spec.key, p));
      return out;
    }
  }
  return nullptr;
}

const char *type_label(Kind k) {
  switch (k) {
    case Kind::number:
      return "NUM";
    case Kind::integer:
      return "INT";
    case Kind::text:
      return "TEXT";
    case Kind::vec3:
      return "X,Y,Z";
    case Kind::integer_list:
      return "INT,...";
    case Kind::vec3_list:
      return "X,Y,Z;...";
  }
  return "";
}

bool is_vec3(const json &v) {
  return v.is_array() && v.size() == 3 && std::all_of(v.begin(), v.end(), [](const json &x) { return x.is_number(); });
}

// Type check for values coming from a config file or a manifest.
void check_kind(const OptionSpec &spec, const json &v) {
  if (v.is_null()) return;
  bool ok = false;
  switch (spec.kind) {
    case Kind::number:
      ok = v.is_number();
      break;
    case Kind::integer:
      ok = v.is_number_integer();
      break;
    case Kind::text:
      ok = v.is_string();
      break;
    case Kind::vec3:
      ok = is_vec3(v);
      break;
    case Kind::integer_list:
      ok = v.is_array() && std::all_of(v.begin(), v.end(), [](const json &x) { return x.is_number_integer(); });
      break;
    case Kind::vec3_list:
      ok = v.is_array() && std::all_of(v.begin(), v.end(), is_vec3);
      break;
  }
  if (!ok) throw ConfigError(fmt::format("config key '{}' has the wrong type", spec.key));
}

// ---------------------------------------------------------------------------
// Typed access to resolved inputs.

bool has(const json &in, const std::string &key) { return in.contains(key) && !in.at(key).is_null(); }

double number(const json &in, const std::string &key) {
  if (!has(in, key)) throw ConfigError(fmt::format("'{}' is required", key));
  return in.at(key).get<double>();
}

long long integer(const json &in, const std::string &key) {
  if (!has(in, key)) throw ConfigError(fmt::format("'{}' is required", key));
  return in.at(key).get<long long>();
}

std::string text(const json &in, const std::string &key) {
  if (!has(in, key)) throw ConfigError(fmt::format("'{}' is required", key));
  return in.at(key).get<std::string>();
}

Vec3 to_vec3(const json &v) { return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()}; }

Vec3 vec3(const json &in, const std::string &key) {
  if (!has(in, key)) throw ConfigError(fmt::format("'{}' is required", key));
  return to_vec3(in.at(key));
}

long long positive(const json &in, const std::string &key) {
  const long long v = integer(in, key);
  if (v < 1) throw ConfigError(fmt::format("'{}' must be >= 1", key));
  return v;
}

std::uint64_t seed_of(const json &in) {
  const long long s = integer(in, "seed");
  if (s < 0) throw ConfigError("'seed' must be nonnegative");
  return static_cast<std::uint64_t>(s);
}

// ---------------------------------------------------------------------------
// CSV.

std::string num(double x) { return fmt::format("{}", x); }

class Csv {
 public:
  explicit Csv(const std::vector<std::string> &header) { row(header); }

  void row(const std::vector<std::string> &cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) buf_ += ',';
      buf_ += cells[i];
    }
    buf_ += '\n';
  }
  const std::string &str() const { return buf_; }

 private:
  std::string buf_;
};

// ---------------------------------------------------------------------------
// Shared input groups.

std::vector<OptionSpec> setting_specs(bool with_readout) {
  std::vector<OptionSpec> s{
      {"alpha", Kind::number, 0.1, "measurement rotation angle |alpha| in rad, within [0, pi]"},
      {"axis", Kind::vec3, json::array({1.0, 0.0, 0.0}), "measurement axis (normalized)"},
      {"phi", Kind::number, kPi / 2, "electron readout phase in rad"},
  };
  if (with_readout) {
    s.push_back({"p_plus", Kind::number, nullptr, "readout fidelity for |+> (with p_minus)"});
    s.push_back({"p_minus", Kind::number, nullptr, "readout fidelity for |-> (with p_plus)"});
    s.push_back({"n_plus", Kind::number, nullptr, "mean photon number for m_S = 0 (with n_minus)"});
    s.push_back({"n_minus", Kind::number, nullptr, "mean photon number for m_S = -1 (with n_plus)"});
    s.push_back({"n_bar", Kind::number, nullptr, "mean photon number (with contrast)"});
    s.push_back({"contrast", Kind::number, nullptr, "fluorescence contrast (with n_bar)"});
  }
  return s;
}

std::vector<OptionSpec> nv_specs(json default_preset) {
  return {
      {"preset", Kind::text, std::move(default_preset), "NV parameter set P1, P2 or P3"},
      {"B_gauss", Kind::number, nullptr, "magnetic field in gauss (overrides the preset)"},
      {"gamma_n", Kind::number, nullptr, "nuclear gyromagnetic ratio per tesla, in --units"},
      {"A", Kind::vec3, nullptr, "hyperfine vector in --units"},
      {"n_dd", Kind::integer, nullptr, "number of CPMG periods"},
      {"units", Kind::text, "MHz", "frequency units: MHz or rad/s"},
  };
}

ReadoutModel build_readout(const json &in, const ReadoutModel &fallback) {
  const bool p = has(in, "p_plus") || has(in, "p_minus");
  const bool photons = has(in, "n_plus") || has(in, "n_minus");
  const bool nbar = has(in, "n_bar") || has(in, "contrast");
  if (p + photons + nbar > 1) throw ConfigError("give the readout as one of p_plus/p_minus, n_plus/n_minus, n_bar/contrast");
  try {
    if (p) return ReadoutModel{number(in, "p_plus"), number(in, "p_minus")};
    if (photons) return room_temp_readout(number(in, "n_plus"), number(in, "n_minus"));
    if (nbar) {
      const double n = number(in, "n_bar"), c = number(in, "contrast");
      return room_temp_readout(n * (1.0 + c), n * (1.0 - c));
    }
  } catch (const std::invalid_argument &e) {
    throw ConfigError(e.what());
  }
  return fallback;
}

MeasurementSetting build_setting(const json &in, bool with_readout, const ReadoutModel &fallback = {}) {
  const double alpha = number(in, "alpha");
  if (!(alpha >= 0.0 && alpha <= kPi)) throw ConfigError("'alpha' must lie in [0, pi]");
  const Vec3 axis = vec3(in, "axis");
  if (!(axis.norm() > 0.0)) throw ConfigError("'axis' must be nonzero");
  MeasurementSetting s;
  s.alpha_vec = alpha * axis.normalized();
  s.phi = number(in, "phi");
  if (with_readout) s.readout = build_readout(in, fallback);
  try {
    s.readout.validate();
  } catch (const std::invalid_argument &e) {
    throw ConfigError(e.what());
  }
  return s;
}

double frequency_scale(const json &in) {
  const std::string u = text(in, "units");
  if (u == "MHz") return 1.0;
  if (u == "rad/s") return 1.0 / units::kRadPerSecPerMHz;
  throw ConfigError("'units' must be MHz or rad/s");
}

NvParams build_nv(const json &in) {
  NvParams p;
  if (has(in, "preset")) {
    try {
      p = nv_preset(text(in, "preset"));
    } catch (const std::invalid_argument &e) {
      throw ConfigError(e.what());
    }
  } else if (!has(in, "B_gauss")) {
    throw ConfigError("give a preset or B_gauss");
  }
  const double to_mhz = frequency_scale(in);
  if (has(in, "B_gauss")) p.B_tesla = units::gauss_to_tesla(number(in, "B_gauss"));
  if (has(in, "gamma_n")) p.gamma_n_mhz_per_t = number(in, "gamma_n") * to_mhz;
  if (has(in, "A")) p.A_mhz = vec3(in, "A") * to_mhz;
  if (has(in, "n_dd")) p.n_dd = static_cast<int>(integer(in, "n_dd"));
  try {
    p.validate();
  } catch (const std::invalid_argument &e) {
    throw ConfigError(e.what());
  }
  return p;
}

// ---------------------------------------------------------------------------
// Subcommands.

struct OutputFile {
  std::string name;
  std::string content;
};

struct Result {
  std::vector<OutputFile> files;
  std::string summary;
};

struct Context {
  unsigned threads = 1;
};

using Job = std::function<Result()>;

struct Subcommand {
  std::string name;
  std::string help;
  std::vector<OptionSpec> specs;
  std::vector<std::string> outputs;
  bool seeded = false;
  // Validates the inputs and returns the computation.
  std::function<Job(const json &, const Context &)> prepare;
};

Subcommand binary_stats_cmd() {
  Subcommand c{"binary-stats", "statistics of one binary measurement", setting_specs(true), {"binary_stats.csv"}, false, {}};
  c.prepare = [](const json &in, const Context &) -> Job {
    const MeasurementSetting s = build_setting(in, true);
    return [s] {
      const BinaryStats st = binary_stats(s);
      Csv csv({"alpha", "phi", "p_plus", "p_minus", "mean_plus", "mean_minus", "sigma_plus", "sigma_minus", "D"});
      csv.row({num(s.alpha()), num(s.phi), num(s.readout.p_plus), num(s.readout.p_minus), num(st.mean_plus),
               num(st.mean_minus), num(st.sigma_plus), num(st.sigma_minus), num(st.strength_D)});
      return Result{{{"binary_stats.csv", csv.str()}}, fmt::format("D = {}\n", st.strength_D)};
    };
  };
  return c;
}

Subcommand distribution_cmd() {
  auto specs = setting_specs(true);
  specs.push_back({"n", Kind::integer, 100, "number of binary measurements"});
  specs.push_back({"law", Kind::text, "exact", "exact (binomial) or gaussian"});
  Subcommand c{"distribution", "conditional laws of the averaged outcome", specs, {"distribution.csv"}, false, {}};
  c.prepare = [](const json &in, const Context &) -> Job {
    const MeasurementSetting s = build_setting(in, true);
    const int n = static_cast<int>(positive(in, "n"));
    const std::string law = text(in, "law");
    if (law != "exact" && law != "gaussian") throw ConfigError("'law' must be exact or gaussian");
    return [s, n, law] {
      const OutcomeDistribution d = law == "exact" ? exact_distribution(s, n) : gaussian_distribution(s, n);
      Csv csv({"u_bar", "p_plus_alpha", "p_minus_alpha"});
      for (int k = 0; k <= n; ++k) csv.row({num(d.u_bar(k)), num(d.probs_plus[k]), num(d.probs_minus[k])});
      return Result{{{"distribution.csv", csv.str()}}, fmt::format("{} law over {} measurements\n", law, n)};
    };
  };
  return c;
}

Subcommand fidelity_cmd() {
  auto specs = setting_specs(true);
  specs.push_back({"n", Kind::integer_list, json::array({200}), "numbers of binary measurements (comma-separated)"});
  Subcommand c{"fidelity", "cascaded readout fidelity", specs, {"fidelity.csv"}, false, {}};
  c.prepare = [](const json &in, const Context &) -> Job {
    const MeasurementSetting s = build_setting(in, true);
    std::vector<int> ns;
    for (const auto &v : in.at("n")) {
      if (v.get<long long>() < 1) throw ConfigError("'n' entries must be >= 1");
      ns.push_back(v.get<int>());
    }
    if (ns.empty()) throw ConfigError("'n' must not be empty");
    if (!(binary_stats(s).strength_D > 0.0)) throw ConfigError("states indistinguishable (D = 0)");
    return [s, ns] {
      Csv csv({"n", "D", "DN", "u_th", "F_plus", "F_minus", "F_bar", "F_erf"});
      std::string summary;
      const double D = binary_stats(s).strength_D;
      for (int n : ns) {
        const FidelityReport r = cascaded_fidelity(s, n);
        csv.row({std::to_string(n), num(D), num(r.strength_DN), num(r.u_threshold), num(r.F_plus), num(r.F_minus),
                 num(r.F_bar), num(r.F_erf)});
        summary += fmt::format("n = {}: F_bar = {:.4f} (erf {:.4f}), N_c = {}\n", n, r.F_bar, r.F_erf, r.N_c);
      }
      return Result{{{"fidelity.csv", csv.str()}}, summary};
    };
  };
  return c;
}

Subcommand qnd_solve_cmd() {
  auto specs = nv_specs("P2");
  specs.push_back({"t_dd", Kind::number, nullptr, "DD duration in ns (default N_DD T)"});
  specs.push_back({"order", Kind::integer, 2, "concatenation order (1 periodic DD, 2 CPMG)"});
  specs.push_back({"t_min", Kind::number, nullptr, "waiting-time window start in ns (default 0)"});
  specs.push_back({"t_max", Kind::number, nullptr, "waiting-time window end in ns (default T_R)"});
  specs.push_back({"grid", Kind::integer, 2048, "grid points for the minimum search"});
  Subcommand c{"qnd-solve", "waiting times that satisfy the QND condition", specs, {"qnd_solve.csv"}, false, {}};
  c.prepare = [](const json &in, const Context &) -> Job {
    const NvParams p = build_nv(in);
    const LarmorPeriods per = larmor_periods(p);
    const double t_dd = has(in, "t_dd") ? units::ns_to_s(number(in, "t_dd")) : p.n_dd * per.T;
    const int order = static_cast<int>(positive(in, "order"));
    if (order > 20) throw ConfigError("'order' must be <= 20");
    const double t_lo = has(in, "t_min") ? units::ns_to_s(number(in, "t_min")) : 0.0;
    const double t_hi = has(in, "t_max") ? units::ns_to_s(number(in, "t_max")) : per.T_R;
    if (!(t_dd > 0.0)) throw ConfigError("'t_dd' must be positive");
    if (!(t_hi > t_lo)) throw ConfigError("empty waiting-time window");
    const int grid = static_cast<int>(integer(in, "grid"));
    if (grid < 3) throw ConfigError("'grid' must be >= 3");
    return [=] {
      const SpinSystem sys = nv_system(p);
      const double tau = 2.0 * t_dd / (p.n_dd * std::ldexp(1.0, order - 1));
      const AlphaPhi ap = extract_alpha_phi(exact_dd_evolution(sys, concatenated_dd(order, tau, p.n_dd)));
      const auto minima = solve_waiting_time(sys, ap.phi_dd, measurement_axis(ap.alpha), t_lo, t_hi, grid);
      Csv csv({"t_R", "residual"});
      for (const auto &m : minima) csv.row({num(units::s_to_ns(m.t_R)), num(m.residual)});
      std::string summary = fmt::format("|alpha| = {:.6g} rad\n", ap.alpha.norm());
      if (!minima.empty()) {
        const WaitingTimeMinimum best = best_waiting_time(minima);
        summary += fmt::format("best t_R = {:.6f} ns, residual = {:.3e} rad\n", units::s_to_ns(best.t_R), best.residual);
      }
      return Result{{{"qnd_solve.csv", csv.str()}}, summary};
    };
  };
  return c;
}

Subcommand stability_cmd() {
  std::vector<OptionSpec> specs{
      {"alpha", Kind::number, kPi / 2, "measurement rotation angle |alpha| in rad"},
      {"axis", Kind::vec3, json::array({1.0, 0.0, 0.0}), "measurement axis"},
      {"kind", Kind::text, "systematic", "systematic, random or explicit"},
      {"dphi", Kind::number, 0.01, "error angle (systematic) or standard deviation (random), rad"},
      {"error_axis", Kind::vec3, nullptr, "error direction (default perpendicular to the axis)"},
      {"axis_policy", Kind::text, "fixed", "random errors: fixed or isotropic"},
      {"errors", Kind::vec3_list, nullptr, "explicit per-cycle error vectors, reused cyclically"},
      {"runs", Kind::integer, 1000, "random errors: ensemble size"},
      {"seed", Kind::integer, 1, "random errors: master seed"},
      {"n_max", Kind::integer, 1000, "number of cycles"},
  };
  Subcommand c{"stability", "survival of a measured eigenstate under rotation errors", specs, {"stability.csv"}, true, {}};
  c.prepare = [](const json &in, const Context &ctx) -> Job {
    const double alpha = number(in, "alpha");
    const Vec3 axis = vec3(in, "axis");
    if (!(axis.norm() > 0.0)) throw ConfigError("'axis' must be nonzero");
    const Vec3 ah = axis.normalized();
    const RotVec3 alpha_vec = alpha * ah;
    const std::string kind = text(in, "kind");
    const double dphi = number(in, "dphi");
    const auto n_max = static_cast<std::int64_t>(positive(in, "n_max"));
    Vec3 dir = ah.cross(std::abs(ah.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX()).normalized();
    if (has(in, "error_axis")) {
      dir = vec3(in, "error_axis");
      if (!(dir.norm() > 0.0)) throw ConfigError("'error_axis' must be nonzero");
      dir.normalize();
    }
    const double perp = dir.cross(ah).norm();
    const unsigned threads = ctx.threads;

    if (kind == "systematic") {
      return [=] {
        const SurvivalCurve curve = survival_curve(alpha_vec, RotationErrorModel::systematic(dphi * dir), n_max);
        Csv csv({"N", "S_sim", "S_analytic"});
        for (std::int64_t n = 0; n <= n_max; ++n)
          csv.row({std::to_string(n), num(curve.values[n]),
                   num(analytic_survival(ErrorKind::systematic, alpha, dphi * perp, n))});
        return Result{{{"stability.csv", csv.str()}}, fmt::format("N_L = {}\n", curve.lifetime)};
      };
    }
    if (kind == "random") {
      const std::string policy = text(in, "axis_policy");
      if (policy != "fixed" && policy != "isotropic") throw ConfigError("'axis_policy' must be fixed or isotropic");
      if (!(dphi >= 0.0)) throw ConfigError("'dphi' must be nonnegative");
      const int runs = static_cast<int>(integer(in, "runs"));
      if (runs < 2) throw ConfigError("'runs' must be >= 2");
      const std::uint64_t seed = seed_of(in);
      const bool iso = policy == "isotropic";
      return [=] {
        const auto model = iso ? RotationErrorModel::random_isotropic(dphi, seed)
                               : RotationErrorModel::random_fixed_axis(dir, dphi, seed);
        const EnsembleSurvival e = ensemble_survival(alpha_vec, model, runs, seed, n_max, threads);
        // rms error perpendicular to the axis
        const double eff = iso ? std::sqrt(2.0) * dphi : dphi * perp;
        Csv csv({"N", "S_sim", "S_analytic"});
        for (std::int64_t n = 0; n <= n_max; ++n)
          csv.row({std::to_string(n), num(e.mean[n]), num(analytic_survival(ErrorKind::random, alpha, eff, n))});
        return Result{{{"stability.csv", csv.str()}}, fmt::format("ensemble of {} runs\n", runs)};
      };
    }
    if (kind == "explicit") {
      if (!has(in, "errors") || in.at("errors").empty()) throw ConfigError("'errors' is required for explicit errors");
      std::vector<RotVec3> errs;
      for (const auto &v : in.at("errors")) errs.push_back(to_vec3(v));
      return [=] {
        const SurvivalCurve curve = survival_curve(alpha_vec, RotationErrorModel::explicit_errors(errs), n_max);
        Csv csv({"N", "S_sim", "S_analytic"});
        for (std::int64_t n = 0; n <= n_max; ++n)
          csv.row({std::to_string(n), num(curve.values[n]), num(std::numeric_limits<double>::quiet_NaN())});
        return Result{{{"stability.csv", csv.str()}}, fmt::format("N_L = {}\n", curve.lifetime)};
      };
    }
    throw ConfigError("'kind' must be systematic, random or explicit");
  };
  return c;
}

Subcommand trajectories_cmd() {
  auto specs = setting_specs(false);
  specs.push_back({"cycle", Kind::vec3, json::array({0.0, 0.0, 0.0}), "total per-cycle rotation vector, rad"});
  specs.push_back({"initial", Kind::text, "plus", "initial nuclear state: plus, minus or mixed"});
  specs.push_back({"bloch", Kind::vec3, nullptr, "initial Bloch vector (overrides initial)"});
  specs.push_back({"n", Kind::integer, 100, "measurements per trajectory"});
  specs.push_back({"count", Kind::integer, 1000, "number of trajectories"});
  specs.push_back({"seed", Kind::integer, 1, "master seed"});
  Subcommand c{"trajectories", "quantum trajectories of the measurement record", specs, {"trajectories.csv"}, true, {}};
  c.prepare = [](const json &in, const Context &ctx) -> Job {
    const MeasurementSetting s = build_setting(in, false);
    const Rotor cycle = rotor_exp(vec3(in, "cycle"));
    NuclearState init;
    if (has(in, "bloch")) {
      init.bloch = vec3(in, "bloch");
      if (init.bloch.norm() > 1.0 + 1e-12) throw ConfigError("'bloch' must have length <= 1");
    } else {
      const std::string name = text(in, "initial");
      if (name == "plus") {
        init = NuclearState::eigenstate(s, Branch::plus);
      } else if (name == "minus") {
        init = NuclearState::eigenstate(s, Branch::minus);
      } else if (name != "mixed") {
        throw ConfigError("'initial' must be plus, minus or mixed");
      }
    }
    const int n = static_cast<int>(positive(in, "n"));
    const auto count = static_cast<std::size_t>(positive(in, "count"));
    const std::uint64_t seed = seed_of(in);
    const unsigned threads = ctx.threads;
    return [=] {
      const auto runs = run_ensemble(s, cycle, init, n, count, seed, threads);
      Csv csv({"seed", "u_bar", "final_bx", "final_by", "final_bz"});
      double mean = 0.0;
      for (const auto &r : runs) {
        csv.row({std::to_string(r.seed), num(r.u_bar), num(r.final_state.bloch.x()), num(r.final_state.bloch.y()),
                 num(r.final_state.bloch.z())});
        mean += r.u_bar;
      }
      return Result{{{"trajectories.csv", csv.str()}},
                    fmt::format("{} trajectories, mean u_bar = {:.6f}\n", count, mean / static_cast<double>(count))};
    };
  };
  return c;
}

Subcommand nv_scan_cmd() {
  auto specs = nv_specs("P2");
  for (auto &s : setting_specs(true)) {
    if (s.key == "alpha" || s.key == "axis") continue;
    specs.push_back(s);
  }
  specs.push_back({"n_tdd", Kind::integer, 256, "t_DD grid points"});
  specs.push_back({"n_tr", Kind::integer, 256, "t_R grid points over one period"});
  specs.push_back({"tdd_half_width", Kind::number, 0.5, "t_DD half window in units of T around N_DD T"});
  specs.push_back({"n_max", Kind::integer, 1000000, "lifetime iteration cap"});
  Subcommand c{"nv-scan", "lifetime map over (t_DD, t_R) for an NV center", specs, {"scan.csv", "tolerance.csv"}, false, {}};
  c.prepare = [](const json &in, const Context &ctx) -> Job {
    ScanConfig cfg;
    cfg.params = build_nv(in);
    cfg.readout = build_readout(in, room_temp_readout(0.1, 0.07));
    cfg.phi = number(in, "phi");
    cfg.n_tdd = static_cast<int>(positive(in, "n_tdd"));
    cfg.n_tr = static_cast<int>(integer(in, "n_tr"));
    cfg.tdd_half_width = number(in, "tdd_half_width");
    cfg.n_max = positive(in, "n_max");
    cfg.threads = ctx.threads;
    try {
      cfg.validate();
    } catch (const std::invalid_argument &e) {
      throw ConfigError(e.what());
    }
    return [cfg] {
      const ScanResult scan = scan_2d(cfg);
      Csv rows({"t_DD", "t_R", "alpha", "qnd_residual", "D", "N_c", "N_L"});
      for (const ScanRow &r : scan.rows)
        rows.row({num(units::s_to_ns(r.t_dd)), num(units::s_to_ns(r.t_r)), num(r.alpha), num(r.qnd_residual), num(r.D),
                  num(r.N_c), num(r.N_L)});
      Csv tol({"t_DD", "dtR_measured", "dtR_worst_case", "Nc"});
      for (const ToleranceRow &t : tolerance_profile(scan))
        tol.row({num(units::s_to_ns(t.t_dd)), num(units::s_to_ns(t.dtR_measured)), num(units::s_to_ns(t.dtR_worst_case)),
                 num(t.N_c)});
      return Result{{{"scan.csv", rows.str()}, {"tolerance.csv", tol.str()}},
                    fmt::format("{} x {} grid, T_R = {:.1f} ns, T = {:.1f} ns\n", cfg.n_tdd, cfg.n_tr,
                                units::s_to_ns(scan.periods.T_R), units::s_to_ns(scan.periods.T))};
    };
  };
  return c;
}

Subcommand table1_cmd() {
  Subcommand c{"table1", "Larmor periods of the NV parameter sets", nv_specs(nullptr), {"table1.csv"}, false, {}};
  c.prepare = [](const json &in, const Context &) -> Job {
    std::vector<std::pair<std::string, NvParams>> sets;
    if (has(in, "preset") || has(in, "B_gauss")) {
      sets.emplace_back(has(in, "preset") ? text(in, "preset") : "custom", build_nv(in));
    } else {
      for (const char *name : {"P1", "P2", "P3"}) {
        json one = in;
        one["preset"] = name;
        sets.emplace_back(name, build_nv(one));
      }
    }
    return [sets] {
      Csv csv({"preset", "B_gauss", "N_DD", "T_R", "T"});
      std::string summary;
      for (const auto &[name, p] : sets) {
        const LarmorPeriods per = larmor_periods(p);
        csv.row({name, num(p.B_tesla / units::gauss_to_tesla(1.0)), std::to_string(p.n_dd), num(units::s_to_ns(per.T_R)),
                 num(units::s_to_ns(per.T))});
        summary += fmt::format("{}: T_R = {:.0f} ns, T = {:.0f} ns\n", name, units::s_to_ns(per.T_R),
                               units::s_to_ns(per.T));
      }
      return Result{{{"table1.csv", csv.str()}}, summary};
    };
  };
  return c;
}

std::vector<Subcommand> all_subcommands() {
  return {binary_stats_cmd(), distribution_cmd(), fidelity_cmd(), qnd_solve_cmd(),
          stability_cmd(),    trajectories_cmd(), nv_scan_cmd(),  table1_cmd()};
}

// ---------------------------------------------------------------------------
// Driver.

json read_json_file(const std::string &path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(fmt::format("cannot open '{}'", path));
  try {
    return json::parse(f);
  } catch (const json::parse_error &e) {
    throw ConfigError(fmt::format("'{}' is not valid JSON: {}", path, e.what()));
  }
}

// defaults <- config object <- explicit flags
json resolve_inputs(const Subcommand &cmd, const json &config, const std::map<std::string, std::string> &flags) {
  json in = json::object();
  for (const auto &s : cmd.specs) in[s.key] = s.fallback;
  if (!config.is_null()) {
    if (!config.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto &[key, value] : config.items()) {
      const auto it = std::find_if(cmd.specs.begin(), cmd.specs.end(), [&](const auto &s) { return s.key == key; });
      if (it == cmd.specs.end()) throw ConfigError(fmt::format("unknown config key '{}' for {}", key, cmd.name));
      check_kind(*it, value);
      in[key] = value;
    }
  }
  for (const auto &s : cmd.specs) {
    const auto f = flags.find(s.key);
    if (f != flags.end()) in[s.key] = from_flag(s, f->second);
  }
  return in;
}

void write_file(const fs::path &path, const std::string &content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  f << content;
  if (!f) throw std::runtime_error(fmt::format("failed writing '{}'", path.string()));
}

std::string manifest_name(const std::string &sub) { return sub + ".manifest.json"; }

}  // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  const std::vector<Subcommand> cmds = all_subcommands();

  CLI::App app{"qndspin: repetitive weak QND measurement of a nuclear spin", "qndspin"};
  app.set_version_flag("--version", std::string(QNDSPIN_VERSION));
  app.require_subcommand(0, 1);
  std::string config_path, out_dir = ".", manifest_path;
  bool force = false;
  int threads = 0;
  app.add_option("--config", config_path, "JSON file with input keys for the subcommand");
  app.add_option("--out-dir", out_dir, "directory for CSV files and the run manifest")->capture_default_str();
  app.add_flag("--force", force, "overwrite existing output files");
  app.add_option("--threads", threads, "worker threads (0: QNDSPIN_THREADS or hardware)");
  app.add_option("--from-manifest", manifest_path, "rerun the subcommand and inputs recorded in a manifest");

  std::vector<CLI::App *> subs;
  std::vector<std::map<std::string, std::string>> flag_values(cmds.size());
  std::vector<std::vector<std::pair<std::string, CLI::Option *>>> flag_opts(cmds.size());
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    CLI::App *sub = app.add_subcommand(cmds[i].name, cmds[i].help);
    sub->fallthrough();
    for (const auto &spec : cmds[i].specs) {
      std::string help = spec.help;
      if (!spec.fallback.is_null()) help += fmt::format(" [default: {}]", spec.fallback.dump());
      CLI::Option *opt = sub->add_option(flag_name(spec.key), flag_values[i][spec.key], help);
      opt->type_name(type_label(spec.kind));
      flag_opts[i].emplace_back(spec.key, opt);
    }
    subs.push_back(sub);
  }

  std::vector<const char *> argv{"qndspin"};
  for (const auto &a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  const Subcommand *cmd = nullptr;
  json config;
  std::map<std::string, std::string> flags;
  try {
    if (threads < 0) throw ConfigError("--threads must be nonnegative");
    for (std::size_t i = 0; i < cmds.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      cmd = &cmds[i];
      for (const auto &[key, opt] : flag_opts[i])
        if (opt->count() > 0) flags[key] = flag_values[i][key];
    }
    if (!manifest_path.empty()) {
      if (cmd || !config_path.empty()) throw ConfigError("--from-manifest takes no subcommand and no --config");
      const json m = read_json_file(manifest_path);
      if (!m.contains("subcommand") || !m.at("subcommand").is_string() || !m.contains("inputs"))
        throw ConfigError("manifest lacks subcommand or inputs");
      const std::string name = m.at("subcommand").get<std::string>();
      const auto it = std::find_if(cmds.begin(), cmds.end(), [&](const auto &c) { return c.name == name; });
      if (it == cmds.end()) throw ConfigError(fmt::format("manifest names unknown subcommand '{}'", name));
      cmd = &*it;
      config = m.at("inputs");
    } else if (!config_path.empty()) {
      config = read_json_file(config_path);
    }
    if (!cmd) {
      err << app.help();
      return kConfigError;
    }
  } catch (const ConfigError &e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  const Context ctx{resolve_threads(threads)};
  json inputs;
  Job job;
  const fs::path dir(out_dir);
  std::vector<std::string> names = cmd->outputs;
  names.push_back(manifest_name(cmd->name));
  try {
    inputs = resolve_inputs(*cmd, config, flags);
    job = cmd->prepare(inputs, ctx);
    if (fs::exists(dir) && !fs::is_directory(dir))
      throw ConfigError(fmt::format("'{}' is not a directory", dir.string()));
    if (!force) {
      for (const auto &n : names)
        if (fs::exists(dir / n)) throw ConfigError(fmt::format("'{}' exists; use --force to overwrite", (dir / n).string()));
    }
  } catch (const ConfigError &e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument &e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const json::exception &e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    const auto t0 = std::chrono::steady_clock::now();
    Result res = job();
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    fs::create_directories(dir);
    json outputs = json::array();
    for (const auto &f : res.files) {
      write_file(dir / f.name, f.content);
      outputs.push_back({{"file", f.name}, {"bytes", f.content.size()}});
    }
    json manifest = {{"tool", "qndspin"},
                     {"version", QNDSPIN_VERSION},
                     {"subcommand", cmd->name},
                     {"inputs", inputs},
                     {"seed", cmd->seeded ? inputs.at("seed") : json(nullptr)},
                     {"rng", std::string(kRngName)},
                     {"threads", ctx.threads},
                     {"wall_time_s", wall},
                     {"outputs", outputs}};
    write_file(dir / manifest_name(cmd->name), manifest.dump(2) + "\n");
    out << res.summary;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kOk;
}

}  // namespace qnd::cli
