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

#include <numbers>

// Internal units are SI: rad/s, s, tesla. "1 MHz" means 2 pi x 10^6 rad/s.
namespace qnd::units {

inline constexpr double kRadPerSecPerMHz = 2.0 * std::numbers::pi * 1e6;

constexpr double mhz_to_rad_per_s(double mhz) { return mhz * kRadPerSecPerMHz; }
constexpr double rad_per_s_to_mhz(double w) { return w / kRadPerSecPerMHz; }
constexpr double gauss_to_tesla(double g) { return g * 1e-4; }
constexpr double ns_to_s(double ns) { return ns * 1e-9; }
constexpr double s_to_ns(double s) { return s * 1e9; }

}  // namespace qnd::units
