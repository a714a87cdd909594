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

// Command-line front end for qndspin. The executable is a thin wrapper around
// run_cli so the whole dispatch path can be exercised in-process.

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace qnd::cli {

enum ExitCode : int { kOk = 0, kRuntimeError = 1, kConfigError = 2 };

/// args excludes the program name.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace qnd::cli
