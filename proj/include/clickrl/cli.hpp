// Copyright 2026 The clickrl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace clickrl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;  // bad flags, files or configuration
inline constexpr int kExitFailure = 2;  // runtime failure, including a failed gradient check

/// Subcommands: simulate, convert, train, evaluate, compare, gradcheck, keys.
/// `args` excludes the program name.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace clickrl::cli
