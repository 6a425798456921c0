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

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "clickrl/clicklog.hpp"
#include "clickrl/drlc.hpp"

namespace clickrl {

struct PgmSettings {
  int iterations = 50;  // upper bound; EM stops on the validation split
  int patience = 3;
  double prior = 0.1;
  double persevere = 0.9;
};

/// Everything an experiment run depends on. One seed drives simulation,
/// splitting and training.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  SimConfig sim;
  SplitRatios split;
  drlc::Hyper hyper;
  PgmSettings pgm;
  std::vector<int> ks{1, 3, 5, 10};
  std::string data_path;
  std::string out_path;

  struct KeyDoc {
    std::string key;
    std::string description;
  };
  /// Every accepted key, in canonical order.
  static std::vector<KeyDoc> keys();

  /// `key = value` lines; blank lines and lines starting with # are ignored.
  /// Unknown or repeated keys and bad values throw ParseError; an invalid
  /// combination throws ValidationError.
  static ExperimentConfig parse(std::istream& in);
  static ExperimentConfig load(const std::string& path);

  void set(std::string_view key, std::string_view value);
  void set_seed(std::uint64_t s);
  void validate() const;

  /// Resolved values of every key except paths.*, one `key=value` per line.
  std::string canonical() const;
  /// Hex SHA-256 of canonical().
  std::string hash() const;
};

/// Hex SHA-256 of arbitrary bytes.
std::string sha256_hex(std::string_view bytes);

std::vector<int> parse_ks(std::string_view text);

}  // namespace clickrl
