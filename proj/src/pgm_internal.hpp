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

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "clickrl/clicklog.hpp"
#include "clickrl/pgm.hpp"

namespace clickrl::pgm::detail {

/// Integer ids for the (query, doc) pairs of a log, plus per-impression rows.
struct IndexedLog {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<std::vector<int>> ids;  // per impression, per rank
  std::span<const Impression> log;

  explicit IndexedLog(std::span<const Impression> imps);
  PairMap to_map(const std::vector<double>& values) const;
};

/// Tracks validation likelihood across EM iterations.
class EmMonitor {
 public:
  explicit EmMonitor(const EmStopping& stopping) : stopping_(stopping) {}

  /// Records the parameters after `iteration`; false means stop.
  template <typename MakeParams>
  bool after_iteration(int iteration, bool last, MakeParams&& make) {
    if (stopping_.valid.empty()) {
      if (last) {
        best_ = make();
        best_iteration_ = iteration;
      }
      return true;
    }
    PgmParams p = make();
    const double ll = log_likelihood(p, stopping_.valid);
    if (best_iteration_ == 0 || ll > best_ll_) {
      best_ll_ = ll;
      best_ = std::move(p);
      best_iteration_ = iteration;
      stale_ = 0;
      return true;
    }
    return ++stale_ < stopping_.patience;
  }

  void finish(EmResult& res) {
    res.params = std::move(best_);
    res.best_iteration = best_iteration_;
  }

 private:
  EmStopping stopping_;
  PgmParams best_;
  double best_ll_ = 0.0;
  int best_iteration_ = 0;
  int stale_ = 0;
};

}  // namespace clickrl::pgm::detail
