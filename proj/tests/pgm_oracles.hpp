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

// Hand-derived reference results for the click-model estimators, shared by
// the unit tests and the acceptance run.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "clickrl/clicklog.hpp"

namespace clickrl::pgm {

inline Impression imp(std::string q, std::vector<std::string> docs, std::string clicks) {
  Impression i;
  i.session_id = "s";
  i.query_id = std::move(q);
  i.doc_ids = std::move(docs);
  for (char c : clicks) i.clicks.push_back(c == '1' ? 1 : 0);
  return i;
}

inline std::vector<Impression> random_log(std::uint64_t seed, std::size_t queries = 6,
                                   std::size_t impressions = 15) {
  SimConfig cfg;
  cfg.n_queries = queries;
  cfg.docs_per_query = 6;
  cfg.impressions_per_query = impressions;
  cfg.positions = 5;
  cfg.exam_model.kind = ExamModel::Kind::kCascade;
  cfg.exam_model.continuation = 0.7;
  cfg.seed = seed;
  return simulate_logs(cfg).first.impressions;
}

// One query, two documents shown in both orders over ranks 1-2.
inline std::vector<Impression> tiny_log() {
  return {imp("q", {"d1", "d2"}, "10"), imp("q", {"d1", "d2"}, "01"), imp("q", {"d1", "d2"}, "00"),
          imp("q", {"d2", "d1"}, "10"), imp("q", {"d2", "d1"}, "11"), imp("q", {"d2", "d1"}, "00")};
}

// Brute force over alpha1, alpha2 on the 1e-3 grid; for each pair the
// likelihood separates over the examination groups and is concave in each
// group parameter, so the best grid value per group is found by integer
// ternary search.
inline double ubm_grid_oracle(const std::vector<Impression>& log) {
  struct Cell {
    int doc;
    double clicks = 0, skips = 0;
  };
  std::map<std::pair<int, int>, std::map<int, Cell>> groups;  // (rank, prev) -> doc -> counts
  for (const auto& i : log) {
    int prev = 0;
    for (std::size_t r = 0; r < i.size(); ++r) {
      const int d = i.doc_ids[r] == "d1" ? 0 : 1;
      auto& c = groups[{static_cast<int>(r) + 1, prev}][d];
      c.doc = d;
      (i.clicks[r] ? c.clicks : c.skips) += 1;
      if (i.clicks[r]) prev = static_cast<int>(r) + 1;
    }
  }
  auto term = [](double n, double p) { return n == 0 ? 0.0 : n * std::log(p); };
  auto group_ll = [&](const std::map<int, Cell>& cells, const double* alpha, int k) {
    const double e = k / 1000.0;
    double s = 0;
    for (const auto& [d, c] : cells) s += term(c.clicks, alpha[d] * e) + term(c.skips, 1 - alpha[d] * e);
    return std::isnan(s) ? -INFINITY : s;
  };
  double best = -INFINITY;
  for (int i = 0; i <= 1000; ++i) {
    for (int j = 0; j <= 1000; ++j) {
      const double alpha[2] = {i / 1000.0, j / 1000.0};
      double total = 0;
      for (const auto& [key, cells] : groups) {
        int lo = 0, hi = 1000;
        while (hi - lo > 2) {
          const int m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
          if (group_ll(cells, alpha, m1) < group_ll(cells, alpha, m2)) lo = m1 + 1; else hi = m2;
        }
        double g = -INFINITY;
        for (int k = lo; k <= hi; ++k) g = std::max(g, group_ll(cells, alpha, k));
        total += g;
      }
      best = std::max(best, total);
    }
  }
  return best;
}

// Every impression has a click with a nonempty tail after the last one, and
// each clicked document is either always or never the last click. On such
// logs the perseverance-1 EM fixed point is the simplified counting model.
inline std::vector<Impression> counting_log() {
  return {imp("q", {"A", "B", "C", "D"}, "1000"), imp("q", {"A", "B", "C", "D"}, "0100"),
          imp("q", {"B", "A", "C", "D"}, "1000"), imp("q", {"C", "A", "B", "D"}, "0010"),
          imp("q", {"C", "A", "B", "D"}, "1100"), imp("q", {"C", "B", "A", "D"}, "1010"),
          imp("q", {"A", "C", "B", "D"}, "0110"), imp("q", {"D", "C", "A", "B"}, "0110"),
          imp("q", {"D", "B", "A", "C"}, "0100"), imp("q", {"C", "D", "B", "A"}, "1010")};
}

struct Counts {
  std::map<std::string, double> clicks, before_last, last;
};

inline Counts count_sdbn(const std::vector<Impression>& log) {
  Counts c;
  for (const auto& i : log) {
    const int l = last_click_position(i).value_or(0);
    for (int r = 1; r <= l; ++r) {
      c.before_last[i.doc_ids[r - 1]] += 1;
      c.clicks[i.doc_ids[r - 1]] += i.clicks[r - 1];
    }
    if (l) c.last[i.doc_ids[l - 1]] += 1;
  }
  return c;
}

}  // namespace clickrl::pgm
