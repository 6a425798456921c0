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

#include <cmath>

#include "clickrl/error.hpp"
#include "clickrl/pgm.hpp"
#include "pgm_internal.hpp"

namespace clickrl::pgm {

EmResult train_ubm(std::span<const Impression> log, int iters, const UbmOptions& opts) {
  if (iters < 1) throw ValidationError("train_ubm: iterations must be >= 1");
  if (log.empty()) throw ValidationError("train_ubm: empty log");
  for (const auto& imp : log) validate(imp, opts.max_positions);
  const detail::IndexedLog idx(log);
  const std::size_t R = opts.max_positions;

  std::vector<double> alpha(idx.pairs.size(), kInitValue);
  std::vector<std::vector<double>> exam(R);
  for (std::size_t r = 0; r < R; ++r) exam[r].assign(r + 1, kInitValue);

  if (opts.stopping.patience < 1) throw ValidationError("train_ubm: patience must be >= 1");
  EmResult res;
  detail::EmMonitor monitor(opts.stopping);
  const auto make = [&] {
    UbmParams p;
    p.prior = opts.prior;
    p.alpha = idx.to_map(alpha);
    p.exam = exam;
    return PgmParams(std::move(p));
  };
  std::vector<double> a_num(alpha.size()), a_den(alpha.size());
  std::vector<std::vector<double>> e_num(R), e_den(R);
  for (int it = 0; it < iters; ++it) {
    std::fill(a_num.begin(), a_num.end(), 0.0);
    std::fill(a_den.begin(), a_den.end(), 0.0);
    for (std::size_t r = 0; r < R; ++r) {
      e_num[r].assign(r + 1, 0.0);
      e_den[r].assign(r + 1, 0.0);
    }
    for (std::size_t i = 0; i < log.size(); ++i) {
      const auto& imp = log[i];
      std::size_t prev = 0;
      for (std::size_t r = 0; r < imp.size(); ++r) {
        const int id = idx.ids[i][r];
        const double a = alpha[id];
        const double e = exam[r][prev];
        double ra = 1.0, re = 1.0;
        if (!imp.clicks[r]) {
          const double rest = 1.0 - a * e;
          ra = rest > 0.0 ? a * (1.0 - e) / rest : a;
          re = rest > 0.0 ? e * (1.0 - a) / rest : e;
        }
        a_num[id] += ra;
        a_den[id] += 1.0;
        e_num[r][prev] += re;
        e_den[r][prev] += 1.0;
        if (imp.clicks[r]) prev = r + 1;
      }
    }
    for (std::size_t k = 0; k < alpha.size(); ++k) {
      if (a_den[k] > 0) alpha[k] = a_num[k] / a_den[k];
    }
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t p = 0; p <= r; ++p) {
        if (e_den[r][p] > 0) exam[r][p] = e_num[r][p] / e_den[r][p];
      }
    }

    double ll = 0.0;
    for (std::size_t i = 0; i < log.size(); ++i) {
      const auto& imp = log[i];
      std::size_t prev = 0;
      for (std::size_t r = 0; r < imp.size(); ++r) {
        const double q = alpha[idx.ids[i][r]] * exam[r][prev];
        ll += std::log(imp.clicks[r] ? q : 1.0 - q);
        if (imp.clicks[r]) prev = r + 1;
      }
    }
    res.ll_trace.push_back(ll);
    if (!monitor.after_iteration(it + 1, it + 1 == iters, make)) break;
  }
  monitor.finish(res);
  return res;
}

}  // namespace clickrl::pgm
