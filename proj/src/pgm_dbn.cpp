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

EmResult train_dbn(std::span<const Impression> log, int iters, const DbnOptions& opts) {
  if (iters < 1) throw ValidationError("train_dbn: iterations must be >= 1");
  if (log.empty()) throw ValidationError("train_dbn: empty log");
  if (!(opts.persevere >= 0.0 && opts.persevere <= 1.0)) {
    throw ValidationError("train_dbn: persevere must lie in [0,1]");
  }
  for (const auto& imp : log) validate(imp, imp.size());
  const detail::IndexedLog idx(log);
  const double g = opts.persevere;

  std::vector<double> attract(idx.pairs.size(), kInitValue);
  std::vector<double> satisfy(idx.pairs.size(), kInitValue);
  std::vector<double> a_num(attract.size()), a_den(attract.size());
  std::vector<double> s_num(attract.size()), s_den(attract.size());
  std::vector<double> z, pe;

  if (opts.stopping.patience < 1) throw ValidationError("train_dbn: patience must be >= 1");
  EmResult res;
  detail::EmMonitor monitor(opts.stopping);
  const auto make = [&] {
    DbnParams p;
    p.persevere = g;
    p.prior = opts.prior;
    p.attract = idx.to_map(attract);
    p.satisfy = idx.to_map(satisfy);
    return PgmParams(std::move(p));
  };
  for (int it = 0; it < iters; ++it) {
    std::fill(a_num.begin(), a_num.end(), 0.0);
    std::fill(a_den.begin(), a_den.end(), 0.0);
    std::fill(s_num.begin(), s_num.end(), 0.0);
    std::fill(s_den.begin(), s_den.end(), 0.0);
    for (std::size_t i = 0; i < log.size(); ++i) {
      const auto& imp = log[i];
      const auto& ids = idx.ids[i];
      const std::size_t T = imp.size();
      const std::size_t l = last_click_position(imp).value_or(0);

      // z[r]: probability of no click at ranks r..T given rank r is examined.
      z.assign(T + 2, 1.0);
      for (std::size_t r = T; r > l; --r) {
        z[r] = (1.0 - attract[ids[r - 1]]) * ((1.0 - g) + g * z[r + 1]);
      }
      pe.assign(T + 2, 0.0);
      if (l == 0) {
        pe[1] = 1.0;
      } else {
        const double s = satisfy[ids[l - 1]];
        const double stay = (1.0 - s) * ((1.0 - g) + g * z[l + 1]);
        const double denom = s + stay;
        s_num[ids[l - 1]] += denom > 0.0 ? s / denom : s;
        s_den[ids[l - 1]] += 1.0;
        pe[l + 1] = denom > 0.0 ? (1.0 - s) * g * z[l + 1] / denom : 0.0;
      }
      for (std::size_t r = 1; r <= T; ++r) {
        const int id = ids[r - 1];
        a_den[id] += 1.0;
        if (r <= l) {
          a_num[id] += imp.clicks[r - 1];
          if (imp.clicks[r - 1] && r < l) s_den[id] += 1.0;
          continue;
        }
        const double a = attract[id];
        a_num[id] += a * (1.0 - pe[r]);
        if (r < T) pe[r + 1] = z[r] > 0.0 ? pe[r] * (1.0 - a) * g * z[r + 1] / z[r] : 0.0;
      }
    }
    for (std::size_t k = 0; k < attract.size(); ++k) {
      if (a_den[k] > 0) attract[k] = a_num[k] / a_den[k];
      if (s_den[k] > 0) satisfy[k] = s_num[k] / s_den[k];
    }

    double ll = 0.0;
    for (std::size_t i = 0; i < log.size(); ++i) {
      const auto& imp = log[i];
      const auto& ids = idx.ids[i];
      const std::size_t T = imp.size();
      const std::size_t l = last_click_position(imp).value_or(0);
      for (std::size_t r = 1; r <= l; ++r) {
        const double a = attract[ids[r - 1]];
        ll += std::log(imp.clicks[r - 1] ? a : 1.0 - a);
        if (r < l) ll += std::log(imp.clicks[r - 1] ? (1.0 - satisfy[ids[r - 1]]) * g : g);
      }
      double tail = 1.0;
      for (std::size_t r = T; r > l; --r) {
        tail = (1.0 - attract[ids[r - 1]]) * ((1.0 - g) + g * tail);
      }
      if (l == 0) {
        ll += std::log(tail);
      } else {
        const double s = satisfy[ids[l - 1]];
        ll += std::log(s + (1.0 - s) * ((1.0 - g) + g * tail));
      }
    }
    res.ll_trace.push_back(ll);
    if (!monitor.after_iteration(it + 1, it + 1 == iters, make)) break;
  }
  monitor.finish(res);
  return res;
}

}  // namespace clickrl::pgm
