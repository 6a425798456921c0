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

#include <algorithm>
#include <cmath>

#include "clickrl/error.hpp"
#include "clickrl/pgm.hpp"
#include "pgm_internal.hpp"

namespace clickrl::pgm {

namespace detail {

IndexedLog::IndexedLog(std::span<const Impression> imps) : log(imps) {
  std::map<std::pair<std::string, std::string>, int> index;
  ids.reserve(imps.size());
  for (const auto& imp : imps) {
    std::vector<int> row;
    row.reserve(imp.size());
    for (const auto& d : imp.doc_ids) {
      auto [it, fresh] = index.try_emplace({imp.query_id, d}, static_cast<int>(pairs.size()));
      if (fresh) pairs.emplace_back(imp.query_id, d);
      row.push_back(it->second);
    }
    ids.push_back(std::move(row));
  }
}

PairMap IndexedLog::to_map(const std::vector<double>& values) const {
  PairMap out;
  for (std::size_t i = 0; i < pairs.size(); ++i) out.emplace(pairs[i], values[i]);
  return out;
}

}  // namespace detail

double lookup(const PairMap& m, const std::string& query_id, const std::string& doc_id,
              double fallback) {
  const auto it = m.find({query_id, doc_id});
  return it == m.end() ? fallback : it->second;
}

std::string model_name(const PgmParams& p) {
  switch (p.index()) {
    case 0: return "dcm";
    case 1: return "ubm";
    default: return "dbn";
  }
}

DcmParams train_dcm(std::span<const Impression> log, const DcmOptions& opts) {
  if (log.empty()) throw ValidationError("train_dcm: empty log");
  const std::size_t R = opts.max_positions;
  std::vector<double> rank_clicks(R, 0.0), rank_last(R, 0.0);
  std::map<std::pair<std::string, std::string>, std::pair<double, double>> counts;
  for (const auto& imp : log) {
    validate(imp, R);
    const auto last = last_click_position(imp);
    const int examined = last ? *last : 1;
    for (int r = 1; r <= examined; ++r) {
      auto& c = counts[{imp.query_id, imp.doc_ids[r - 1]}];
      c.first += imp.clicks[r - 1];
      c.second += 1.0;
      if (imp.clicks[r - 1]) rank_clicks[r - 1] += 1.0;
    }
    if (last) rank_last[*last - 1] += 1.0;
    for (std::size_t r = examined; r < imp.size(); ++r) {
      counts.try_emplace({imp.query_id, imp.doc_ids[r]}, 0.0, 0.0);
    }
  }
  DcmParams p;
  p.prior = opts.prior;
  p.lambda.assign(R, kInitValue);
  for (std::size_t r = 0; r < R; ++r) {
    if (rank_clicks[r] > 0) p.lambda[r] = std::clamp(1.0 - rank_last[r] / rank_clicks[r], 0.0, 1.0);
  }
  for (const auto& [key, c] : counts) {
    p.attractiveness.emplace(key, c.second > 0 ? c.first / c.second : opts.prior);
  }
  return p;
}

namespace {

std::vector<double> predict_dcm(const DcmParams& p, const Impression& imp) {
  std::vector<double> out(imp.size());
  double e = 1.0;
  for (std::size_t r = 0; r < imp.size(); ++r) {
    const double a = lookup(p.attractiveness, imp.query_id, imp.doc_ids[r], p.prior);
    out[r] = e * a;
    if (imp.clicks[r]) {
      e = r < p.lambda.size() ? p.lambda[r] : kInitValue;
    } else {
      const double rest = 1.0 - e * a;
      e = rest > 0.0 ? e * (1.0 - a) / rest : 0.0;
    }
  }
  return out;
}

std::vector<double> predict_ubm(const UbmParams& p, const Impression& imp) {
  std::vector<double> out(imp.size());
  std::size_t prev = 0;
  for (std::size_t r = 0; r < imp.size(); ++r) {
    const double a = lookup(p.alpha, imp.query_id, imp.doc_ids[r], p.prior);
    const double e = r < p.exam.size() ? p.exam[r][prev] : kInitValue;
    out[r] = a * e;
    if (imp.clicks[r]) prev = r + 1;
  }
  return out;
}

std::vector<double> predict_dbn(const DbnParams& p, const Impression& imp) {
  std::vector<double> out(imp.size());
  double e = 1.0;
  const double g = p.persevere;
  for (std::size_t r = 0; r < imp.size(); ++r) {
    const double a = lookup(p.attract, imp.query_id, imp.doc_ids[r], p.prior);
    out[r] = e * a;
    if (imp.clicks[r]) {
      e = g * (1.0 - lookup(p.satisfy, imp.query_id, imp.doc_ids[r], kInitValue));
    } else {
      const double rest = 1.0 - e * a;
      e = rest > 0.0 ? g * e * (1.0 - a) / rest : 0.0;
    }
  }
  return out;
}

}  // namespace

std::vector<double> pgm_predict(const PgmParams& params, const Impression& imp) {
  return std::visit(
      [&](const auto& p) -> std::vector<double> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, DcmParams>) return predict_dcm(p, imp);
        else if constexpr (std::is_same_v<T, UbmParams>) return predict_ubm(p, imp);
        else return predict_dbn(p, imp);
      },
      params);
}

std::vector<double> pgm_rank_scores(const PgmParams& params, const Impression& imp) {
  std::vector<double> out(imp.size());
  for (std::size_t r = 0; r < imp.size(); ++r) {
    const auto& q = imp.query_id;
    const auto& d = imp.doc_ids[r];
    if (const auto* dcm = std::get_if<DcmParams>(&params)) {
      out[r] = lookup(dcm->attractiveness, q, d, dcm->prior);
    } else if (const auto* ubm = std::get_if<UbmParams>(&params)) {
      out[r] = lookup(ubm->alpha, q, d, ubm->prior);
    } else {
      const auto& dbn = std::get<DbnParams>(params);
      out[r] = lookup(dbn.attract, q, d, dbn.prior) * lookup(dbn.satisfy, q, d, kInitValue);
    }
  }
  return out;
}

double log_likelihood(const PgmParams& params, std::span<const Impression> log) {
  double ll = 0.0;
  for (const auto& imp : log) {
    const auto probs = pgm_predict(params, imp);
    for (std::size_t r = 0; r < imp.size(); ++r) {
      ll += std::log(imp.clicks[r] ? probs[r] : 1.0 - probs[r]);
    }
  }
  return ll;
}

}  // namespace clickrl::pgm
