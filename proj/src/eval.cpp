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

#include "clickrl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "clickrl/error.hpp"

namespace clickrl::eval {
namespace {

void check_shape(const Predictions& preds, const ClickBits& clicks) {
  if (preds.size() != clicks.size()) {
    throw ValidationError("predictions cover " + std::to_string(preds.size()) +
                          " impressions, log has " + std::to_string(clicks.size()));
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].size() != clicks[i].size()) {
      throw ValidationError("prediction length mismatch at impression " + std::to_string(i));
    }
  }
}

double log2_prob(double q, std::uint8_t c) {
  q = clamp_prob(q);
  return std::log2(c ? q : 1.0 - q);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (auto k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

std::string pair_key(const std::string& q, const std::string& d) { return q + '\x1f' + d; }

}  // namespace

ClickBits clicks_of(std::span<const Impression> log) {
  ClickBits out;
  out.reserve(log.size());
  for (const auto& imp : log) out.push_back(imp.clicks);
  return out;
}

double clamp_prob(double q) { return std::clamp(q, kProbClamp, 1.0 - kProbClamp); }

double log_likelihood(const Predictions& preds, const ClickBits& clicks) {
  check_shape(preds, clicks);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t r = 0; r < preds[i].size(); ++r) {
      const double q = clamp_prob(preds[i][r]);
      sum += clicks[i][r] ? std::log(q) : std::log(1.0 - q);
      ++n;
    }
  }
  if (n == 0) throw ValidationError("log-likelihood of an empty log");
  return sum / static_cast<double>(n);
}

Perplexity perplexity(const Predictions& preds, const ClickBits& clicks) {
  check_shape(preds, clicks);
  std::size_t ranks = 0;
  for (const auto& p : preds) ranks = std::max(ranks, p.size());
  std::vector<double> sums(ranks, 0.0);
  Perplexity out;
  out.counts.assign(ranks, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t r = 0; r < preds[i].size(); ++r) {
      sums[r] += log2_prob(preds[i][r], clicks[i][r]);
      ++out.counts[r];
    }
  }
  out.per_rank.assign(ranks, 0.0);
  double total = 0.0;
  std::size_t seen = 0;
  for (std::size_t r = 0; r < ranks; ++r) {
    if (out.counts[r] == 0) continue;
    out.per_rank[r] = std::exp2(-sums[r] / static_cast<double>(out.counts[r]));
    total += out.per_rank[r];
    ++seen;
  }
  if (seen == 0) throw ValidationError("perplexity of an empty log");
  out.overall = total / static_cast<double>(seen);
  return out;
}

double ndcg_at_k(std::span<const double> scores, std::span<const double> gains, std::size_t k) {
  if (scores.size() != gains.size()) throw ValidationError("ndcg: scores and gains differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return scores[a] > scores[b]; });
  std::vector<double> ideal(gains.begin(), gains.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const std::size_t n = std::min(k, scores.size());
  double dcg = 0.0;
  double idcg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double discount = std::log2(static_cast<double>(i) + 2.0);
    dcg += gains[order[i]] / discount;
    idcg += ideal[i] / discount;
  }
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

double ndcg_at_k(std::span<const double> scores, std::span<const std::uint8_t> clicks,
                 std::size_t k) {
  std::vector<double> gains(clicks.begin(), clicks.end());
  return ndcg_at_k(scores, gains, k);
}

NdcgSummary mean_ndcg(const Predictions& scores, const ClickBits& clicks, std::span<const int> ks) {
  check_shape(scores, clicks);
  NdcgSummary out;
  for (int k : ks) {
    if (k < 1) throw ValidationError("ndcg cutoff must be >= 1");
    out.mean[k] = 0.0;
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::none_of(clicks[i].begin(), clicks[i].end(), [](auto c) { return c != 0; })) {
      ++out.skipped;
      continue;
    }
    ++out.evaluated;
    for (auto& [k, v] : out.mean) v += ndcg_at_k(scores[i], clicks[i], static_cast<std::size_t>(k));
  }
  if (out.evaluated > 0) {
    for (auto& [k, v] : out.mean) v /= static_cast<double>(out.evaluated);
  }
  return out;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("spearman: length mismatch");
  if (x.size() < 2) throw ValidationError("spearman: need at least two points");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mean = 0.5 * static_cast<double>(x.size() + 1);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = rx[i] - mean;
    const double b = ry[i] - mean;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (sxx == 0.0 || syy == 0.0) throw ValidationError("spearman: constant input");
  return sxy / std::sqrt(sxx * syy);
}

SignTest sign_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("sign_test: length mismatch");
  SignTest t;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) {
      ++t.wins;
    } else if (a[i] < b[i]) {
      ++t.losses;
    } else {
      ++t.ties;
    }
  }
  const std::size_t n = t.wins + t.losses;
  if (n == 0) return t;
  const std::size_t m = std::min(t.wins, t.losses);
  // Two-sided exact binomial tail at p = 1/2, summed in log space.
  const double ln_half_n = static_cast<double>(n) * std::log(0.5);
  double tail = 0.0;
  for (std::size_t i = 0; i <= m; ++i) {
    const double ln_c = std::lgamma(static_cast<double>(n) + 1.0) -
                        std::lgamma(static_cast<double>(i) + 1.0) -
                        std::lgamma(static_cast<double>(n - i) + 1.0);
    tail += std::exp(ln_c + ln_half_n);
  }
  t.p_value = std::min(1.0, 2.0 * tail);
  return t;
}

CtrRanker CtrRanker::fit(std::span<const Impression> log) {
  CtrRanker r;
  for (const auto& imp : log) {
    for (std::size_t i = 0; i < imp.size(); ++i) {
      auto& [clicks, shows] = r.counts_[pair_key(imp.query_id, imp.doc_ids[i])];
      clicks += imp.clicks[i] ? 1 : 0;
      ++shows;
    }
  }
  return r;
}

double CtrRanker::ctr(const std::string& query_id, const std::string& doc_id) const {
  const auto it = counts_.find(pair_key(query_id, doc_id));
  if (it == counts_.end()) return 0.0;
  return static_cast<double>(it->second.first) / static_cast<double>(it->second.second);
}

std::vector<double> CtrRanker::scores(const Impression& imp) const {
  std::vector<double> out;
  out.reserve(imp.size());
  for (const auto& d : imp.doc_ids) out.push_back(ctr(imp.query_id, d));
  return out;
}

ModelScores score_uniform(std::span<const Impression> log, double q) {
  ModelScores s{"uniform", {}, {}};
  for (const auto& imp : log) s.click.emplace_back(imp.size(), q);
  s.rank = s.click;
  return s;
}

ModelScores score_oracle(std::span<const Impression> log, const GroundTruth& truth) {
  ModelScores s{"oracle", {}, {}};
  for (const auto& imp : log) {
    std::vector<double> click, rel;
    for (std::size_t i = 0; i < imp.size(); ++i) {
      const auto r = truth.relevance(imp.query_id, imp.doc_ids[i]);
      if (!r) {
        throw ValidationError("no ground truth for query '" + imp.query_id + "' doc '" +
                              imp.doc_ids[i] + "'");
      }
      click.push_back(truth.exam_model.exam_prob(static_cast<int>(i) + 1) * *r);
      rel.push_back(*r);
    }
    s.click.push_back(std::move(click));
    s.rank.push_back(std::move(rel));
  }
  return s;
}

ModelScores score_ctr(const CtrRanker& ranker, std::span<const Impression> log) {
  ModelScores s{"ctr", {}, {}};
  for (const auto& imp : log) s.click.push_back(ranker.scores(imp));
  s.rank = s.click;
  return s;
}

ModelScores score_pgm(const pgm::PgmParams& params, std::span<const Impression> log) {
  ModelScores s{pgm::model_name(params), {}, {}};
  for (const auto& imp : log) {
    s.click.push_back(pgm::pgm_predict(params, imp));
    s.rank.push_back(pgm::pgm_rank_scores(params, imp));
  }
  return s;
}

ModelScores score_drlc(const drlc::Model& model, const Dataset& ds) {
  const drlc::Corpus corpus(ds, model.norm);
  return {"drlc", drlc::drlc_predict(model.nets, corpus, drlc::PredictMode::kClick, model.hp),
          drlc::drlc_predict(model.nets, corpus, drlc::PredictMode::kRank, model.hp)};
}

Report evaluate(const ModelScores& scores, std::span<const Impression> log,
                std::span<const int> ks, const std::string& dataset_name) {
  const auto clicks = clicks_of(log);
  Report r;
  r.model = scores.name;
  r.dataset = dataset_name;
  r.impressions = log.size();
  r.log_likelihood = log_likelihood(scores.click, clicks);
  const auto ppl = perplexity(scores.click, clicks);
  r.perplexity_overall = ppl.overall;
  r.perplexity_per_rank = ppl.per_rank;
  const auto nd = mean_ndcg(scores.rank, clicks, ks);
  r.ndcg = nd.mean;
  r.ndcg_skipped = nd.skipped;
  return r;
}

}  // namespace clickrl::eval
