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

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "clickrl/clicklog.hpp"
#include "clickrl/drlc.hpp"
#include "clickrl/pgm.hpp"

namespace clickrl::eval {

inline constexpr double kProbClamp = 1e-10;

/// One vector per impression, one entry per rank.
using Predictions = std::vector<std::vector<double>>;
using ClickBits = std::vector<std::vector<std::uint8_t>>;

ClickBits clicks_of(std::span<const Impression> log);

/// Clamps into [kProbClamp, 1 - kProbClamp].
double clamp_prob(double q);

/// Mean over (impression, rank) of ln q or ln(1 - q). Throws ValidationError
/// on a shape mismatch or an empty log.
double log_likelihood(const Predictions& preds, const ClickBits& clicks);

struct Perplexity {
  std::vector<double> per_rank;     // entry r-1 for rank r; 0 where unseen
  std::vector<std::size_t> counts;  // impressions reaching each rank
  double overall = 0.0;             // mean over ranks with counts > 0
};

Perplexity perplexity(const Predictions& preds, const ClickBits& clicks);

/// Graded NDCG@k: ranks by descending score, ties by original rank. Returns
/// 0 when the ideal gain is 0.
double ndcg_at_k(std::span<const double> scores, std::span<const double> gains, std::size_t k);
double ndcg_at_k(std::span<const double> scores, std::span<const std::uint8_t> clicks,
                 std::size_t k);

struct NdcgSummary {
  std::map<int, double> mean;  // k -> mean over impressions with a click
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  // clickless impressions
};

NdcgSummary mean_ndcg(const Predictions& scores, const ClickBits& clicks, std::span<const int> ks);

/// Spearman rank correlation with average ranks for ties. Throws
/// ValidationError for fewer than two points or mismatched sizes.
double spearman(std::span<const double> x, std::span<const double> y);

/// Paired two-sided sign test on per-item metric values (higher = better for
/// `a` when a > b). Ties are dropped.
struct SignTest {
  std::size_t wins = 0;
  std::size_t losses = 0;
  std::size_t ties = 0;
  double p_value = 1.0;
};

SignTest sign_test(std::span<const double> a, std::span<const double> b);

// --- Predictors -----------------------------------------------------------------

/// Ranks documents by their empirical click-through rate in a training log.
/// Unseen pairs score 0; as click predictor it returns the same rates.
class CtrRanker {
 public:
  static CtrRanker fit(std::span<const Impression> log);
  double ctr(const std::string& query_id, const std::string& doc_id) const;
  std::vector<double> scores(const Impression& imp) const;

 private:
  std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> counts_;  // clicks, shows
};

/// Per-impression outputs of a model: click probabilities and ranking scores.
struct ModelScores {
  std::string name;
  Predictions click;
  Predictions rank;
};

ModelScores score_uniform(std::span<const Impression> log, double q = 0.5);
/// exam_prob(rank) x relevance of the generating simulator. Throws
/// ValidationError for pairs missing from the ground truth.
ModelScores score_oracle(std::span<const Impression> log, const GroundTruth& truth);
ModelScores score_ctr(const CtrRanker& ranker, std::span<const Impression> log);
ModelScores score_pgm(const pgm::PgmParams& params, std::span<const Impression> log);
/// Click mode for click probabilities, rank mode for ranking scores.
ModelScores score_drlc(const drlc::Model& model, const Dataset& ds);

// --- Reports --------------------------------------------------------------------

struct Report {
  std::string model;
  std::string dataset;
  double log_likelihood = 0.0;
  double perplexity_overall = 0.0;
  std::vector<double> perplexity_per_rank;
  std::map<int, double> ndcg;
  std::size_t impressions = 0;
  std::size_t ndcg_skipped = 0;
  /// Provenance such as seed and config hash; no wall-clock values so reruns
  /// are byte-identical.
  std::map<std::string, std::string> metadata;
};

Report evaluate(const ModelScores& scores, std::span<const Impression> log,
                std::span<const int> ks, const std::string& dataset_name);

std::string to_json(const Report& r);
Report report_from_json(const std::string& text);
std::string csv_header(std::span<const int> ks, std::size_t ranks);
std::string csv_row(const Report& r, std::span<const int> ks, std::size_t ranks);

/// Perplexity ascending, ties by model name.
void sort_for_compare(std::vector<Report>& reports);
/// Aligned text table: model, perplexity, log-likelihood, NDCG@k columns.
std::string render_table(const std::vector<Report>& reports, std::span<const int> ks);

}  // namespace clickrl::eval
