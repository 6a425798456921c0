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
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "clickrl/clicklog.hpp"

namespace clickrl::pgm {

inline constexpr double kUnseenPrior = 0.1;
inline constexpr double kInitValue = 0.5;
inline constexpr double kDefaultPersevere = 0.9;

/// (query_id, doc_id) -> probability, ordered for stable serialization.
using PairMap = std::map<std::pair<std::string, std::string>, double>;

double lookup(const PairMap& m, const std::string& query_id, const std::string& doc_id,
              double fallback);

/// Dependent click model.
struct DcmParams {
  PairMap attractiveness;
  std::vector<double> lambda;  // continuation after a click, per rank
  double prior = kUnseenPrior;
};

/// User browsing model. exam[r-1][r'] is the examination probability at rank
/// r when the previous click was at rank r' (0 = none).
struct UbmParams {
  PairMap alpha;
  std::vector<std::vector<double>> exam;
  double prior = kUnseenPrior;
};

/// Dynamic Bayesian network with fixed perseverance.
struct DbnParams {
  PairMap attract;
  PairMap satisfy;
  double persevere = kDefaultPersevere;
  double prior = kUnseenPrior;
};

using PgmParams = std::variant<DcmParams, UbmParams, DbnParams>;

std::string model_name(const PgmParams& p);

struct DcmOptions {
  double prior = kUnseenPrior;
  std::size_t max_positions = kMaxPositions;
};

/// Closed-form counting estimator.
DcmParams train_dcm(std::span<const Impression> log, const DcmOptions& opts = {});

/// With a nonempty `valid` log, EM keeps the parameters with the best
/// validation log-likelihood and stops after `patience` iterations without
/// improvement.
struct EmStopping {
  std::span<const Impression> valid;
  int patience = 3;
};

struct UbmOptions {
  double prior = kUnseenPrior;
  std::size_t max_positions = kMaxPositions;
  EmStopping stopping;
};

struct EmResult {
  PgmParams params;
  /// Full-data log-likelihood (sum over impressions) after each M-step.
  std::vector<double> ll_trace;
  /// 1-based iteration whose parameters were returned.
  int best_iteration = 0;
};

EmResult train_ubm(std::span<const Impression> log, int iters, const UbmOptions& opts = {});

struct DbnOptions {
  double persevere = kDefaultPersevere;
  double prior = kUnseenPrior;
  EmStopping stopping;
};

/// Exact EM: attractiveness is latent at every rank, satisfaction at every
/// clicked rank; perseverance stays fixed.
EmResult train_dbn(std::span<const Impression> log, int iters, const DbnOptions& opts = {});

/// Per-rank click probabilities conditioned on the logged clicks above.
std::vector<double> pgm_predict(const PgmParams& params, const Impression& imp);

/// Relevance scores for ranking: DCM/UBM attractiveness, DBN attract x satisfy.
std::vector<double> pgm_rank_scores(const PgmParams& params, const Impression& imp);

/// Sum of log click probabilities under teacher forcing (the likelihood EM
/// maximizes).
double log_likelihood(const PgmParams& params, std::span<const Impression> log);

/// TSV: "#model\t<name>\titerations\t<n>" header, scalar rows, then
/// "<table>\t<query>\t<doc>\t<value>" rows. Values round-trip exactly; later
/// lines starting with # are comments.
void write_params(std::ostream& out, const PgmParams& params, int iterations);
PgmParams read_params(std::istream& in, int* iterations = nullptr);

}  // namespace clickrl::pgm
