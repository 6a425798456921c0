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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "clickrl/clicklog.hpp"
#include "clickrl/features.hpp"
#include "clickrl/nn.hpp"

namespace clickrl::drlc {

inline constexpr double kRatioFloor = 1e-6;

struct Hyper {
  double beta = 0.7;
  double theta = 0.3;
  int window_size = kDefaultWindowSize;
  double discount = 1.0;
  int epochs = 20;
  int pretrain_epochs = 2;
  int patience = 3;
  /// Probability of replacing the greedy label of an unclicked position by a
  /// uniformly random one (0 = greedy).
  double epsilon = 0.0;
  /// Pretrain C2 on positions up to and including the last click.
  bool inclusive_last_click = false;
  /// batch_size counts impressions.
  nn::OptConfig opt{nn::OptConfig::Method::kSgdMomentum, 1e-3, 0.9, 64, 0.0};
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpisodeState {
  std::vector<ObservationLabel> labels;  // size T; unvisited ranks are UnobservedNoClick
  int window_start = 1;
  int cursor = 1;
};

ObservationLabel label_position(bool clicked, double c1, double c2, const Hyper& hp);

/// (C - c1)^2 + beta * O * (C - c2)^2, minimized.
double reward(bool clicked, double c1, double c2, bool observed, const Hyper& hp);

/// Window start after labeling `t`: slides by one once every member of the
/// window has been visited, never past the last full window.
int next_window_start(int window_start, int t, int T, int window_size);

struct Episode {
  EpisodeState final_state;
  std::vector<double> costs;
  std::vector<double> c1;  // estimates at labeling time
  std::vector<double> c2;
  std::vector<int> window_starts;  // window start used for the state at each step
  double return_value = 0.0;
};

/// One impression's documents (already normalized) and logged clicks.
struct EpisodeInput {
  std::span<const DocFeatures> docs;
  std::span<const std::uint8_t> clicks;
};

/// Greedy episode with the reference network evaluation.
Episode run_episode(const nn::ValueNetwork& c1, const nn::ValueNetwork& c2, const EpisodeInput& in,
                    const Hyper& hp);

/// The state vector C1 sees at step t: labels before t, positions from t on
/// unvisited.
BiasFeatures step_bias(std::span<const ObservationLabel> labels, int window_start, int t,
                       int window_size);

/// Concatenated network input [B | D].
nn::Tensor bias_input(const BiasFeatures& b, const DocFeatures& d);
nn::Tensor doc_input(const DocFeatures& d);

/// Impressions with document rows resolved against a normalized feature table.
class Corpus {
 public:
  struct Item {
    std::vector<int> docs;  // row per rank
    std::vector<std::uint8_t> clicks;
  };

  /// Throws ValidationError if any (query, doc) lacks features.
  Corpus(const Dataset& ds, const MinMaxNormalizer& norm);

  const std::vector<Item>& items() const { return items_; }
  const DocFeatures& doc(int row) const { return docs_[row]; }
  std::size_t size() const { return items_.size(); }
  /// Consecutive items sharing a query id, as [begin, end) index pairs.
  const std::vector<std::pair<std::size_t, std::size_t>>& blocks() const { return blocks_; }

 private:
  std::vector<DocFeatures> docs_;
  std::vector<Item> items_;
  std::vector<std::pair<std::size_t, std::size_t>> blocks_;
};

/// Episodes for many impressions with frozen networks, evaluated step by step
/// in deduplicated batches. With epsilon = 0 this matches run_episode up to
/// rounding.
std::vector<Episode> run_episodes(const nn::ValueNetwork& c1, const nn::ValueNetwork& c2,
                                  const Corpus& corpus, std::span<const std::size_t> items,
                                  const Hyper& hp, std::uint64_t episode_seed = 0);

struct Networks {
  nn::ValueNetwork c1;
  nn::ValueNetwork c2;
};

struct EpochRecord {
  int epoch = 0;  // 0 = after pretraining
  double mean_cost = 0.0;  // mean episode return over the epoch
  double valid_ll = 0.0;   // mean per-position log-likelihood of C1 click predictions
};

struct History {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  bool early_stopped = false;
};

/// Number of leading ranks that pretrain C2: those before the last click,
/// or through it when `inclusive`. 0 for a clickless impression.
int c2_pretrain_limit(std::span<const std::uint8_t> clicks, bool inclusive);

/// C1's pretraining state at step t: every earlier rank observed with its
/// logged click, the window slid as in an episode.
BiasFeatures pretrain_state(std::span<const std::uint8_t> clicks, int t, int window_size);

/// Sequential-window pretraining of both networks. Throws ValidationError if
/// no impression has a click (no C2 training data).
Networks pretrain(const Corpus& train, const Hyper& hp);

/// Alternating episode/update epochs from pretrained networks; returns the
/// networks with the best validation likelihood (possibly the pretrained
/// ones). Throws DivergenceError on a non-finite loss.
Networks train(Networks nets, const Corpus& train, const Corpus& valid, const Hyper& hp,
               History* history = nullptr);

enum class PredictMode { kClick, kRank };

/// Click mode: C1 estimates along the teacher-forced episode. Rank mode: C2.
std::vector<double> drlc_predict(const Networks& nets, const EpisodeInput& in, PredictMode mode,
                                 const Hyper& hp);
std::vector<std::vector<double>> drlc_predict(const Networks& nets, const Corpus& corpus,
                                              PredictMode mode, const Hyper& hp);

/// Mean per-position log-likelihood of click-mode predictions.
double click_log_likelihood(const Networks& nets, const Corpus& corpus, const Hyper& hp);

/// Trained model bundle: networks, hyper-parameters and feature scaling.
struct Model {
  Networks nets;
  Hyper hp;
  MinMaxNormalizer norm;
};

/// Fits the normalizer on the training split, pretrains and trains.
Model fit(const Dataset& train, const Dataset& valid, const Hyper& hp, History* history = nullptr);

/// Directory with manifest.json, c1.ckpt, c2.ckpt and norm.tsv.
void save_model(const Model& m, const std::string& dir, const std::string& config_hash);
Model load_model(const std::string& dir);

}  // namespace clickrl::drlc
