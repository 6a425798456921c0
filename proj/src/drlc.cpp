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

#include "clickrl/drlc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "clickrl/error.hpp"
#include "clickrl/eval.hpp"
#include "clickrl/span_batch.hpp"

namespace clickrl::drlc {
namespace {

using nn::KeyedBatchBuilder;
using nn::ValueNetwork;

// Bound on impressions evaluated in one keyed batch when predicting.
constexpr std::size_t kInferChunk = 2048;

std::uint64_t mix(std::uint64_t x, std::uint64_t salt) {
  x += 0x9e3779b97f4a7c15ULL * (salt + 1);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::array<double, bias_layout::kInformative> informative_values(const BiasFeatures& b) {
  std::array<double, bias_layout::kInformative> v{};
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = b[i] ? 1.0 : 0.0;
  return v;
}

void add_bias_example(KeyedBatchBuilder& builder, const BiasFeatures& b, int row,
                      const Corpus& corpus, std::uint8_t target) {
  const auto left = informative_values(b);
  const int l = builder.left(b.key(), left);
  const int r = builder.right(static_cast<std::uint64_t>(row), corpus.doc(row).values);
  builder.add(l, r, target);
}

void add_doc_example(KeyedBatchBuilder& builder, int row, const Corpus& corpus,
                     std::uint8_t target) {
  const int r = builder.right(static_cast<std::uint64_t>(row), corpus.doc(row).values);
  builder.add(-1, r, target);
}

ObservationLabel choose_label(bool clicked, double c1, double c2, const Hyper& hp,
                              std::mt19937_64& rng) {
  auto label = label_position(clicked, c1, c2, hp);
  if (!clicked && hp.epsilon > 0.0 && unit(rng) < hp.epsilon) {
    label = (rng() & 1U) ? ObservationLabel::kObservedNoClick : ObservationLabel::kUnobservedNoClick;
  }
  return label;
}

void begin_episode(Episode& ep, int T) {
  ep.final_state.labels.assign(static_cast<std::size_t>(T), ObservationLabel::kUnobservedNoClick);
  ep.final_state.window_start = 1;
  ep.final_state.cursor = 1;
  ep.costs.reserve(T);
  ep.c1.reserve(T);
  ep.c2.reserve(T);
  ep.window_starts.reserve(T);
}

void finish_step(Episode& ep, int t, bool clicked, double c1, double c2, const Hyper& hp,
                 std::mt19937_64& rng) {
  auto& st = ep.final_state;
  const int T = static_cast<int>(st.labels.size());
  const auto label = choose_label(clicked, c1, c2, hp, rng);
  st.labels[t - 1] = label;
  const double cost = reward(clicked, c1, c2, is_observed(label), hp);
  ep.costs.push_back(cost);
  ep.c1.push_back(c1);
  ep.c2.push_back(c2);
  ep.return_value += std::pow(hp.discount, t - 1) * cost;
  st.cursor = t;
  st.window_start = next_window_start(st.window_start, t, T, hp.window_size);
}

double checked_step(ValueNetwork& net, nn::Optimizer& opt, const nn::KeyedBatch& batch,
                    const char* which) {
  auto res = nn::keyed_train_step(net, batch);
  if (!std::isfinite(res.loss)) {
    throw DivergenceError(std::string(which) + ": non-finite training loss");
  }
  opt.step(net, res.grads);
  return res.loss;
}

/// Item order for one epoch: query blocks shuffled, impressions inside a
/// block kept together so batches share documents and states.
std::vector<std::size_t> epoch_order(const Corpus& corpus, std::uint64_t seed) {
  std::vector<std::size_t> blocks(corpus.blocks().size());
  std::iota(blocks.begin(), blocks.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = blocks.size(); i > 1; --i) {
    std::swap(blocks[i - 1], blocks[rng() % i]);
  }
  std::vector<std::size_t> order;
  order.reserve(corpus.size());
  for (auto b : blocks) {
    const auto [lo, hi] = corpus.blocks()[b];
    for (auto i = lo; i < hi; ++i) order.push_back(i);
  }
  return order;
}

std::vector<std::size_t> all_items(const Corpus& corpus) {
  std::vector<std::size_t> v(corpus.size());
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

double mean_return(const std::vector<Episode>& eps) {
  double s = 0.0;
  for (const auto& e : eps) s += e.return_value;
  return eps.empty() ? 0.0 : s / static_cast<double>(eps.size());
}

}  // namespace

void Hyper::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ValidationError("beta must be >= 0");
  if (!(theta > 0.0 && theta < 1.0)) throw ValidationError("theta must be in (0,1)");
  if (window_size < 1 || window_size > static_cast<int>(kMaxPositions)) {
    throw ValidationError("window_size must be in [1, 10]");
  }
  if (!(discount > 0.0 && discount <= 1.0)) throw ValidationError("discount must be in (0,1]");
  if (epochs < 0) throw ValidationError("epochs must be >= 0");
  if (pretrain_epochs < 0) throw ValidationError("pretrain_epochs must be >= 0");
  if (patience < 1) throw ValidationError("patience must be >= 1");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ValidationError("epsilon must be in [0,1]");
  opt.validate();
}

ObservationLabel label_position(bool clicked, double c1, double c2, const Hyper& hp) {
  if (clicked) return ObservationLabel::kObservedClick;
  const double ratio = c1 / std::max(c2, kRatioFloor);
  return ratio < hp.theta ? ObservationLabel::kUnobservedNoClick
                          : ObservationLabel::kObservedNoClick;
}

double reward(bool clicked, double c1, double c2, bool observed, const Hyper& hp) {
  const double c = clicked ? 1.0 : 0.0;
  const double a = c - c1;
  if (!observed) return a * a;
  const double b = c - c2;
  return a * a + hp.beta * b * b;
}

int next_window_start(int window_start, int t, int T, int window_size) {
  return (t == window_start + window_size - 1 && t < T) ? window_start + 1 : window_start;
}

BiasFeatures step_bias(std::span<const ObservationLabel> labels, int window_start, int t,
                       int window_size) {
  std::vector<ObservationLabel> masked(labels.begin(), labels.end());
  for (std::size_t p = static_cast<std::size_t>(std::max(t - 1, 0)); p < masked.size(); ++p) {
    masked[p] = ObservationLabel::kUnobservedNoClick;
  }
  return encode_bias(masked, window_start, t, window_size);
}

nn::Tensor bias_input(const BiasFeatures& b, const DocFeatures& d) {
  nn::Tensor x;
  x.data.reserve(kBiasFeatureDim + kDocFeatureDim);
  for (std::size_t i = 0; i < kBiasFeatureDim; ++i) x.data.push_back(b[i] ? 1.0 : 0.0);
  x.data.insert(x.data.end(), d.values.begin(), d.values.end());
  return x;
}

nn::Tensor doc_input(const DocFeatures& d) {
  return nn::Tensor{std::vector<double>(d.values.begin(), d.values.end())};
}

Episode run_episode(const ValueNetwork& c1, const ValueNetwork& c2, const EpisodeInput& in,
                    const Hyper& hp) {
  const int T = static_cast<int>(in.docs.size());
  if (in.clicks.size() != in.docs.size()) {
    throw ValidationError("run_episode: clicks and documents differ in length");
  }
  if (T < 1 || T > static_cast<int>(kMaxPositions)) {
    throw ValidationError("run_episode: impression length outside [1, 10]");
  }
  std::mt19937_64 rng(hp.seed);
  Episode ep;
  begin_episode(ep, T);
  for (int t = 1; t <= T; ++t) {
    const int ws = ep.final_state.window_start;
    ep.window_starts.push_back(ws);
    const auto b = encode_bias(ep.final_state.labels, ws, t, hp.window_size);
    const auto& d = in.docs[t - 1];
    const double p1 = nn::click_probability(c1, bias_input(b, d));
    const double p2 = nn::click_probability(c2, doc_input(d));
    finish_step(ep, t, in.clicks[t - 1] != 0, p1, p2, hp, rng);
  }
  return ep;
}

Corpus::Corpus(const Dataset& ds, const MinMaxNormalizer& norm) {
  docs_.reserve(ds.features.size());
  for (std::size_t i = 0; i < ds.features.size(); ++i) docs_.push_back(norm.apply(ds.features.at(i)));
  items_.reserve(ds.impressions.size());
  for (const auto& imp : ds.impressions) {
    validate(imp);
    Item item;
    item.clicks = imp.clicks;
    for (const auto& d : imp.doc_ids) {
      const auto row = ds.features.index_of(imp.query_id, d);
      if (!row) {
        throw ValidationError("missing features for query '" + imp.query_id + "' doc '" + d + "'");
      }
      item.docs.push_back(static_cast<int>(*row));
    }
    if (blocks_.empty() || ds.impressions[blocks_.back().first].query_id != imp.query_id) {
      blocks_.emplace_back(items_.size(), items_.size() + 1);
    } else {
      blocks_.back().second = items_.size() + 1;
    }
    items_.push_back(std::move(item));
  }
}

std::vector<Episode> run_episodes(const ValueNetwork& c1, const ValueNetwork& c2,
                                  const Corpus& corpus, std::span<const std::size_t> items,
                                  const Hyper& hp, std::uint64_t episode_seed) {
  std::vector<Episode> eps(items.size());
  if (items.empty()) return eps;
  std::mt19937_64 rng(mix(hp.seed, episode_seed));

  // C2 does not depend on the state, so every position is scored up front.
  auto b2 = KeyedBatchBuilder::for_debiased_network();
  int max_t = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = corpus.items()[items[i]];
    begin_episode(eps[i], static_cast<int>(item.docs.size()));
    max_t = std::max(max_t, static_cast<int>(item.docs.size()));
    for (int row : item.docs) add_doc_example(b2, row, corpus, 0);
  }
  const auto p2 = nn::keyed_infer(c2, b2.batch());

  std::vector<std::size_t> offset(items.size());
  for (std::size_t i = 0, o = 0; i < items.size(); ++i) {
    offset[i] = o;
    o += corpus.items()[items[i]].docs.size();
  }

  auto b1 = KeyedBatchBuilder::for_bias_network();
  std::vector<std::size_t> active;
  for (int t = 1; t <= max_t; ++t) {
    b1.clear();
    active.clear();
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto& item = corpus.items()[items[i]];
      if (static_cast<int>(item.docs.size()) < t) continue;
      auto& st = eps[i].final_state;
      eps[i].window_starts.push_back(st.window_start);
      const auto b = encode_bias(st.labels, st.window_start, t, hp.window_size);
      add_bias_example(b1, b, item.docs[t - 1], corpus, 0);
      active.push_back(i);
    }
    const auto p1 = nn::keyed_infer(c1, b1.batch());
    for (std::size_t j = 0; j < active.size(); ++j) {
      const auto i = active[j];
      const auto& item = corpus.items()[items[i]];
      finish_step(eps[i], t, item.clicks[t - 1] != 0, p1[j], p2[offset[i] + t - 1], hp, rng);
    }
  }
  return eps;
}

int c2_pretrain_limit(std::span<const std::uint8_t> clicks, bool inclusive) {
  int last = 0;
  for (std::size_t r = 0; r < clicks.size(); ++r) {
    if (clicks[r]) last = static_cast<int>(r) + 1;
  }
  return inclusive ? last : std::max(last - 1, 0);
}

BiasFeatures pretrain_state(std::span<const std::uint8_t> clicks, int t, int window_size) {
  const int T = static_cast<int>(clicks.size());
  std::vector<ObservationLabel> labels(clicks.size(), ObservationLabel::kUnobservedNoClick);
  int ws = 1;
  for (int p = 1; p < t && p <= T; ++p) {
    labels[p - 1] = clicks[p - 1] ? ObservationLabel::kObservedClick
                                  : ObservationLabel::kObservedNoClick;
    ws = next_window_start(ws, p, T, window_size);
  }
  return encode_bias(labels, ws, t, window_size);
}

Networks pretrain(const Corpus& train, const Hyper& hp) {
  hp.validate();
  if (train.size() == 0) throw ValidationError("pretrain: empty training set");
  Networks nets{ValueNetwork::initialize(nn::Architecture::bias_network(), mix(hp.seed, 1)),
                ValueNetwork::initialize(nn::Architecture::debiased_network(), mix(hp.seed, 2))};

  // Positions that train C2: before the last click (or through it).
  std::vector<int> c2_limit(train.size(), 0);
  std::size_t c2_total = 0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    c2_limit[i] = c2_pretrain_limit(train.items()[i].clicks, hp.inclusive_last_click);
    c2_total += static_cast<std::size_t>(c2_limit[i]);
  }
  if (c2_total == 0) {
    throw ValidationError("pretrain: no positions before a last click; cannot pretrain C2");
  }

  nn::Optimizer opt1(hp.opt);
  nn::Optimizer opt2(hp.opt);
  auto b1 = KeyedBatchBuilder::for_bias_network();
  auto b2 = KeyedBatchBuilder::for_debiased_network();
  for (int epoch = 0; epoch < hp.pretrain_epochs; ++epoch) {
    const auto order = epoch_order(train, mix(hp.seed, 100 + epoch));
    for (std::size_t lo = 0; lo < order.size(); lo += hp.opt.batch_size) {
      const auto hi = std::min(order.size(), lo + hp.opt.batch_size);
      b1.clear();
      b2.clear();
      for (auto k = lo; k < hi; ++k) {
        const auto i = order[k];
        const auto& item = train.items()[i];
        const int T = static_cast<int>(item.docs.size());
        for (int t = 1; t <= T; ++t) {
          add_bias_example(b1, pretrain_state(item.clicks, t, hp.window_size), item.docs[t - 1],
                           train, item.clicks[t - 1]);
        }
        for (int t = 1; t <= c2_limit[i]; ++t) {
          add_doc_example(b2, item.docs[t - 1], train, item.clicks[t - 1]);
        }
      }
      checked_step(nets.c1, opt1, b1.batch(), "pretrain C1");
      if (!b2.empty()) checked_step(nets.c2, opt2, b2.batch(), "pretrain C2");
    }
  }
  return nets;
}

Networks train(Networks nets, const Corpus& train_set, const Corpus& valid, const Hyper& hp,
               History* history) {
  hp.validate();
  if (train_set.size() == 0) throw ValidationError("train: empty training set");
  if (valid.size() == 0) throw ValidationError("train: empty validation set");

  History h;
  const auto everything = all_items(train_set);
  double best_ll = click_log_likelihood(nets, valid, hp);
  h.epochs.push_back({0, mean_return(run_episodes(nets.c1, nets.c2, train_set, everything, hp, 0)),
                      best_ll});
  Networks best = nets;
  int stale = 0;

  nn::Optimizer opt1(hp.opt);
  nn::Optimizer opt2(hp.opt);
  auto b1 = KeyedBatchBuilder::for_bias_network();
  auto b2 = KeyedBatchBuilder::for_debiased_network();
  for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
    const auto order = epoch_order(train_set, mix(hp.seed, 1000 + epoch));
    double cost_sum = 0.0;
    for (std::size_t lo = 0; lo < order.size(); lo += hp.opt.batch_size) {
      const auto hi = std::min(order.size(), lo + hp.opt.batch_size);
      const std::span<const std::size_t> batch(order.data() + lo, hi - lo);
      const auto eps = run_episodes(nets.c1, nets.c2, train_set, batch, hp,
                                    (static_cast<std::uint64_t>(epoch) << 32) + lo);
      b1.clear();
      b2.clear();
      for (std::size_t j = 0; j < batch.size(); ++j) {
        const auto& item = train_set.items()[batch[j]];
        const auto& ep = eps[j];
        cost_sum += ep.return_value;
        const auto& labels = ep.final_state.labels;
        const int T = static_cast<int>(labels.size());
        for (int t = 1; t <= T; ++t) {
          const auto b = step_bias(labels, ep.window_starts[t - 1], t, hp.window_size);
          add_bias_example(b1, b, item.docs[t - 1], train_set, item.clicks[t - 1]);
          if (is_observed(labels[t - 1])) {
            add_doc_example(b2, item.docs[t - 1], train_set, item.clicks[t - 1]);
          }
        }
      }
      checked_step(nets.c1, opt1, b1.batch(), "train C1");
      if (!b2.empty()) checked_step(nets.c2, opt2, b2.batch(), "train C2");
    }
    const double ll = click_log_likelihood(nets, valid, hp);
    h.epochs.push_back({epoch, cost_sum / static_cast<double>(order.size()), ll});
    if (ll > best_ll) {
      best_ll = ll;
      best = nets;
      h.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= hp.patience) {
      h.early_stopped = true;
      break;
    }
  }
  if (history) *history = std::move(h);
  return best;
}

std::vector<double> drlc_predict(const Networks& nets, const EpisodeInput& in, PredictMode mode,
                                 const Hyper& hp) {
  if (mode == PredictMode::kClick) return run_episode(nets.c1, nets.c2, in, hp).c1;
  std::vector<double> out;
  out.reserve(in.docs.size());
  for (const auto& d : in.docs) out.push_back(nn::click_probability(nets.c2, doc_input(d)));
  return out;
}

std::vector<std::vector<double>> drlc_predict(const Networks& nets, const Corpus& corpus,
                                              PredictMode mode, const Hyper& hp) {
  std::vector<std::vector<double>> out;
  out.reserve(corpus.size());
  const auto everything = all_items(corpus);
  for (std::size_t lo = 0; lo < everything.size(); lo += kInferChunk) {
    const auto hi = std::min(everything.size(), lo + kInferChunk);
    const std::span<const std::size_t> chunk(everything.data() + lo, hi - lo);
    if (mode == PredictMode::kClick) {
      for (auto& ep : run_episodes(nets.c1, nets.c2, corpus, chunk, hp, 0)) {
        out.push_back(std::move(ep.c1));
      }
      continue;
    }
    auto b2 = KeyedBatchBuilder::for_debiased_network();
    for (auto i : chunk) {
      for (int row : corpus.items()[i].docs) add_doc_example(b2, row, corpus, 0);
    }
    const auto p = nn::keyed_infer(nets.c2, b2.batch());
    std::size_t k = 0;
    for (auto i : chunk) {
      const auto n = corpus.items()[i].docs.size();
      out.emplace_back(p.begin() + static_cast<std::ptrdiff_t>(k),
                       p.begin() + static_cast<std::ptrdiff_t>(k + n));
      k += n;
    }
  }
  return out;
}

double click_log_likelihood(const Networks& nets, const Corpus& corpus, const Hyper& hp) {
  eval::ClickBits clicks;
  clicks.reserve(corpus.size());
  for (const auto& item : corpus.items()) clicks.push_back(item.clicks);
  return eval::log_likelihood(drlc_predict(nets, corpus, PredictMode::kClick, hp), clicks);
}

Model fit(const Dataset& train_ds, const Dataset& valid_ds, const Hyper& hp, History* history) {
  hp.validate();
  train_ds.require_features();
  valid_ds.require_features();
  std::vector<std::size_t> rows;
  for (const auto& imp : train_ds.impressions) {
    for (const auto& d : imp.doc_ids) rows.push_back(*train_ds.features.index_of(imp.query_id, d));
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  Model m{{ValueNetwork(nn::Architecture::bias_network()),
           ValueNetwork(nn::Architecture::debiased_network())},
          hp,
          MinMaxNormalizer::fit(train_ds.features, rows)};
  const Corpus train_c(train_ds, m.norm);
  const Corpus valid_c(valid_ds, m.norm);
  m.nets = train(pretrain(train_c, hp), train_c, valid_c, hp, history);
  return m;
}

}  // namespace clickrl::drlc
