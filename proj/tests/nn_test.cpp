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

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "clickrl/error.hpp"
#include "clickrl/features.hpp"
#include "clickrl/nn.hpp"
#include "clickrl/span_batch.hpp"

namespace clickrl::nn {
namespace {

Architecture small_arch() {
  Architecture a;
  a.kind = NetKind::kCustom;
  a.input_len = 9;
  a.join_layers = 1;
  a.blocks = 2;
  a.channels = 3;
  a.kernel = 3;
  return a;
}

Tensor random_input(std::mt19937_64& rng, int len) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Tensor t;
  for (int i = 0; i < len; ++i) t.data.push_back(unit(rng));
  return t;
}

TEST(Architecture, PresetShapes) {
  const auto c1 = Architecture::bias_network();
  EXPECT_EQ(c1.input_len, 156);
  EXPECT_EQ(c1.join_layers, 2);
  EXPECT_EQ(c1.blocks, 3);
  EXPECT_EQ(c1.channels, 16);
  const auto c2 = Architecture::debiased_network();
  EXPECT_EQ(c2.input_len, 56);
  EXPECT_EQ(c2.join_layers, 0);
  ParamLayout lay(c2);
  // 3 convs (16*in*3 + 16), 3 norms (32), head 2*16*56 + 2
  EXPECT_EQ(lay.n_params, (16 * 3 + 16) + 2 * (16 * 16 * 3 + 16) + 3 * 32 + 2 * 16 * 56 + 2);
  EXPECT_EQ(lay.n_running, 3u * 32u);
}

TEST(Architecture, RejectsEvenKernel) {
  auto a = small_arch();
  a.kernel = 2;
  EXPECT_THROW(ValueNetwork::initialize(a, 1), ValidationError);
}

TEST(ValueNetwork, InitIsDeterministicAndOnFloatGrid) {
  const auto a = ValueNetwork::initialize(Architecture::debiased_network(), 5);
  const auto b = ValueNetwork::initialize(Architecture::debiased_network(), 5);
  ASSERT_EQ(a.param_count(), b.param_count());
  for (std::size_t i = 0; i < a.param_count(); ++i) {
    EXPECT_EQ(a.params()[i], b.params()[i]);
    EXPECT_EQ(a.params()[i], static_cast<double>(static_cast<float>(a.params()[i])));
  }
}

TEST(Forward, ProbabilitiesInOpenUnitInterval) {
  std::mt19937_64 rng(3);
  const auto net = ValueNetwork::initialize(small_arch(), 11);
  std::vector<Tensor> batch;
  for (int i = 0; i < 5; ++i) batch.push_back(random_input(rng, 9));
  const auto res = forward(net, batch);
  for (double p : res.click_prob) {
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
}

TEST(Forward, RejectsWrongLength) {
  const auto net = ValueNetwork::initialize(small_arch(), 1);
  std::vector<Tensor> batch{Tensor{std::vector<double>(8, 0.0)}};
  EXPECT_THROW(forward(net, batch), ValidationError);
}

TEST(BatchNorm, IdenticalInputsNormalizeToShift) {
  // With a single join-free block, identical values within a normalization
  // group have zero variance, so the normalized activation is exactly the
  // shift (beta = 0) and the output becomes input independent.
  Architecture a = small_arch();
  a.join_layers = 0;
  a.blocks = 1;
  a.input_len = 1;
  a.kernel = 1;
  auto net = ValueNetwork::initialize(a, 9);
  std::vector<Tensor> batch(4, Tensor{{0.37}});
  auto r1 = forward(net, batch, Mode::kTrain);
  std::vector<Tensor> other(4, Tensor{{0.91}});
  auto net2 = ValueNetwork::initialize(a, 9);
  auto r2 = forward(net2, other, Mode::kTrain);
  for (double x : r1.cache.xhat[0]) EXPECT_EQ(x, 0.0);
  EXPECT_EQ(r1.click_prob[0], r2.click_prob[0]);
}

TEST(BatchNorm, RunningStatsMoveTowardBatch) {
  std::mt19937_64 rng(4);
  auto net = ValueNetwork::initialize(small_arch(), 2);
  std::vector<Tensor> batch;
  for (int i = 0; i < 6; ++i) batch.push_back(random_input(rng, 9));
  const auto before = std::vector<double>(net.running().begin(), net.running().end());
  forward(net, batch, Mode::kTrain);
  EXPECT_NE(before, std::vector<double>(net.running().begin(), net.running().end()));
  const auto again = std::vector<double>(net.running().begin(), net.running().end());
  forward(net, batch, Mode::kInfer);
  EXPECT_EQ(again, std::vector<double>(net.running().begin(), net.running().end()));
}

TEST(Backward, RejectsInferAndStaleCaches) {
  std::mt19937_64 rng(5);
  auto net = ValueNetwork::initialize(small_arch(), 3);
  std::vector<Tensor> batch{random_input(rng, 9)};
  std::vector<std::uint8_t> tgt{1};
  auto inf = forward(net, batch, Mode::kInfer);
  EXPECT_THROW(backward(net, inf.cache, tgt), ValidationError);
  auto tr = forward(net, batch, Mode::kTrain);
  net.mutable_params()[0] += 0.0;
  EXPECT_THROW(backward(net, tr.cache, tgt), ValidationError);
}

TEST(Backward, LossMatchesTrainLoss) {
  std::mt19937_64 rng(6);
  auto net = ValueNetwork::initialize(small_arch(), 4);
  std::vector<Tensor> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(random_input(rng, 9));
  std::vector<std::uint8_t> tgt{1, 0, 0, 1};
  const double expected = train_loss(net, batch, tgt);
  auto fwd = forward(net, batch, Mode::kTrain);
  EXPECT_NEAR(backward(net, fwd.cache, tgt).loss, expected, 1e-12);
}

TEST(GradCheck, SmallNetworkBatch) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const auto net = ValueNetwork::initialize(small_arch(), rng());
    EXPECT_LT(grad_check(net, random_input(rng, 9), trial % 2, 1e-5), 1e-4) << trial;
  }
}

TEST(GradCheck, SuiteOfTwentyUnderBudget) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto trials = grad_check_suite(7, 20);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ASSERT_EQ(trials.size(), 20u);
  for (const auto& t : trials) EXPECT_LT(t.max_rel_err, 1e-4) << to_string(t.arch.kind);
  EXPECT_LT(secs, 120.0);
}

TEST(GradCheck, LinearHeadIsNearExact) {
  Architecture a;
  a.input_len = 12;
  a.join_layers = 0;
  a.blocks = 0;
  std::mt19937_64 rng(9);
  const auto net = ValueNetwork::initialize(a, 4);
  EXPECT_LT(grad_check(net, random_input(rng, 12), 1, 1e-5), 1e-7);
}

TEST(GradCheck, ErrorGrowsWithStep) {
  std::mt19937_64 rng(10);
  const auto net = ValueNetwork::initialize(Architecture::debiased_network(), 10);
  const auto input = random_input(rng, 56);
  EXPECT_GT(grad_check(net, input, 0, 1e-1), grad_check(net, input, 0, 1e-5));
}

TEST(Optimizer, PlainSgdStep) {
  OptConfig cfg;
  cfg.method = OptConfig::Method::kSgd;
  cfg.learning_rate = 0.1;
  std::vector<double> w{1.0, -2.0};
  std::vector<double> g{0.5, 1.0};
  std::vector<double> v(2, 0.0);
  sgd_update(w, g, v, cfg);
  EXPECT_DOUBLE_EQ(w[0], 0.95);
  EXPECT_DOUBLE_EQ(w[1], -2.1);
}

TEST(Optimizer, MomentumAccumulates) {
  OptConfig cfg;
  cfg.learning_rate = 1.0;
  cfg.momentum = 0.5;
  std::vector<double> w{0.0};
  std::vector<double> g{1.0};
  std::vector<double> v{0.0};
  sgd_update(w, g, v, cfg);
  sgd_update(w, g, v, cfg);
  EXPECT_DOUBLE_EQ(v[0], 1.5);
  EXPECT_DOUBLE_EQ(w[0], -2.5);
}

TEST(Optimizer, TwoMomentumStepsFromZero) {
  OptConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.momentum = 0.9;
  std::vector<double> w{0.0}, g{1.0}, v{0.0};
  sgd_update(w, g, v, cfg);
  sgd_update(w, g, v, cfg);
  EXPECT_NEAR(w[0], -0.29, 1e-15);
}

TEST(Optimizer, HundredStepsHalveLossOnSeparableBatch) {
  std::mt19937_64 rng(13);
  auto net = ValueNetwork::initialize(Architecture::debiased_network(), 13);
  std::vector<Tensor> batch;
  std::vector<std::uint8_t> tgt;
  for (int i = 0; i < 32; ++i) {
    const bool pos = i % 2 == 0;
    Tensor t = random_input(rng, 56);
    for (int j = 0; j < 8; ++j) t.data[j] = pos ? 0.8 + 0.2 * t.data[j] : 0.2 * t.data[j];
    batch.push_back(t);
    tgt.push_back(pos ? 1 : 0);
  }
  OptConfig cfg;
  cfg.learning_rate = 1e-2;
  Optimizer opt(cfg);
  const double before = train_loss(net, batch, tgt);
  for (int it = 0; it < 100; ++it) {
    auto fwd = forward(net, batch, Mode::kTrain);
    opt.step(net, backward(net, fwd.cache, tgt).grads);
  }
  EXPECT_LE(train_loss(net, batch, tgt), 0.5 * before);
}

TEST(Optimizer, RejectsBadConfig) {
  OptConfig cfg;
  cfg.learning_rate = -1.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = OptConfig{};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Optimizer, TrainingReducesLoss) {
  std::mt19937_64 rng(12);
  auto net = ValueNetwork::initialize(small_arch(), 12);
  std::vector<Tensor> batch;
  std::vector<std::uint8_t> tgt;
  for (int i = 0; i < 8; ++i) {
    batch.push_back(random_input(rng, 9));
    tgt.push_back(batch.back().data[4] > 0.5 ? 1 : 0);
  }
  OptConfig cfg;
  cfg.learning_rate = 0.05;
  Optimizer opt(cfg);
  const double before = train_loss(net, batch, tgt);
  for (int it = 0; it < 100; ++it) {
    auto fwd = forward(net, batch, Mode::kTrain);
    opt.step(net, backward(net, fwd.cache, tgt).grads);
  }
  EXPECT_LT(train_loss(net, batch, tgt), before);
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("clickrl_ckpt_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::filesystem::path dir_;
};

TEST_F(CheckpointTest, RoundTripIsExact) {
  std::mt19937_64 rng(1);
  auto net = ValueNetwork::initialize(Architecture::bias_network(), 21);
  std::vector<Tensor> batch{random_input(rng, 156), random_input(rng, 156)};
  forward(net, batch, Mode::kTrain);
  save_checkpoint(net, path("a.ckpt"));
  const auto back = load_checkpoint(path("a.ckpt"), NetKind::kBias);
  EXPECT_EQ(back.arch(), net.arch());
  EXPECT_TRUE(std::equal(net.params().begin(), net.params().end(), back.params().begin()));
  EXPECT_TRUE(std::equal(net.running().begin(), net.running().end(), back.running().begin()));
  save_checkpoint(back, path("b.ckpt"));
  std::ifstream a(path("a.ckpt"), std::ios::binary), b(path("b.ckpt"), std::ios::binary);
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}),
            std::string(std::istreambuf_iterator<char>(b), {}));
}

TEST_F(CheckpointTest, RejectsWrongKind) {
  save_checkpoint(ValueNetwork::initialize(Architecture::debiased_network(), 1), path("c2.ckpt"));
  EXPECT_THROW(load_checkpoint(path("c2.ckpt"), NetKind::kBias), FormatError);
}

TEST_F(CheckpointTest, RejectsTruncationAndBadMagic) {
  save_checkpoint(ValueNetwork::initialize(Architecture::debiased_network(), 1), path("c2.ckpt"));
  const auto size = std::filesystem::file_size(path("c2.ckpt"));
  std::filesystem::resize_file(path("c2.ckpt"), size - 3);
  EXPECT_THROW(load_checkpoint(path("c2.ckpt")), FormatError);
  std::ofstream(path("junk.ckpt")) << "NOTACHECKPOINT";
  EXPECT_THROW(load_checkpoint(path("junk.ckpt")), FormatError);
}

// --- Keyed batch engine against the dense reference ---

struct KeyedCase {
  KeyedBatch batch;
};

KeyedBatch random_bias_batch(std::mt19937_64& rng, int examples, int lefts, int rights) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto builder = KeyedBatchBuilder::for_bias_network();
  std::vector<std::vector<double>> L, R;
  for (int i = 0; i < lefts; ++i) {
    std::vector<double> v(bias_layout::kInformative);
    for (auto& x : v) x = unit(rng) < 0.3 ? 1.0 : 0.0;
    L.push_back(v);
  }
  for (int i = 0; i < rights; ++i) {
    std::vector<double> v(kDocFeatureDim);
    for (auto& x : v) x = unit(rng);
    R.push_back(v);
  }
  for (int e = 0; e < examples; ++e) {
    const int li = static_cast<int>(rng() % lefts);
    const int ri = static_cast<int>(rng() % rights);
    builder.add(builder.left(li, L[li]), builder.right(ri, R[ri]), unit(rng) < 0.4 ? 1 : 0);
  }
  return builder.take();
}

KeyedBatch random_doc_batch(std::mt19937_64& rng, int examples, int rights) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto builder = KeyedBatchBuilder::for_debiased_network();
  std::vector<std::vector<double>> R;
  for (int i = 0; i < rights; ++i) {
    std::vector<double> v(kDocFeatureDim);
    for (auto& x : v) x = unit(rng);
    R.push_back(v);
  }
  for (int e = 0; e < examples; ++e) {
    const int ri = static_cast<int>(rng() % rights);
    builder.add(-1, builder.right(ri, R[ri]), unit(rng) < 0.4 ? 1 : 0);
  }
  return builder.take();
}

void expect_engine_matches(const Architecture& arch, const KeyedBatch& batch, std::uint64_t seed) {
  auto ref = ValueNetwork::initialize(arch, seed);
  // Nontrivial normalization parameters and running statistics.
  {
    std::mt19937_64 rng(seed + 1);
    std::uniform_real_distribution<double> jitter(-0.2, 0.2);
    auto p = ref.mutable_params();
    for (const auto& n : ref.layout().norms) {
      for (int c = 0; c < n.channels; ++c) {
        p[n.gamma + c] += jitter(rng);
        p[n.beta + c] += jitter(rng);
      }
    }
    auto r = ref.mutable_running();
    for (auto& v : r) v += 0.5 * std::abs(jitter(rng));
    ref.round_to_storage();
  }
  auto fast = ref;
  const auto dense = batch.dense();
  const auto targets = batch.targets();

  const auto ref_inf = forward(ref, dense).click_prob;
  const auto fast_inf = keyed_infer(fast, batch);
  ASSERT_EQ(ref_inf.size(), fast_inf.size());
  for (std::size_t i = 0; i < ref_inf.size(); ++i) EXPECT_NEAR(ref_inf[i], fast_inf[i], 1e-10);

  auto fwd = forward(ref, dense, Mode::kTrain);
  const auto ref_bwd = backward(ref, fwd.cache, targets);
  const auto fast_bwd = keyed_train_step(fast, batch);
  EXPECT_NEAR(ref_bwd.loss, fast_bwd.loss, 1e-10);
  double worst = 0.0;
  for (std::size_t i = 0; i < ref_bwd.grads.values.size(); ++i) {
    worst = std::max(worst, std::abs(ref_bwd.grads.values[i] - fast_bwd.grads.values[i]));
  }
  EXPECT_LT(worst, 1e-10);
  for (std::size_t i = 0; i < ref.running().size(); ++i) {
    EXPECT_EQ(ref.running()[i], fast.running()[i]) << i;
  }
}

TEST(KeyedEngine, MatchesReferenceOnBiasNetwork) {
  std::mt19937_64 rng(31);
  expect_engine_matches(Architecture::bias_network(), random_bias_batch(rng, 40, 7, 9), 77);
}

TEST(KeyedEngine, MatchesReferenceWithHeavyDuplication) {
  std::mt19937_64 rng(32);
  expect_engine_matches(Architecture::bias_network(), random_bias_batch(rng, 60, 2, 3), 78);
}

TEST(KeyedEngine, MatchesReferenceOnDebiasedNetwork) {
  std::mt19937_64 rng(33);
  expect_engine_matches(Architecture::debiased_network(), random_doc_batch(rng, 30, 6), 79);
}

TEST(KeyedEngine, SingleExample) {
  std::mt19937_64 rng(34);
  expect_engine_matches(Architecture::bias_network(), random_bias_batch(rng, 1, 1, 1), 80);
}

TEST(KeyedEngine, RejectsNarrowGap) {
  KeyedBatchBuilder builder(10, 4, 5);
  std::vector<double> l(10, 1.0), r(5, 0.5);
  builder.add(builder.left(0, l), builder.right(0, r), 1);
  Architecture a = small_arch();
  a.input_len = 19;
  const auto net = ValueNetwork::initialize(a, 1);
  EXPECT_THROW(keyed_infer(net, builder.batch()), ValidationError);
}

TEST(KeyedEngine, BuilderDeduplicates) {
  auto builder = KeyedBatchBuilder::for_debiased_network();
  std::vector<double> r(kDocFeatureDim, 0.1);
  EXPECT_EQ(builder.right(5, r), 0);
  EXPECT_EQ(builder.right(9, r), 1);
  EXPECT_EQ(builder.right(5, r), 0);
  EXPECT_EQ(builder.batch().right_parts.size(), 2u);
}

}  // namespace
}  // namespace clickrl::nn
