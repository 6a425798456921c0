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
#include <span>
#include <string>
#include <vector>

namespace clickrl::nn {

enum class NetKind : std::uint8_t {
  kBias = 1,      // click estimate given observation state and document
  kDebiased = 2,  // click estimate from the document alone
  kCustom = 3,    // test and diagnostic shapes
};

std::string to_string(NetKind kind);

enum class Mode { kTrain, kInfer };

/// Layer stack: `join_layers` x {conv, ReLU}, then `blocks` x {conv, batch
/// norm, ReLU}, then a dense layer to two logits over the flattened
/// channels x length activations. Convolutions are single-stride with zero
/// padding that preserves the length.
struct Architecture {
  NetKind kind = NetKind::kCustom;
  int input_len = 0;
  int join_layers = 0;
  int blocks = 0;
  int channels = 16;
  int kernel = 3;

  static Architecture bias_network();      // 100 + 56 inputs, 2 join layers, 3 blocks
  static Architecture debiased_network();  // 56 inputs, 3 blocks

  int conv_layers() const { return join_layers + blocks; }
  void validate() const;
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

inline constexpr int kClickClass = 1;
inline constexpr double kLogitClamp = 50.0;
inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

/// Offsets of every tensor inside the flat parameter / running-stat arrays.
struct ParamLayout {
  struct Conv {
    std::size_t weight = 0;  // [out][in][kernel]
    std::size_t bias = 0;    // [out]
    int in_ch = 0;
    int out_ch = 0;
    int bn = -1;  // index into `norms`, -1 for join layers
  };
  struct Norm {
    std::size_t gamma = 0;
    std::size_t beta = 0;
    std::size_t running_mean = 0;  // offsets into the running array
    std::size_t running_var = 0;
    int channels = 0;
  };
  std::vector<Conv> convs;
  std::vector<Norm> norms;
  std::size_t head_weight = 0;  // [2][head_in], head_in = channels * input_len
  std::size_t head_bias = 0;
  std::size_t head_in = 0;
  std::size_t n_params = 0;
  std::size_t n_running = 0;

  explicit ParamLayout(const Architecture& arch);
  ParamLayout() = default;
};

/// Parameters and batch-norm running statistics of one value network.
/// Values are held in double for arithmetic but kept on the float32 grid
/// (see round_to_storage) so checkpoints reproduce them exactly.
class ValueNetwork {
 public:
  explicit ValueNetwork(const Architecture& arch);

  /// Fan-in-scaled uniform weights, zero biases, unit scale / zero shift.
  static ValueNetwork initialize(const Architecture& arch, std::uint64_t seed);

  const Architecture& arch() const { return arch_; }
  NetKind kind() const { return arch_.kind; }
  const ParamLayout& layout() const { return layout_; }

  std::span<const double> params() const { return params_; }
  std::span<const double> running() const { return running_; }
  /// Mutable access bumps the version, invalidating outstanding caches.
  std::span<double> mutable_params();
  std::span<double> mutable_running();

  std::size_t param_count() const { return params_.size(); }
  std::uint64_t version() const { return version_; }

  /// Rounds every parameter and running statistic to the nearest float32.
  void round_to_storage();

 private:
  Architecture arch_;
  ParamLayout layout_;
  std::vector<double> params_;
  std::vector<double> running_;
  std::uint64_t version_ = 0;
};

/// Gradients share the parameter layout.
struct Gradients {
  std::vector<double> values;
};

/// Single-channel input signal.
struct Tensor {
  std::vector<double> data;
};

/// Activations kept by a forward pass for the matching backward pass.
struct ForwardCache {
  Mode mode = Mode::kInfer;
  std::size_t batch = 0;
  const ValueNetwork* net = nullptr;
  std::uint64_t version = 0;
  std::vector<std::vector<double>> layer_in;  // input of each conv layer, N x C x L
  std::vector<std::vector<double>> xhat;      // normalized pre-activations (blocks)
  std::vector<std::vector<double>> inv_std;   // per channel (blocks)
  std::vector<std::vector<double>> post;      // ReLU output of each conv layer
  std::vector<double> head_in;                // N x head_in
  std::vector<double> logits;                 // N x 2 (before clamping)
  std::vector<double> probs;                  // N x 2
};

struct ForwardResult {
  std::vector<double> click_prob;
  ForwardCache cache;
};

struct BackwardResult {
  Gradients grads;
  double loss = 0.0;  // mean cross-entropy over the batch
};

/// Straightforward per-element evaluation of a batch. Train mode normalizes
/// with batch statistics (per channel over samples and positions) and updates
/// the running statistics; infer mode uses the running statistics.
/// Throws ValidationError on shape mismatch and DivergenceError on non-finite
/// activations.
ForwardResult forward(ValueNetwork& net, std::span<const Tensor> inputs, Mode mode);
/// Infer-mode convenience that leaves the network untouched.
ForwardResult forward(const ValueNetwork& net, std::span<const Tensor> inputs);
double click_probability(const ValueNetwork& net, const Tensor& input);

/// Cross-entropy gradients for a train-mode cache. Throws ValidationError for
/// an infer-mode or stale cache.
BackwardResult backward(const ValueNetwork& net, const ForwardCache& cache,
                        std::span<const std::uint8_t> targets);

/// Loss only, with batch statistics and without touching running stats.
/// `active`, when given, receives the on/off pattern of every ReLU unit.
double train_loss(const ValueNetwork& net, std::span<const Tensor> inputs,
                  std::span<const std::uint8_t> targets, std::vector<bool>* active = nullptr);

// --- Optimizer ----------------------------------------------------------------

struct OptConfig {
  enum class Method { kSgd, kSgdMomentum };
  Method method = Method::kSgdMomentum;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  std::size_t batch_size = 64;
  double weight_decay = 0.0;

  void validate() const;
};

/// Plain or heavy-ball SGD: v <- mu v + (g + wd w); w <- w - lr v.
class Optimizer {
 public:
  explicit Optimizer(OptConfig cfg) : cfg_(cfg) { cfg_.validate(); }
  void step(ValueNetwork& net, const Gradients& grads);
  const OptConfig& config() const { return cfg_; }

 private:
  OptConfig cfg_;
  std::vector<double> velocity_;
};

/// One raw update step on bare values (exposed for testing the update rule).
void sgd_update(std::span<double> weights, std::span<const double> grads,
                std::span<double> velocity, const OptConfig& cfg);

// --- Gradient check -------------------------------------------------------------

/// max over parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
/// with numeric = central difference of the train-mode loss at step eps.
/// Where a +-eps step switches a ReLU unit, the step is divided by 10 (at
/// most kMaxStepShrinks times) so the difference stays on one linear piece.
double grad_check(const ValueNetwork& net, const Tensor& input, std::uint8_t target, double eps);

inline constexpr int kMaxStepShrinks = 3;

struct GradCheckTrial {
  Architecture arch;
  double max_rel_err = 0.0;
};

/// Runs `trials` random (network, input, target) triples, alternating the two
/// standard shapes; deterministic per seed.
std::vector<GradCheckTrial> grad_check_suite(std::uint64_t seed, int trials, double eps = 1e-5);

// --- Checkpoints ------------------------------------------------------------------

/// Binary layout: magic "DCLK1", u32 version, u8 kind, architecture as i32s,
/// then per array a u32 rank, u32 dims and float32 little-endian values.
void save_checkpoint(const ValueNetwork& net, const std::string& path);
ValueNetwork load_checkpoint(const std::string& path);
/// Also checks the stored kind; throws FormatError on mismatch.
ValueNetwork load_checkpoint(const std::string& path, NetKind expected);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace clickrl::nn
