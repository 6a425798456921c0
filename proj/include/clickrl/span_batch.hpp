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
#include <unordered_map>
#include <vector>

#include "clickrl/nn.hpp"

namespace clickrl::nn {

/// A batch whose inputs are [left part | zero gap | right part], with
/// repeated parts stored once. Every example names one left and one right
/// part by index. A layout with no left part and no gap holds right parts
/// only (the whole input).
///
/// Because the gap is at least as wide as the receptive field grows, each
/// activation map splits into a span depending only on the left part, a
/// constant run in the middle, and a span depending only on the right part,
/// so the cost scales with the number of distinct parts rather than the
/// number of examples. Results match forward()/backward() on the dense
/// inputs up to rounding.
struct KeyedBatch {
  struct Example {
    int left = -1;
    int right = 0;
    std::uint8_t target = 0;
  };

  int left_len = 0;
  int gap_len = 0;
  int right_len = 0;
  std::vector<std::vector<double>> left_parts;
  std::vector<std::vector<double>> right_parts;
  std::vector<Example> examples;

  int input_len() const { return left_len + gap_len + right_len; }
  /// The dense input of one example.
  Tensor dense(std::size_t example) const;
  std::vector<Tensor> dense() const;
  std::vector<std::uint8_t> targets() const;
};

/// Deduplicates parts by caller-supplied 64-bit keys.
class KeyedBatchBuilder {
 public:
  KeyedBatchBuilder(int left_len, int gap_len, int right_len);
  /// Layout for a network with the bias-network input shape.
  static KeyedBatchBuilder for_bias_network();
  static KeyedBatchBuilder for_debiased_network();

  int left(std::uint64_t key, std::span<const double> values);
  int right(std::uint64_t key, std::span<const double> values);
  void add(int left, int right, std::uint8_t target);

  std::size_t size() const { return batch_.examples.size(); }
  bool empty() const { return batch_.examples.empty(); }
  const KeyedBatch& batch() const { return batch_; }
  KeyedBatch take();
  void clear();

 private:
  KeyedBatch batch_;
  std::unordered_map<std::uint64_t, int> left_index_;
  std::unordered_map<std::uint64_t, int> right_index_;
};

/// Click probabilities with running statistics (infer mode).
std::vector<double> keyed_infer(const ValueNetwork& net, const KeyedBatch& batch);

/// Train-mode forward and backward on the batch targets. Updates the running
/// statistics exactly as forward(net, inputs, Mode::kTrain) does.
BackwardResult keyed_train_step(ValueNetwork& net, const KeyedBatch& batch);

}  // namespace clickrl::nn
