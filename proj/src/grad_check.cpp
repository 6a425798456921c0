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
#include <random>

#include "clickrl/features.hpp"
#include "clickrl/nn.hpp"

namespace clickrl::nn {

double grad_check(const ValueNetwork& net, const Tensor& input, std::uint8_t target, double eps) {
  ValueNetwork work = net;
  const std::span<const Tensor> batch(&input, 1);
  const std::span<const std::uint8_t> tgt(&target, 1);

  auto fwd = forward(work, batch, Mode::kTrain);
  const auto analytic = backward(work, fwd.cache, tgt).grads.values;

  std::vector<bool> base;
  train_loss(work, batch, tgt, &base);
  std::vector<bool> up_active, down_active;

  auto params = work.mutable_params();
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = params[i];
    double h = eps;
    double numeric = 0.0;
    for (int shrink = 0;; ++shrink, h /= 10.0) {
      params[i] = orig + h;
      const double up = train_loss(work, batch, tgt, &up_active);
      params[i] = orig - h;
      const double down = train_loss(work, batch, tgt, &down_active);
      params[i] = orig;
      numeric = (up - down) / (2.0 * h);
      if ((up_active == base && down_active == base) || shrink == kMaxStepShrinks) break;
    }
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

std::vector<GradCheckTrial> grad_check_suite(std::uint64_t seed, int trials, double eps) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<GradCheckTrial> out;
  for (int t = 0; t < trials; ++t) {
    const auto arch = t % 2 == 0 ? Architecture::debiased_network() : Architecture::bias_network();
    auto net = ValueNetwork::initialize(arch, rng());
    {
      std::uniform_real_distribution<double> shift(-0.2, 0.2);
      auto p = net.mutable_params();
      for (const auto& c : net.layout().convs) {
        for (int o = 0; o < c.out_ch; ++o) p[c.bias + o] = shift(rng);
      }
      for (const auto& n : net.layout().norms) {
        for (int o = 0; o < n.channels; ++o) {
          p[n.gamma + o] += shift(rng);
          p[n.beta + o] = shift(rng);
        }
      }
      p[net.layout().head_bias] = shift(rng);
      p[net.layout().head_bias + 1] = shift(rng);
      net.round_to_storage();
    }
    Tensor input;
    input.data.resize(arch.input_len);
    const std::size_t doc_offset = arch.kind == NetKind::kBias ? kBiasFeatureDim : 0;
    for (std::size_t i = 0; i < input.data.size(); ++i) {
      if (i < doc_offset) {
        input.data[i] = i < bias_layout::kInformative && unit(rng) < 0.3 ? 1.0 : 0.0;
      } else {
        input.data[i] = unit(rng);
      }
    }
    const std::uint8_t target = unit(rng) < 0.5 ? 1 : 0;
    out.push_back({arch, grad_check(net, input, target, eps)});
  }
  return out;
}

}  // namespace clickrl::nn
