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

#include "clickrl/error.hpp"
#include "clickrl/nn.hpp"

namespace clickrl::nn {

void OptConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must be in [0,1)");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(weight_decay >= 0.0)) throw ValidationError("weight_decay must be >= 0");
}

void sgd_update(std::span<double> weights, std::span<const double> grads,
                std::span<double> velocity, const OptConfig& cfg) {
  if (grads.size() != weights.size() || velocity.size() != weights.size()) {
    throw ValidationError("sgd_update: size mismatch");
  }
  const double lr = cfg.learning_rate;
  const double wd = cfg.weight_decay;
  if (cfg.method == OptConfig::Method::kSgd) {
    for (std::size_t i = 0; i < weights.size(); ++i) {
      weights[i] -= lr * (grads[i] + wd * weights[i]);
    }
    return;
  }
  const double mu = cfg.momentum;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    velocity[i] = mu * velocity[i] + grads[i] + wd * weights[i];
    weights[i] -= lr * velocity[i];
  }
}

void Optimizer::step(ValueNetwork& net, const Gradients& grads) {
  if (grads.values.size() != net.param_count()) {
    throw ValidationError("optimizer: gradient layout does not match network");
  }
  if (velocity_.size() != net.param_count()) velocity_.assign(net.param_count(), 0.0);
  sgd_update(net.mutable_params(), grads.values, velocity_, cfg_);
  net.round_to_storage();
}

}  // namespace clickrl::nn
