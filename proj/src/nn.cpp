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

#include "clickrl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "clickrl/error.hpp"
#include "clickrl/features.hpp"

namespace clickrl::nn {

std::string to_string(NetKind kind) {
  switch (kind) {
    case NetKind::kBias: return "bias";
    case NetKind::kDebiased: return "debiased";
    case NetKind::kCustom: return "custom";
  }
  return "unknown";
}

Architecture Architecture::bias_network() {
  return {NetKind::kBias, static_cast<int>(kBiasFeatureDim + kDocFeatureDim), 2, 3, 16, 3};
}

Architecture Architecture::debiased_network() {
  return {NetKind::kDebiased, static_cast<int>(kDocFeatureDim), 0, 3, 16, 3};
}

void Architecture::validate() const {
  if (input_len < 1) throw ValidationError("architecture: input length must be >= 1");
  if (join_layers < 0 || blocks < 0) throw ValidationError("architecture: negative layer count");
  if (channels < 1) throw ValidationError("architecture: channels must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw ValidationError("architecture: kernel must be odd");
}

ParamLayout::ParamLayout(const Architecture& arch) {
  arch.validate();
  std::size_t off = 0;
  std::size_t run = 0;
  int in_ch = 1;
  for (int l = 0; l < arch.conv_layers(); ++l) {
    Conv c;
    c.in_ch = in_ch;
    c.out_ch = arch.channels;
    c.weight = off;
    off += static_cast<std::size_t>(c.out_ch) * c.in_ch * arch.kernel;
    c.bias = off;
    off += c.out_ch;
    if (l >= arch.join_layers) {
      Norm n;
      n.channels = c.out_ch;
      n.gamma = off;
      off += n.channels;
      n.beta = off;
      off += n.channels;
      n.running_mean = run;
      run += n.channels;
      n.running_var = run;
      run += n.channels;
      c.bn = static_cast<int>(norms.size());
      norms.push_back(n);
    }
    convs.push_back(c);
    in_ch = arch.channels;
  }
  head_in = static_cast<std::size_t>(in_ch) * arch.input_len;
  head_weight = off;
  off += 2 * head_in;
  head_bias = off;
  off += 2;
  n_params = off;
  n_running = run;
}

ValueNetwork::ValueNetwork(const Architecture& arch)
    : arch_(arch), layout_(arch), params_(layout_.n_params, 0.0),
      running_(layout_.n_running, 0.0) {
  for (const auto& n : layout_.norms) {
    std::fill_n(running_.begin() + n.running_var, n.channels, 1.0);
  }
}

ValueNetwork ValueNetwork::initialize(const Architecture& arch, std::uint64_t seed) {
  ValueNetwork net(arch);
  std::mt19937_64 rng(seed);
  auto fill_uniform = [&](std::size_t off, std::size_t count, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < count; ++i) net.params_[off + i] = dist(rng);
  };
  for (const auto& c : net.layout_.convs) {
    fill_uniform(c.weight, static_cast<std::size_t>(c.out_ch) * c.in_ch * arch.kernel,
                 static_cast<double>(c.in_ch * arch.kernel));
  }
  for (const auto& n : net.layout_.norms) {
    std::fill_n(net.params_.begin() + n.gamma, n.channels, 1.0);
  }
  fill_uniform(net.layout_.head_weight, 2 * net.layout_.head_in,
               static_cast<double>(net.layout_.head_in));
  net.round_to_storage();
  return net;
}

std::span<double> ValueNetwork::mutable_params() {
  ++version_;
  return params_;
}

std::span<double> ValueNetwork::mutable_running() {
  ++version_;
  return running_;
}

void ValueNetwork::round_to_storage() {
  for (auto& v : params_) v = static_cast<double>(static_cast<float>(v));
  for (auto& v : running_) v = static_cast<double>(static_cast<float>(v));
  ++version_;
}

namespace {

struct RunningUpdate {
  std::vector<std::vector<double>> mean;  // per norm layer
  std::vector<std::vector<double>> var;
};

void check_inputs(const ValueNetwork& net, std::span<const Tensor> inputs) {
  if (inputs.empty()) throw ValidationError("forward: empty batch");
  for (const auto& t : inputs) {
    if (static_cast<int>(t.data.size()) != net.arch().input_len) {
      throw ValidationError("forward: input length " + std::to_string(t.data.size()) +
                            " does not match network input " +
                            std::to_string(net.arch().input_len));
    }
  }
}

ForwardResult forward_impl(const ValueNetwork& net, std::span<const Tensor> inputs, Mode mode,
                           RunningUpdate* stats) {
  check_inputs(net, inputs);
  const auto& arch = net.arch();
  const auto& lay = net.layout();
  const auto p = net.params();
  const auto run = net.running();
  const std::size_t N = inputs.size();
  const int L = arch.input_len;
  const int K = arch.kernel;
  const int P = K / 2;

  ForwardResult res;
  auto& cache = res.cache;
  cache.mode = mode;
  cache.batch = N;
  cache.net = &net;

  std::vector<double> cur(N * L);
  for (std::size_t n = 0; n < N; ++n) std::copy(inputs[n].data.begin(), inputs[n].data.end(), cur.begin() + n * L);
  int cur_ch = 1;

  for (const auto& conv : lay.convs) {
    cache.layer_in.push_back(cur);
    const int C = conv.out_ch;
    // Under batch statistics the bias cancels; it is folded into the mean.
    const bool fold_bias = conv.bn >= 0 && mode == Mode::kTrain;
    std::vector<double> y(N * C * L);
    for (std::size_t n = 0; n < N; ++n) {
      for (int o = 0; o < C; ++o) {
        double* out = &y[(n * C + o) * L];
        const double b0 = fold_bias ? 0.0 : p[conv.bias + o];
        for (int q = 0; q < L; ++q) out[q] = b0;
        for (int c = 0; c < cur_ch; ++c) {
          const double* in = &cur[(n * cur_ch + c) * L];
          for (int j = 0; j < K; ++j) {
            const double w = p[conv.weight + (static_cast<std::size_t>(o) * cur_ch + c) * K + j];
            const int lo = std::max(0, P - j);
            const int hi = std::min(L, L + P - j);
            const int shift = j - P;
            for (int q = lo; q < hi; ++q) out[q] += w * in[q + shift];
          }
        }
      }
    }
    std::vector<double> xhat;
    std::vector<double> inv_std;
    if (conv.bn >= 0) {
      const auto& bn = lay.norms[conv.bn];
      xhat.resize(y.size());
      inv_std.resize(C);
      std::vector<double> mean(C, 0.0), var(C, 0.0);
      if (mode == Mode::kTrain) {
        const double M = static_cast<double>(N) * L;
        for (int o = 0; o < C; ++o) {
          double s = 0.0;
          for (std::size_t n = 0; n < N; ++n) {
            for (int q = 0; q < L; ++q) s += y[(n * C + o) * L + q];
          }
          mean[o] = s / M;
          double v = 0.0;
          for (std::size_t n = 0; n < N; ++n) {
            for (int q = 0; q < L; ++q) {
              const double d = y[(n * C + o) * L + q] - mean[o];
              v += d * d;
            }
          }
          var[o] = v / M;
        }
        if (stats) {
          std::vector<double> shifted = mean;
          for (int o = 0; o < C; ++o) shifted[o] += p[conv.bias + o];
          stats->mean.push_back(std::move(shifted));
          stats->var.push_back(var);
        }
      } else {
        for (int o = 0; o < C; ++o) {
          mean[o] = run[bn.running_mean + o];
          var[o] = run[bn.running_var + o];
        }
      }
      for (int o = 0; o < C; ++o) {
        inv_std[o] = 1.0 / std::sqrt(var[o] + kBatchNormEps);
        const double g = p[bn.gamma + o];
        const double b = p[bn.beta + o];
        for (std::size_t n = 0; n < N; ++n) {
          for (int q = 0; q < L; ++q) {
            const std::size_t i = (n * C + o) * L + q;
            xhat[i] = (y[i] - mean[o]) * inv_std[o];
            y[i] = g * xhat[i] + b;
          }
        }
      }
    }
    for (auto& v : y) v = v > 0.0 ? v : 0.0;
    cache.xhat.push_back(std::move(xhat));
    cache.inv_std.push_back(std::move(inv_std));
    cache.post.push_back(y);
    cur = std::move(y);
    cur_ch = C;
  }

  const std::size_t H = lay.head_in;
  cache.head_in = cur;
  cache.logits.resize(N * 2);
  cache.probs.resize(N * 2);
  res.click_prob.resize(N);
  for (std::size_t n = 0; n < N; ++n) {
    double z[2];
    for (int o = 0; o < 2; ++o) {
      double s = p[lay.head_bias + o];
      const double* w = &p[lay.head_weight + o * H];
      const double* h = &cur[n * H];
      for (std::size_t i = 0; i < H; ++i) s += w[i] * h[i];
      if (!std::isfinite(s)) throw DivergenceError("non-finite logit in forward pass");
      cache.logits[n * 2 + o] = s;
      z[o] = std::clamp(s, -kLogitClamp, kLogitClamp);
    }
    const double m = std::max(z[0], z[1]);
    const double e0 = std::exp(z[0] - m);
    const double e1 = std::exp(z[1] - m);
    cache.probs[n * 2 + 0] = e0 / (e0 + e1);
    cache.probs[n * 2 + 1] = e1 / (e0 + e1);
    res.click_prob[n] = cache.probs[n * 2 + kClickClass];
  }
  cache.version = net.version();
  return res;
}

}  // namespace

ForwardResult forward(ValueNetwork& net, std::span<const Tensor> inputs, Mode mode) {
  if (mode == Mode::kInfer) {
    auto res = forward_impl(net, inputs, mode, nullptr);
    res.cache.version = net.version();
    return res;
  }
  RunningUpdate stats;
  auto res = forward_impl(net, inputs, mode, &stats);
  auto run = net.mutable_running();
  const auto& norms = net.layout().norms;
  for (std::size_t b = 0; b < norms.size(); ++b) {
    for (int o = 0; o < norms[b].channels; ++o) {
      double& rm = run[norms[b].running_mean + o];
      double& rv = run[norms[b].running_var + o];
      rm = kBatchNormMomentum * rm + (1.0 - kBatchNormMomentum) * stats.mean[b][o];
      rv = kBatchNormMomentum * rv + (1.0 - kBatchNormMomentum) * stats.var[b][o];
    }
  }
  net.round_to_storage();
  res.cache.version = net.version();
  return res;
}

ForwardResult forward(const ValueNetwork& net, std::span<const Tensor> inputs) {
  return forward_impl(net, inputs, Mode::kInfer, nullptr);
}

double click_probability(const ValueNetwork& net, const Tensor& input) {
  return forward(net, std::span<const Tensor>(&input, 1)).click_prob[0];
}

BackwardResult backward(const ValueNetwork& net, const ForwardCache& cache,
                        std::span<const std::uint8_t> targets) {
  if (cache.mode != Mode::kTrain) throw ValidationError("backward: cache is not from train mode");
  if (cache.net != &net || cache.version != net.version()) {
    throw ValidationError("backward: stale cache (network changed since forward)");
  }
  if (targets.size() != cache.batch) throw ValidationError("backward: target count mismatch");

  const auto& arch = net.arch();
  const auto& lay = net.layout();
  const auto p = net.params();
  const std::size_t N = cache.batch;
  const int L = arch.input_len;
  const int K = arch.kernel;
  const int P = K / 2;
  const std::size_t H = lay.head_in;

  BackwardResult out;
  auto& g = out.grads.values;
  g.assign(lay.n_params, 0.0);

  std::vector<double> dh(N * H, 0.0);
  double loss = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    const int y = targets[n] ? 1 : 0;
    loss -= std::log(cache.probs[n * 2 + y]);
    for (int o = 0; o < 2; ++o) {
      const double z = cache.logits[n * 2 + o];
      double dz = (cache.probs[n * 2 + o] - (o == y ? 1.0 : 0.0)) / static_cast<double>(N);
      if (std::abs(z) >= kLogitClamp) dz = 0.0;
      g[lay.head_bias + o] += dz;
      const double* h = &cache.head_in[n * H];
      const double* w = &p[lay.head_weight + o * H];
      double* gw = &g[lay.head_weight + o * H];
      double* d = &dh[n * H];
      for (std::size_t i = 0; i < H; ++i) {
        gw[i] += dz * h[i];
        d[i] += dz * w[i];
      }
    }
  }
  out.loss = loss / static_cast<double>(N);

  std::vector<double> dcur = std::move(dh);
  for (int l = static_cast<int>(lay.convs.size()) - 1; l >= 0; --l) {
    const auto& conv = lay.convs[l];
    const int C = conv.out_ch;
    const int Cin = conv.in_ch;
    const auto& post = cache.post[l];
    for (std::size_t i = 0; i < dcur.size(); ++i) {
      if (!(post[i] > 0.0)) dcur[i] = 0.0;
    }
    if (conv.bn >= 0) {
      const auto& bn = lay.norms[conv.bn];
      const auto& xhat = cache.xhat[l];
      const auto& inv_std = cache.inv_std[l];
      const double M = static_cast<double>(N) * L;
      for (int o = 0; o < C; ++o) {
        double sum_d = 0.0, sum_dx = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
          for (int q = 0; q < L; ++q) {
            const std::size_t i = (n * C + o) * L + q;
            sum_d += dcur[i];
            sum_dx += dcur[i] * xhat[i];
          }
        }
        g[bn.gamma + o] += sum_dx;
        g[bn.beta + o] += sum_d;
        const double scale = p[bn.gamma + o] * inv_std[o];
        for (std::size_t n = 0; n < N; ++n) {
          for (int q = 0; q < L; ++q) {
            const std::size_t i = (n * C + o) * L + q;
            dcur[i] = scale * (dcur[i] - sum_d / M - xhat[i] * sum_dx / M);
          }
        }
      }
    }
    const auto& in = cache.layer_in[l];
    std::vector<double> din(l > 0 ? N * Cin * L : 0, 0.0);
    for (std::size_t n = 0; n < N; ++n) {
      for (int o = 0; o < C; ++o) {
        const double* dy = &dcur[(n * C + o) * L];
        if (conv.bn < 0) {
          for (int q = 0; q < L; ++q) g[conv.bias + o] += dy[q];
        }
        for (int c = 0; c < Cin; ++c) {
          const double* x = &in[(n * Cin + c) * L];
          for (int j = 0; j < K; ++j) {
            const std::size_t wi = conv.weight + (static_cast<std::size_t>(o) * Cin + c) * K + j;
            const int lo = std::max(0, P - j);
            const int hi = std::min(L, L + P - j);
            const int shift = j - P;
            double acc = 0.0;
            for (int q = lo; q < hi; ++q) acc += dy[q] * x[q + shift];
            g[wi] += acc;
            if (l > 0) {
              const double w = p[wi];
              double* dx = &din[(n * Cin + c) * L];
              for (int q = lo; q < hi; ++q) dx[q + shift] += w * dy[q];
            }
          }
        }
      }
    }
    dcur = std::move(din);
  }
  return out;
}

double train_loss(const ValueNetwork& net, std::span<const Tensor> inputs,
                  std::span<const std::uint8_t> targets, std::vector<bool>* active) {
  auto res = forward_impl(net, inputs, Mode::kTrain, nullptr);
  if (active) {
    active->clear();
    for (const auto& layer : res.cache.post) {
      for (double v : layer) active->push_back(v > 0.0);
    }
  }
  double loss = 0.0;
  for (std::size_t n = 0; n < inputs.size(); ++n) {
    loss -= std::log(res.cache.probs[n * 2 + (targets[n] ? 1 : 0)]);
  }
  return loss / static_cast<double>(inputs.size());
}

}  // namespace clickrl::nn
