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

#include "clickrl/span_batch.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "clickrl/error.hpp"
#include "clickrl/features.hpp"

namespace clickrl::nn {

Tensor KeyedBatch::dense(std::size_t example) const {
  const auto& ex = examples.at(example);
  Tensor t;
  t.data.assign(input_len(), 0.0);
  if (left_len > 0) {
    const auto& l = left_parts.at(ex.left);
    std::copy(l.begin(), l.end(), t.data.begin());
  }
  const auto& r = right_parts.at(ex.right);
  std::copy(r.begin(), r.end(), t.data.begin() + left_len + gap_len);
  return t;
}

std::vector<Tensor> KeyedBatch::dense() const {
  std::vector<Tensor> out;
  out.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) out.push_back(dense(i));
  return out;
}

std::vector<std::uint8_t> KeyedBatch::targets() const {
  std::vector<std::uint8_t> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.target);
  return out;
}

KeyedBatchBuilder::KeyedBatchBuilder(int left_len, int gap_len, int right_len) {
  batch_.left_len = left_len;
  batch_.gap_len = gap_len;
  batch_.right_len = right_len;
}

KeyedBatchBuilder KeyedBatchBuilder::for_bias_network() {
  return {static_cast<int>(bias_layout::kInformative),
          static_cast<int>(kBiasFeatureDim - bias_layout::kInformative),
          static_cast<int>(kDocFeatureDim)};
}

KeyedBatchBuilder KeyedBatchBuilder::for_debiased_network() {
  return {0, 0, static_cast<int>(kDocFeatureDim)};
}

int KeyedBatchBuilder::left(std::uint64_t key, std::span<const double> values) {
  auto [it, fresh] = left_index_.try_emplace(key, static_cast<int>(batch_.left_parts.size()));
  if (fresh) batch_.left_parts.emplace_back(values.begin(), values.end());
  return it->second;
}

int KeyedBatchBuilder::right(std::uint64_t key, std::span<const double> values) {
  auto [it, fresh] = right_index_.try_emplace(key, static_cast<int>(batch_.right_parts.size()));
  if (fresh) batch_.right_parts.emplace_back(values.begin(), values.end());
  return it->second;
}

void KeyedBatchBuilder::add(int left, int right, std::uint8_t target) {
  batch_.examples.push_back({left, right, target});
}

KeyedBatch KeyedBatchBuilder::take() {
  KeyedBatch out = std::move(batch_);
  batch_ = KeyedBatch{};
  batch_.left_len = out.left_len;
  batch_.gap_len = out.gap_len;
  batch_.right_len = out.right_len;
  left_index_.clear();
  right_index_.clear();
  return out;
}

void KeyedBatchBuilder::clear() { take(); }

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using ConstMap = Eigen::Map<const Mat>;

constexpr int kLeft = 0;
constexpr int kRight = 1;

struct LayerState {
  std::array<Mat, 2> col;
  std::array<Mat, 2> xhat;
  std::array<Mat, 2> post;
  Vec mid_in;
  Vec mid_xhat;
  Vec mid_post;
  Vec inv_std;
};

class Engine {
 public:
  Engine(const ValueNetwork& net, const KeyedBatch& b) : net_(net), b_(b) {
    const auto& arch = net.arch();
    L_ = arch.input_len;
    K_ = arch.kernel;
    P_ = K_ / 2;
    depth_ = arch.conv_layers();
    C_ = arch.channels;
    N_ = b.examples.size();
    split_ = b.left_len > 0;
    if (b.input_len() != L_) {
      throw ValidationError("keyed batch: input length " + std::to_string(b.input_len()) +
                            " does not match network input " + std::to_string(L_));
    }
    if (N_ == 0) throw ValidationError("keyed batch: no examples");
    if (!split_ && b.gap_len != 0) throw ValidationError("keyed batch: gap without left part");
    if (split_ && b.gap_len < 2 * P_ * depth_) {
      throw ValidationError("keyed batch: gap narrower than the receptive field");
    }
    for (const auto& p : b.left_parts) {
      if (static_cast<int>(p.size()) != b.left_len) throw ValidationError("keyed batch: bad left part");
    }
    for (const auto& p : b.right_parts) {
      if (static_cast<int>(p.size()) != b.right_len) throw ValidationError("keyed batch: bad right part");
    }
    nkeys_[kLeft] = split_ ? static_cast<int>(b.left_parts.size()) : 0;
    nkeys_[kRight] = static_cast<int>(b.right_parts.size());
    for (int s = 0; s < 2; ++s) mult_[s].assign(nkeys_[s], 0.0);
    for (const auto& e : b.examples) {
      if (e.right < 0 || e.right >= nkeys_[kRight]) throw ValidationError("keyed batch: bad right index");
      if (split_) {
        if (e.left < 0 || e.left >= nkeys_[kLeft]) throw ValidationError("keyed batch: bad left index");
        mult_[kLeft][e.left] += 1.0;
      }
      mult_[kRight][e.right] += 1.0;
    }
  }

  std::vector<double> run(bool train, std::vector<LayerState>* layers,
                          std::vector<std::vector<double>>* batch_mean,
                          std::vector<std::vector<double>>* batch_var) {
    const auto p = net_.params();
    const auto run = net_.running();
    const auto& lay = net_.layout();

    std::array<Mat, 2> act;
    for (int s = 0; s < 2; ++s) {
      const int n = len(s, 0);
      act[s].resize(1, static_cast<Eigen::Index>(nkeys_[s]) * n);
      const auto& parts = s == kLeft ? b_.left_parts : b_.right_parts;
      for (int key = 0; key < nkeys_[s]; ++key) {
        for (int u = 0; u < n; ++u) act[s](0, key * n + u) = parts[key][u];
      }
    }
    Vec mid = Vec::Zero(1);

    for (int l = 0; l < depth_; ++l) {
      const auto& conv = lay.convs[l];
      const int Cin = conv.in_ch;
      const int Cout = conv.out_ch;
      const Mat W = weight_matrix(conv);
      const Eigen::Map<const Vec> bias(&p[conv.bias], Cout);

      const bool fold_bias = conv.bn >= 0 && train;
      LayerState st;
      std::array<Mat, 2> y;
      for (int s = 0; s < 2; ++s) {
        st.col[s] = im2col(s, l, act[s], mid, Cin);
        y[s] = W * st.col[s];
        if (!fold_bias) y[s].colwise() += bias;
      }
      Vec ymid = Vec::Zero(Cout);
      if (split_) ymid = weight_sum(conv) * mid;
      if (!fold_bias) ymid += bias;
      st.mid_in = mid;

      if (conv.bn >= 0) {
        const auto& bn = lay.norms[conv.bn];
        Vec mean(Cout), var(Cout);
        if (train) {
          const double M = static_cast<double>(N_) * L_;
          const double nm = static_cast<double>(N_) * mid_count(l + 1);
          mean = nm * ymid;
          for (int s = 0; s < 2; ++s) mean += y[s] * col_weights(s, l + 1);
          mean /= M;
          var = nm * (ymid - mean).array().square().matrix();
          for (int s = 0; s < 2; ++s) {
            var += (y[s].colwise() - mean).array().square().matrix() * col_weights(s, l + 1);
          }
          var /= M;
          if (batch_mean) {
            const Vec shifted = mean + bias;
            batch_mean->emplace_back(shifted.data(), shifted.data() + Cout);
            batch_var->emplace_back(var.data(), var.data() + Cout);
          }
        } else {
          for (int o = 0; o < Cout; ++o) {
            mean[o] = run[bn.running_mean + o];
            var[o] = run[bn.running_var + o];
          }
        }
        st.inv_std = (var.array() + kBatchNormEps).rsqrt().matrix();
        const Eigen::Map<const Vec> gamma(&p[bn.gamma], Cout);
        const Eigen::Map<const Vec> beta(&p[bn.beta], Cout);
        for (int s = 0; s < 2; ++s) {
          st.xhat[s] = (y[s].colwise() - mean).array().colwise() * st.inv_std.array();
          y[s] = (st.xhat[s].array().colwise() * gamma.array()).colwise() + beta.array();
        }
        st.mid_xhat = (ymid - mean).cwiseProduct(st.inv_std);
        ymid = gamma.cwiseProduct(st.mid_xhat) + beta;
      }
      for (int s = 0; s < 2; ++s) {
        act[s] = y[s].cwiseMax(0.0);
        if (layers) st.post[s] = act[s];
      }
      mid = ymid.cwiseMax(0.0);
      st.mid_post = mid;
      if (layers) layers->push_back(std::move(st));
    }

    // Head: per-key partial logits, summed per example.
    std::array<Mat, 2> part;
    for (int s = 0; s < 2; ++s) {
      const int n = len(s, depth_);
      part[s].resize(nkeys_[s], 2);
      const ConstMap flat(act[s].data(), static_cast<Eigen::Index>(C_) * n, nkeys_[s]);
      for (int o = 0; o < 2; ++o) part[s].col(o) = flat.transpose() * head_slice(s, o);
    }
    std::array<double, 2> mid_part{0.0, 0.0};
    if (split_) {
      for (int o = 0; o < 2; ++o) mid_part[o] = head_mid_sums(o).dot(mid);
    }
    logits_.assign(N_ * 2, 0.0);
    probs_.assign(N_ * 2, 0.0);
    std::vector<double> click(N_);
    for (std::size_t n = 0; n < N_; ++n) {
      const auto& e = b_.examples[n];
      double z[2];
      for (int o = 0; o < 2; ++o) {
        double s = p[lay.head_bias + o] + mid_part[o] + part[kRight](e.right, o);
        if (split_) s += part[kLeft](e.left, o);
        if (!std::isfinite(s)) throw DivergenceError("non-finite logit in forward pass");
        logits_[n * 2 + o] = s;
        z[o] = std::clamp(s, -kLogitClamp, kLogitClamp);
      }
      const double m = std::max(z[0], z[1]);
      const double e0 = std::exp(z[0] - m);
      const double e1 = std::exp(z[1] - m);
      probs_[n * 2] = e0 / (e0 + e1);
      probs_[n * 2 + 1] = e1 / (e0 + e1);
      click[n] = probs_[n * 2 + kClickClass];
    }
    return click;
  }

  BackwardResult backward(const std::vector<LayerState>& layers) {
    const auto p = net_.params();
    const auto& lay = net_.layout();
    BackwardResult out;
    auto& g = out.grads.values;
    g.assign(lay.n_params, 0.0);

    std::array<Mat, 2> dz;
    for (int s = 0; s < 2; ++s) dz[s] = Mat::Zero(nkeys_[s], 2);
    Vec dz_mid = Vec::Zero(2);
    double loss = 0.0;
    for (std::size_t n = 0; n < N_; ++n) {
      const auto& e = b_.examples[n];
      const int y = e.target ? 1 : 0;
      loss -= std::log(probs_[n * 2 + y]);
      for (int o = 0; o < 2; ++o) {
        double d = (probs_[n * 2 + o] - (o == y ? 1.0 : 0.0)) / static_cast<double>(N_);
        if (std::abs(logits_[n * 2 + o]) >= kLogitClamp) d = 0.0;
        dz_mid[o] += d;
        dz[kRight](e.right, o) += d;
        if (split_) dz[kLeft](e.left, o) += d;
      }
    }
    out.loss = loss / static_cast<double>(N_);
    for (int o = 0; o < 2; ++o) g[lay.head_bias + o] += dz_mid[o];

    const auto& last = layers.back();
    std::array<Mat, 2> dact;
    for (int s = 0; s < 2; ++s) {
      const int n = len(s, depth_);
      const Eigen::Index rows = static_cast<Eigen::Index>(C_) * n;
      const ConstMap flat(last.post[s].data(), rows, nkeys_[s]);
      Mat dflat = Mat::Zero(rows, nkeys_[s]);
      const int st = start(s, depth_);
      for (int o = 0; o < 2; ++o) {
        const Vec gw = flat * dz[s].col(o);
        for (int u = 0; u < n; ++u) {
          for (int c = 0; c < C_; ++c) {
            g[lay.head_weight + o * lay.head_in + static_cast<std::size_t>(c) * L_ + st + u] +=
                gw[u * C_ + c];
          }
        }
        dflat.noalias() += head_slice(s, o) * dz[s].col(o).transpose();
      }
      dact[s] = Eigen::Map<Mat>(dflat.data(), C_, static_cast<Eigen::Index>(n) * nkeys_[s]);
    }
    Vec dmid = Vec::Zero(C_);
    if (split_) {
      const int lo = mid_lo(depth_), hi = mid_hi(depth_);
      for (int o = 0; o < 2; ++o) {
        dmid += dz_mid[o] * head_mid_sums(o);
        for (int c = 0; c < C_; ++c) {
          for (int q = lo; q < hi; ++q) {
            g[lay.head_weight + o * lay.head_in + static_cast<std::size_t>(c) * L_ + q] +=
                dz_mid[o] * last.mid_post[c];
          }
        }
      }
    }

    for (int l = depth_ - 1; l >= 0; --l) {
      const auto& conv = lay.convs[l];
      const auto& st = layers[l];
      const int Cin = conv.in_ch;
      const int Cout = conv.out_ch;
      for (int s = 0; s < 2; ++s) {
        dact[s] = (st.post[s].array() > 0.0).select(dact[s], 0.0);
      }
      for (int c = 0; c < Cout; ++c) {
        if (!(st.mid_post[c] > 0.0)) dmid[c] = 0.0;
      }
      if (conv.bn >= 0) {
        const auto& bn = lay.norms[conv.bn];
        const double M = static_cast<double>(N_) * L_;
        const double nm = static_cast<double>(N_) * mid_count(l + 1);
        Vec sum_d = dmid;
        Vec sum_dx = dmid.cwiseProduct(st.mid_xhat);
        for (int s = 0; s < 2; ++s) {
          sum_d += dact[s].rowwise().sum();
          sum_dx += dact[s].cwiseProduct(st.xhat[s]).rowwise().sum();
        }
        for (int c = 0; c < Cout; ++c) {
          g[bn.gamma + c] += sum_dx[c];
          g[bn.beta + c] += sum_d[c];
        }
        const Eigen::Map<const Vec> gamma(&p[bn.gamma], Cout);
        const Vec scale = gamma.cwiseProduct(st.inv_std);
        const Vec md = sum_d / M;
        const Vec mdx = sum_dx / M;
        for (int s = 0; s < 2; ++s) {
          const Vec w = col_weights(s, l + 1);
          Mat centered = st.xhat[s].array().colwise() * mdx.array();
          centered.colwise() += md;
          centered = centered.array().rowwise() * w.transpose().array();
          dact[s] = (dact[s] - centered).array().colwise() * scale.array();
        }
        dmid = scale.cwiseProduct(dmid - nm * (md + st.mid_xhat.cwiseProduct(mdx)));
      }

      Vec gb = dmid;
      Mat gW = Mat::Zero(Cout, static_cast<Eigen::Index>(K_) * Cin);
      for (int s = 0; s < 2; ++s) {
        gb += dact[s].rowwise().sum();
        gW.noalias() += dact[s] * st.col[s].transpose();
      }
      if (split_) {
        for (int j = 0; j < K_; ++j) gW.middleCols(j * Cin, Cin).noalias() += dmid * st.mid_in.transpose();
      }
      for (int o = 0; o < Cout; ++o) {
        if (conv.bn < 0) g[conv.bias + o] += gb[o];
        for (int c = 0; c < Cin; ++c) {
          for (int j = 0; j < K_; ++j) {
            g[conv.weight + (static_cast<std::size_t>(o) * Cin + c) * K_ + j] += gW(o, j * Cin + c);
          }
        }
      }
      if (l == 0) break;

      const Mat W = weight_matrix(conv);
      Vec dmid_prev = Vec::Zero(Cin);
      if (split_) dmid_prev = weight_sum(conv).transpose() * dmid;
      std::array<Mat, 2> dprev;
      for (int s = 0; s < 2; ++s) {
        const Mat dcol = W.transpose() * dact[s];
        dprev[s] = col2im(s, l, dcol, Cin, dmid_prev);
      }
      dact = std::move(dprev);
      dmid = std::move(dmid_prev);
    }
    return out;
  }

 private:
  int start(int s, int k) const {
    if (s == kLeft) return 0;
    return b_.left_len + b_.gap_len - (split_ ? P_ * k : 0);
  }
  int len(int s, int k) const {
    if (s == kLeft) return split_ ? b_.left_len + P_ * k : 0;
    return b_.right_len + (split_ ? P_ * k : 0);
  }
  int mid_lo(int k) const { return b_.left_len + P_ * k; }
  int mid_hi(int k) const { return b_.left_len + b_.gap_len - P_ * k; }
  int mid_count(int k) const { return split_ ? mid_hi(k) - mid_lo(k) : 0; }

  Vec col_weights(int s, int k) const {
    const int n = len(s, k);
    Vec w(static_cast<Eigen::Index>(nkeys_[s]) * n);
    for (int key = 0; key < nkeys_[s]; ++key) w.segment(static_cast<Eigen::Index>(key) * n, n).setConstant(mult_[s][key]);
    return w;
  }

  Mat weight_matrix(const ParamLayout::Conv& conv) const {
    const auto p = net_.params();
    Mat W(conv.out_ch, static_cast<Eigen::Index>(K_) * conv.in_ch);
    for (int o = 0; o < conv.out_ch; ++o) {
      for (int c = 0; c < conv.in_ch; ++c) {
        for (int j = 0; j < K_; ++j) {
          W(o, j * conv.in_ch + c) = p[conv.weight + (static_cast<std::size_t>(o) * conv.in_ch + c) * K_ + j];
        }
      }
    }
    return W;
  }

  Mat weight_sum(const ParamLayout::Conv& conv) const {
    const auto p = net_.params();
    Mat S = Mat::Zero(conv.out_ch, conv.in_ch);
    for (int o = 0; o < conv.out_ch; ++o) {
      for (int c = 0; c < conv.in_ch; ++c) {
        for (int j = 0; j < K_; ++j) S(o, c) += p[conv.weight + (static_cast<std::size_t>(o) * conv.in_ch + c) * K_ + j];
      }
    }
    return S;
  }

  // Head weights over a side's final span, laid out like the flattened
  // column-major span block (position-major, channel-minor).
  Vec head_slice(int s, int o) const {
    const auto p = net_.params();
    const auto& lay = net_.layout();
    const int n = len(s, depth_);
    const int st = start(s, depth_);
    Vec w(static_cast<Eigen::Index>(C_) * n);
    for (int u = 0; u < n; ++u) {
      for (int c = 0; c < C_; ++c) {
        w[u * C_ + c] = p[lay.head_weight + o * lay.head_in + static_cast<std::size_t>(c) * L_ + st + u];
      }
    }
    return w;
  }

  Vec head_mid_sums(int o) const {
    const auto p = net_.params();
    const auto& lay = net_.layout();
    Vec w = Vec::Zero(C_);
    for (int c = 0; c < C_; ++c) {
      for (int q = mid_lo(depth_); q < mid_hi(depth_); ++q) {
        w[c] += p[lay.head_weight + o * lay.head_in + static_cast<std::size_t>(c) * L_ + q];
      }
    }
    return w;
  }

  // Source of input position `pos` for layer-k activations of side s:
  // >= 0 local span index, -1 zero padding, -2 middle constant.
  int source(int s, int k, int pos) const {
    if (pos < 0 || pos >= L_) return -1;
    const int st = start(s, k);
    if (pos >= st && pos < st + len(s, k)) return pos - st;
    return -2;
  }

  Mat im2col(int s, int k, const Mat& act, const Vec& mid, int Cin) const {
    const int n_in = len(s, k);
    const int n_out = len(s, k + 1);
    const int st_out = start(s, k + 1);
    const Eigen::Index rows = static_cast<Eigen::Index>(K_) * Cin;
    Mat col(rows, static_cast<Eigen::Index>(nkeys_[s]) * n_out);
    for (int u = 0; u < n_out; ++u) {
      for (int j = 0; j < K_; ++j) {
        const int src = source(s, k, st_out + u + j - P_);
        for (int key = 0; key < nkeys_[s]; ++key) {
          double* dst = col.data() + (static_cast<Eigen::Index>(key) * n_out + u) * rows + j * Cin;
          if (src >= 0) {
            const double* from = act.data() + (static_cast<Eigen::Index>(key) * n_in + src) * Cin;
            std::copy(from, from + Cin, dst);
          } else if (src == -1) {
            std::fill(dst, dst + Cin, 0.0);
          } else {
            std::copy(mid.data(), mid.data() + Cin, dst);
          }
        }
      }
    }
    return col;
  }

  Mat col2im(int s, int k, const Mat& dcol, int Cin, Vec& dmid) const {
    const int n_in = len(s, k);
    const int n_out = len(s, k + 1);
    const int st_out = start(s, k + 1);
    const Eigen::Index rows = static_cast<Eigen::Index>(K_) * Cin;
    Mat dx = Mat::Zero(Cin, static_cast<Eigen::Index>(nkeys_[s]) * n_in);
    for (int u = 0; u < n_out; ++u) {
      for (int j = 0; j < K_; ++j) {
        const int src = source(s, k, st_out + u + j - P_);
        if (src == -1) continue;
        for (int key = 0; key < nkeys_[s]; ++key) {
          const double* from = dcol.data() + (static_cast<Eigen::Index>(key) * n_out + u) * rows + j * Cin;
          double* to = src >= 0 ? dx.data() + (static_cast<Eigen::Index>(key) * n_in + src) * Cin : dmid.data();
          for (int c = 0; c < Cin; ++c) to[c] += from[c];
        }
      }
    }
    return dx;
  }

  const ValueNetwork& net_;
  const KeyedBatch& b_;
  int L_ = 0, K_ = 0, P_ = 0, depth_ = 0, C_ = 0;
  std::size_t N_ = 0;
  bool split_ = false;
  std::array<int, 2> nkeys_{};
  std::array<std::vector<double>, 2> mult_;
  std::vector<double> logits_;
  std::vector<double> probs_;
};

}  // namespace

std::vector<double> keyed_infer(const ValueNetwork& net, const KeyedBatch& batch) {
  Engine e(net, batch);
  return e.run(false, nullptr, nullptr, nullptr);
}

BackwardResult keyed_train_step(ValueNetwork& net, const KeyedBatch& batch) {
  Engine e(net, batch);
  std::vector<LayerState> layers;
  std::vector<std::vector<double>> mean, var;
  e.run(true, &layers, &mean, &var);
  auto run = net.mutable_running();
  const auto& norms = net.layout().norms;
  for (std::size_t b = 0; b < norms.size(); ++b) {
    for (int o = 0; o < norms[b].channels; ++o) {
      double& rm = run[norms[b].running_mean + o];
      double& rv = run[norms[b].running_var + o];
      rm = kBatchNormMomentum * rm + (1.0 - kBatchNormMomentum) * mean[b][o];
      rv = kBatchNormMomentum * rv + (1.0 - kBatchNormMomentum) * var[b][o];
    }
  }
  net.round_to_storage();
  return e.backward(layers);
}

}  // namespace clickrl::nn
