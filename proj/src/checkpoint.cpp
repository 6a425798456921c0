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

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "clickrl/error.hpp"
#include "clickrl/nn.hpp"

namespace clickrl::nn {

namespace {

constexpr std::array<char, 5> kMagic = {'D', 'C', 'L', 'K', '1'};

struct ArraySpec {
  bool running = false;  // lives in the running-stat array
  std::size_t offset = 0;
  std::vector<std::uint32_t> dims;
  std::size_t count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

std::vector<ArraySpec> array_specs(const ValueNetwork& net) {
  const auto& lay = net.layout();
  const auto K = static_cast<std::uint32_t>(net.arch().kernel);
  std::vector<ArraySpec> specs;
  for (const auto& c : lay.convs) {
    const auto out = static_cast<std::uint32_t>(c.out_ch);
    specs.push_back({false, c.weight, {out, static_cast<std::uint32_t>(c.in_ch), K}});
    specs.push_back({false, c.bias, {out}});
    if (c.bn >= 0) {
      const auto& n = lay.norms[c.bn];
      const auto ch = static_cast<std::uint32_t>(n.channels);
      specs.push_back({false, n.gamma, {ch}});
      specs.push_back({false, n.beta, {ch}});
      specs.push_back({true, n.running_mean, {ch}});
      specs.push_back({true, n.running_var, {ch}});
    }
  }
  specs.push_back({false, lay.head_weight, {2, static_cast<std::uint32_t>(lay.head_in)}});
  specs.push_back({false, lay.head_bias, {2}});
  return specs;
}

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  const std::vector<char>& data() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> data) : buf_(std::move(data)) {}
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw FormatError("checkpoint is truncated");
  }
  void bytes(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const ValueNetwork& net, const std::string& path) {
  Writer w;
  w.bytes(kMagic.data(), kMagic.size());
  w.u32(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(net.kind()));
  const auto& a = net.arch();
  for (int v : {a.input_len, a.join_layers, a.blocks, a.channels, a.kernel}) w.i32(v);
  const auto specs = array_specs(net);
  w.u32(static_cast<std::uint32_t>(specs.size()));
  for (const auto& s : specs) {
    w.u32(static_cast<std::uint32_t>(s.dims.size()));
    for (auto d : s.dims) w.u32(d);
    const auto src = s.running ? net.running() : net.params();
    for (std::size_t i = 0; i < s.count(); ++i) w.f32(static_cast<float>(src[s.offset + i]));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path);
  out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
  if (!out) throw Error("failed writing checkpoint " + path);
}

ValueNetwork load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));

  std::array<char, 5> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kMagic) throw FormatError("not a checkpoint (bad magic): " + path);
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto kind = r.u8();
  if (kind < 1 || kind > 3) throw FormatError("unknown network kind tag " + std::to_string(kind));
  Architecture arch;
  arch.kind = static_cast<NetKind>(kind);
  arch.input_len = r.i32();
  arch.join_layers = r.i32();
  arch.blocks = r.i32();
  arch.channels = r.i32();
  arch.kernel = r.i32();
  try {
    arch.validate();
  } catch (const ValidationError& e) {
    throw FormatError(std::string("bad architecture in checkpoint: ") + e.what());
  }

  ValueNetwork net(arch);
  const auto specs = array_specs(net);
  if (r.u32() != specs.size()) throw FormatError("checkpoint array count mismatch");
  auto params = net.mutable_params();
  auto running = net.mutable_running();
  for (const auto& s : specs) {
    const auto rank = r.u32();
    if (rank != s.dims.size()) throw FormatError("checkpoint array rank mismatch");
    for (auto d : s.dims) {
      if (r.u32() != d) throw FormatError("checkpoint array shape mismatch");
    }
    auto dst = s.running ? running : params;
    for (std::size_t i = 0; i < s.count(); ++i) dst[s.offset + i] = static_cast<double>(r.f32());
  }
  if (!r.at_end()) throw FormatError("trailing bytes after checkpoint arrays");
  return net;
}

ValueNetwork load_checkpoint(const std::string& path, NetKind expected) {
  auto net = load_checkpoint(path);
  if (net.kind() != expected) {
    throw FormatError("checkpoint holds a " + to_string(net.kind()) + " network, expected " +
                      to_string(expected));
  }
  return net;
}

}  // namespace clickrl::nn
