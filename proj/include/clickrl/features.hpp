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

#include <array>
#include <bitset>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace clickrl {

inline constexpr std::size_t kDocFeatureDim = 56;
inline constexpr std::size_t kBiasFeatureDim = 100;
inline constexpr std::size_t kMaxPositions = 10;
inline constexpr int kDefaultWindowSize = 3;

/// Query-document feature vector (the network's D input).
struct DocFeatures {
  std::array<double, kDocFeatureDim> values{};
  friend bool operator==(const DocFeatures&, const DocFeatures&) = default;
};

/// Layout of the 100-dim observation vector (the network's B input).
/// Ranks are 1-based; slot index = block offset + rank - 1.
namespace bias_layout {
inline constexpr std::size_t kObserved = 0;
inline constexpr std::size_t kClicked = 10;
inline constexpr std::size_t kWindow = 20;
inline constexpr std::size_t kCursor = 30;
/// Slots at or beyond this index are always zero.
inline constexpr std::size_t kInformative = 40;
}  // namespace bias_layout

struct BiasFeatures {
  std::bitset<kBiasFeatureDim> bits;

  bool operator[](std::size_t i) const { return bits[i]; }
  /// The informative prefix packed into an integer; unique per vector.
  std::uint64_t key() const;
  friend bool operator==(const BiasFeatures&, const BiasFeatures&) = default;
};

enum class ObservationLabel : std::uint8_t {
  kObservedClick,
  kObservedNoClick,
  kUnobservedNoClick,
};

constexpr bool is_observed(ObservationLabel l) {
  return l != ObservationLabel::kUnobservedNoClick;
}

std::string_view to_string(ObservationLabel l);

/// Builds B for cursor `t` given per-rank labels (size T). Ranks beyond T and
/// window slots past T stay zero. Throws ValidationError on out-of-range
/// cursor or window.
BiasFeatures encode_bias(std::span<const ObservationLabel> labels, int window_start, int t,
                         int window_size = kDefaultWindowSize);

struct SynthFeatureOptions {
  std::size_t signal_coords = 8;
  double noise_sigma = 0.25;
};

/// Synthetic stand-in for precomputed ranking features: the first
/// `signal_coords` entries are N(relevance, sigma) clamped to [0,1], the rest
/// are U(0,1) noise.
DocFeatures synth_doc_features(double relevance, std::uint64_t seed,
                               const SynthFeatureOptions& opts = {});

/// (query_id, doc_id) -> DocFeatures, iteration in insertion order.
class FeatureTable {
 public:
  /// Inserts or overwrites; returns the row index.
  std::size_t set(std::string_view query_id, std::string_view doc_id, const DocFeatures& f);
  std::optional<std::size_t> index_of(std::string_view query_id, std::string_view doc_id) const;
  const DocFeatures* find(std::string_view query_id, std::string_view doc_id) const;

  const DocFeatures& at(std::size_t index) const { return rows_[index].features; }
  const std::string& query_id(std::size_t index) const { return rows_[index].query_id; }
  const std::string& doc_id(std::size_t index) const { return rows_[index].doc_id; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }

 private:
  struct Row {
    std::string query_id;
    std::string doc_id;
    DocFeatures features;
  };
  static std::string make_key(std::string_view q, std::string_view d);

  std::vector<Row> rows_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// TSV: query_id \t doc_id \t f1 ... f56, one row per pair.
FeatureTable read_feature_tsv(std::istream& in);
void write_feature_tsv(std::ostream& out, const FeatureTable& table);

/// Per-coordinate min-max scaling fitted on a training subset and frozen.
/// Constant coordinates map to 0.5.
class MinMaxNormalizer {
 public:
  MinMaxNormalizer();
  static MinMaxNormalizer fit(const FeatureTable& table, std::span<const std::size_t> rows);

  DocFeatures apply(const DocFeatures& f) const;

  void write(std::ostream& out) const;
  static MinMaxNormalizer read(std::istream& in);

  const std::array<double, kDocFeatureDim>& lo() const { return lo_; }
  const std::array<double, kDocFeatureDim>& hi() const { return hi_; }

 private:
  std::array<double, kDocFeatureDim> lo_;
  std::array<double, kDocFeatureDim> hi_;
};

}  // namespace clickrl
