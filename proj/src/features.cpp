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

#include "clickrl/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <istream>
#include <ostream>
#include <random>
#include <string>

#include "clickrl/error.hpp"
#include "clickrl/text.hpp"

namespace clickrl {

std::uint64_t BiasFeatures::key() const {
  std::uint64_t k = 0;
  for (std::size_t i = 0; i < bias_layout::kInformative; ++i) {
    if (bits[i]) k |= std::uint64_t{1} << i;
  }
  return k;
}

std::string_view to_string(ObservationLabel l) {
  switch (l) {
    case ObservationLabel::kObservedClick: return "observed_click";
    case ObservationLabel::kObservedNoClick: return "observed_no_click";
    case ObservationLabel::kUnobservedNoClick: return "unobserved_no_click";
  }
  return "?";
}

BiasFeatures encode_bias(std::span<const ObservationLabel> labels, int window_start, int t,
                         int window_size) {
  const int T = static_cast<int>(labels.size());
  if (T < 1 || T > static_cast<int>(kMaxPositions)) {
    throw ValidationError("encode_bias: impression length " + std::to_string(T) +
                          " outside [1, 10]");
  }
  if (t < 1 || t > T) {
    throw ValidationError("encode_bias: cursor " + std::to_string(t) + " outside [1, " +
                          std::to_string(T) + "]");
  }
  if (window_size < 1) throw ValidationError("encode_bias: window size must be >= 1");
  if (window_start < 1 || window_start > T + 1) {
    throw ValidationError("encode_bias: window start " + std::to_string(window_start) +
                          " outside [1, " + std::to_string(T + 1) + "]");
  }

  BiasFeatures b;
  for (int r = 1; r <= T; ++r) {
    const auto label = labels[r - 1];
    if (is_observed(label)) b.bits.set(bias_layout::kObserved + r - 1);
    if (label == ObservationLabel::kObservedClick) b.bits.set(bias_layout::kClicked + r - 1);
  }
  const int window_end = std::min(window_start + window_size - 1, T);
  for (int r = window_start; r <= window_end; ++r) b.bits.set(bias_layout::kWindow + r - 1);
  b.bits.set(bias_layout::kCursor + t - 1);
  return b;
}

DocFeatures synth_doc_features(double relevance, std::uint64_t seed,
                               const SynthFeatureOptions& opts) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> signal(relevance, opts.noise_sigma);
  std::uniform_real_distribution<double> noise(0.0, 1.0);
  DocFeatures f;
  const std::size_t n_signal = std::min(opts.signal_coords, kDocFeatureDim);
  for (std::size_t i = 0; i < kDocFeatureDim; ++i) {
    f.values[i] = i < n_signal ? std::clamp(signal(rng), 0.0, 1.0) : noise(rng);
  }
  return f;
}

std::string FeatureTable::make_key(std::string_view q, std::string_view d) {
  std::string k;
  k.reserve(q.size() + d.size() + 1);
  k.append(q);
  k.push_back('\t');
  k.append(d);
  return k;
}

std::size_t FeatureTable::set(std::string_view query_id, std::string_view doc_id,
                              const DocFeatures& f) {
  auto key = make_key(query_id, doc_id);
  if (auto it = index_.find(key); it != index_.end()) {
    rows_[it->second].features = f;
    return it->second;
  }
  rows_.push_back(Row{std::string(query_id), std::string(doc_id), f});
  index_.emplace(std::move(key), rows_.size() - 1);
  return rows_.size() - 1;
}

std::optional<std::size_t> FeatureTable::index_of(std::string_view query_id,
                                                  std::string_view doc_id) const {
  auto it = index_.find(make_key(query_id, doc_id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const DocFeatures* FeatureTable::find(std::string_view query_id, std::string_view doc_id) const {
  auto idx = index_of(query_id, doc_id);
  return idx ? &rows_[*idx].features : nullptr;
}

FeatureTable read_feature_tsv(std::istream& in) {
  FeatureTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = text::strip_eol(line);
    if (view.empty() || view.front() == '#') continue;
    auto fields = text::split(view, '\t');
    if (fields.size() != 2 + kDocFeatureDim) {
      throw ParseError(line_no, "feature row needs " + std::to_string(2 + kDocFeatureDim) +
                                    " fields, got " + std::to_string(fields.size()));
    }
    DocFeatures f;
    for (std::size_t i = 0; i < kDocFeatureDim; ++i) {
      f.values[i] = text::parse_double(fields[2 + i], line_no);
      if (!std::isfinite(f.values[i])) throw ParseError(line_no, "non-finite feature value");
    }
    table.set(fields[0], fields[1], f);
  }
  return table;
}

void write_feature_tsv(std::ostream& out, const FeatureTable& table) {
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.query_id(i) << '\t' << table.doc_id(i);
    for (double v : table.at(i).values) out << '\t' << text::format_double(v);
    out << '\n';
  }
}

MinMaxNormalizer::MinMaxNormalizer() {
  lo_.fill(0.0);
  hi_.fill(1.0);
}

MinMaxNormalizer MinMaxNormalizer::fit(const FeatureTable& table,
                                       std::span<const std::size_t> rows) {
  MinMaxNormalizer n;
  if (rows.empty()) return n;
  n.lo_.fill(std::numeric_limits<double>::infinity());
  n.hi_.fill(-std::numeric_limits<double>::infinity());
  for (auto r : rows) {
    const auto& v = table.at(r).values;
    for (std::size_t i = 0; i < kDocFeatureDim; ++i) {
      n.lo_[i] = std::min(n.lo_[i], v[i]);
      n.hi_[i] = std::max(n.hi_[i], v[i]);
    }
  }
  return n;
}

DocFeatures MinMaxNormalizer::apply(const DocFeatures& f) const {
  DocFeatures out;
  for (std::size_t i = 0; i < kDocFeatureDim; ++i) {
    const double span = hi_[i] - lo_[i];
    out.values[i] = span > 0.0 ? (f.values[i] - lo_[i]) / span : 0.5;
  }
  return out;
}

void MinMaxNormalizer::write(std::ostream& out) const {
  out << "#coord\tmin\tmax\n";
  for (std::size_t i = 0; i < kDocFeatureDim; ++i) {
    out << i << '\t' << text::format_double(lo_[i]) << '\t' << text::format_double(hi_[i])
        << '\n';
  }
}

MinMaxNormalizer MinMaxNormalizer::read(std::istream& in) {
  MinMaxNormalizer n;
  std::array<bool, kDocFeatureDim> seen{};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = text::strip_eol(line);
    if (view.empty() || view.front() == '#') continue;
    auto fields = text::split(view, '\t');
    if (fields.size() != 3) throw ParseError(line_no, "normalizer row needs 3 fields");
    const auto i = text::parse_int(fields[0], line_no);
    if (i < 0 || i >= static_cast<std::int64_t>(kDocFeatureDim)) {
      throw ParseError(line_no, "normalizer coordinate out of range");
    }
    n.lo_[i] = text::parse_double(fields[1], line_no);
    n.hi_[i] = text::parse_double(fields[2], line_no);
    seen[i] = true;
  }
  if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
    throw FormatError("normalizer file is missing coordinates");
  }
  return n;
}

}  // namespace clickrl
