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
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "clickrl/features.hpp"

namespace clickrl {

/// One logged result page: a ranked list of documents with click flags.
struct Impression {
  std::string session_id;
  std::string query_id;
  std::vector<std::string> doc_ids;
  std::vector<std::uint8_t> clicks;  // 0/1 per rank

  std::size_t size() const { return doc_ids.size(); }
  bool clicked(std::size_t rank0) const { return clicks[rank0] != 0; }
  friend bool operator==(const Impression&, const Impression&) = default;
};

/// Throws ValidationError if lengths disagree, T is 0 or exceeds max_positions,
/// or a click flag is not 0/1.
void validate(const Impression& imp, std::size_t max_positions = kMaxPositions);

/// 1-based rank of the last click, or nullopt for a clickless impression.
std::optional<int> last_click_position(const Impression& imp);

// --- Canonical format: session \t query \t d1|d2|... \t 0101 ---------------

Impression parse_canonical(std::string_view line, std::size_t line_no = 0);
std::string write_canonical(const Impression& imp);

/// Reads every non-empty line; lines starting with # are comments. Errors
/// carry line numbers.
std::vector<Impression> read_canonical(std::istream& in);
void write_canonical(std::ostream& out, const std::vector<Impression>& imps);

// --- Interactive CSV (visitor/session/date/time/searchterm/skus) ------------

/// Column positions of an interactive export, resolved from its header row.
struct InteractiveColumns {
  std::size_t session = 1;
  std::size_t searchterm = 4;
  std::size_t click_sku = 5;
  std::size_t impressions = 8;
  std::size_t n_columns = 9;

  /// Resolves columns by exact header names; throws ParseError if any of the
  /// nine required names is missing.
  static InteractiveColumns from_header(std::string_view header_row);
};

/// RFC 4180-style field split (double-quoted fields may contain commas).
std::vector<std::string> split_csv_row(std::string_view row, std::size_t line_no = 0);

/// Converts one data row. Click skus may be a comma-separated list inside the
/// click column. Throws ParseError for an empty impression list or a click sku
/// that is not in the impression list.
Impression parse_interactive_csv(std::string_view row,
                                 const InteractiveColumns& cols = InteractiveColumns{},
                                 std::size_t line_no = 0);

struct InteractiveConversion {
  std::vector<Impression> impressions;
  std::size_t skipped_rows = 0;
  std::vector<std::string> diagnostics;  // one per skipped row
};

/// Reads a whole export (header row required). Dirty rows are skipped and
/// reported rather than aborting the conversion.
InteractiveConversion convert_interactive_csv(std::istream& in);

// --- Datasets ---------------------------------------------------------------

struct Dataset {
  std::vector<Impression> impressions;
  FeatureTable features;

  /// Throws ValidationError naming the first (query, doc) pair without features.
  void require_features() const;
};

/// Loads `<dir>/clicks.tsv` and `<dir>/features.tsv`.
Dataset load_dataset_dir(const std::string& dir);

struct SplitRatios {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

struct DatasetSplits {
  Dataset train;
  Dataset valid;
  Dataset test;
};

/// Partitions by session id (no session straddles splits), deterministic per
/// seed. Impression order inside each split follows the input order. Throws
/// ValidationError on bad ratios or if any split would be empty.
DatasetSplits split_dataset(const Dataset& ds, const SplitRatios& ratios, std::uint64_t seed);

// --- Simulation ---------------------------------------------------------------

struct ExamModel {
  enum class Kind { kRankDecay, kCascade, kWindow };
  Kind kind = Kind::kWindow;
  double exponent = 1.0;      // rank_decay: P(E_r) = r^-exponent
  double continuation = 0.5;  // cascade:    P(E_r) = continuation^(r-1)
  int window_size = kDefaultWindowSize;  // window: inside for r <= size
  double inside_prob = 0.95;
  double outside_prob = 0.05;

  double exam_prob(int rank) const;
  void validate() const;
  /// e.g. "window\twindow_size=3\tinside_prob=0.95\toutside_prob=0.05"
  std::string describe() const;
  static ExamModel parse(std::string_view description);
};

struct RelevancePrior {
  enum class Kind { kUniform, kBeta, kConstant };
  Kind kind = Kind::kUniform;
  double a = 0.0;
  double b = 1.0;

  double sample(std::mt19937_64& rng) const;
  void validate() const;
  std::string to_string() const;
  /// "uniform:lo,hi", "beta:alpha,beta" or "constant:v".
  static RelevancePrior parse(std::string_view spec);
};

struct SimConfig {
  std::size_t n_queries = 100;
  std::size_t docs_per_query = 10;
  std::size_t impressions_per_query = 20;
  std::size_t positions = kMaxPositions;
  ExamModel exam_model;
  RelevancePrior relevance_prior;
  std::size_t signal_features = 8;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Generating relevance per (query, doc) plus the examination process.
struct GroundTruth {
  struct Entry {
    std::string query_id;
    std::string doc_id;
    double relevance = 0.0;
  };
  std::vector<Entry> entries;
  ExamModel exam_model;

  std::optional<double> relevance(std::string_view query_id, std::string_view doc_id) const;
  void add(std::string query_id, std::string doc_id, double relevance);

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

/// Sidecar TSV: one header line "#exam_model\t<describe()>" then
/// query_id \t doc_id \t relevance rows.
void write_ground_truth(std::ostream& out, const GroundTruth& gt);
GroundTruth read_ground_truth(std::istream& in);

/// Each query gets `docs_per_query` documents with relevance from the prior and
/// a fixed random display order; every impression shows the first
/// min(docs, positions) of them and clicks rank r with probability
/// exam_prob(r) * relevance. Query-major output order; bit-identical per seed.
std::pair<Dataset, GroundTruth> simulate_logs(const SimConfig& cfg);

}  // namespace clickrl
