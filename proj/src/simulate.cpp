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
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include "clickrl/clicklog.hpp"
#include "clickrl/error.hpp"
#include "clickrl/text.hpp"

namespace clickrl {

namespace {

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

double sample_beta(std::mt19937_64& rng, double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x + y > 0.0 ? x / (x + y) : 0.5;
}

}  // namespace

double ExamModel::exam_prob(int rank) const {
  switch (kind) {
    case Kind::kRankDecay: return std::pow(static_cast<double>(rank), -exponent);
    case Kind::kCascade: return std::pow(continuation, rank - 1);
    case Kind::kWindow: return rank <= window_size ? inside_prob : outside_prob;
  }
  return 0.0;
}

void ExamModel::validate() const {
  switch (kind) {
    case Kind::kRankDecay:
      if (!(exponent >= 0.0)) throw ValidationError("rank_decay exponent must be >= 0");
      break;
    case Kind::kCascade:
      if (!is_probability(continuation)) {
        throw ValidationError("cascade continuation must be in [0,1]");
      }
      break;
    case Kind::kWindow:
      if (window_size < 1) throw ValidationError("window size must be >= 1");
      if (!is_probability(inside_prob) || !is_probability(outside_prob)) {
        throw ValidationError("window probabilities must be in [0,1]");
      }
      break;
  }
}

std::string ExamModel::describe() const {
  switch (kind) {
    case Kind::kRankDecay: return "rank_decay\texponent=" + text::format_double(exponent);
    case Kind::kCascade: return "cascade\tcontinuation=" + text::format_double(continuation);
    case Kind::kWindow:
      return "window\twindow_size=" + std::to_string(window_size) +
             "\tinside_prob=" + text::format_double(inside_prob) +
             "\toutside_prob=" + text::format_double(outside_prob);
  }
  return {};
}

ExamModel ExamModel::parse(std::string_view description) {
  auto fields = text::split(text::trim(description), '\t');
  ExamModel m;
  const auto name = fields[0];
  if (name == "rank_decay") {
    m.kind = Kind::kRankDecay;
  } else if (name == "cascade") {
    m.kind = Kind::kCascade;
  } else if (name == "window") {
    m.kind = Kind::kWindow;
  } else {
    throw ParseError(0, "unknown exam model '" + std::string(name) + "'");
  }
  for (std::size_t i = 1; i < fields.size(); ++i) {
    const auto eq = fields[i].find('=');
    if (eq == std::string_view::npos) throw ParseError(0, "exam parameter without '='");
    const auto key = fields[i].substr(0, eq);
    const auto value = fields[i].substr(eq + 1);
    if (key == "exponent") {
      m.exponent = text::parse_double(value);
    } else if (key == "continuation") {
      m.continuation = text::parse_double(value);
    } else if (key == "window_size") {
      m.window_size = static_cast<int>(text::parse_int(value));
    } else if (key == "inside_prob") {
      m.inside_prob = text::parse_double(value);
    } else if (key == "outside_prob") {
      m.outside_prob = text::parse_double(value);
    } else {
      throw ParseError(0, "unknown exam parameter '" + std::string(key) + "'");
    }
  }
  m.validate();
  return m;
}

double RelevancePrior::sample(std::mt19937_64& rng) const {
  switch (kind) {
    case Kind::kUniform: return std::uniform_real_distribution<double>(a, b)(rng);
    case Kind::kBeta: return sample_beta(rng, a, b);
    case Kind::kConstant: return a;
  }
  return 0.0;
}

void RelevancePrior::validate() const {
  switch (kind) {
    case Kind::kUniform:
      if (!is_probability(a) || !is_probability(b) || a > b) {
        throw ValidationError("uniform relevance prior needs 0 <= lo <= hi <= 1");
      }
      break;
    case Kind::kBeta:
      if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("beta prior needs positive shapes");
      break;
    case Kind::kConstant:
      if (!is_probability(a)) throw ValidationError("constant relevance must be in [0,1]");
      break;
  }
}

std::string RelevancePrior::to_string() const {
  switch (kind) {
    case Kind::kUniform: return "uniform:" + text::format_double(a) + "," + text::format_double(b);
    case Kind::kBeta: return "beta:" + text::format_double(a) + "," + text::format_double(b);
    case Kind::kConstant: return "constant:" + text::format_double(a);
  }
  return {};
}

RelevancePrior RelevancePrior::parse(std::string_view spec) {
  spec = text::trim(spec);
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) {
    throw ValidationError("relevance prior '" + std::string(spec) + "' lacks ':'");
  }
  const auto name = spec.substr(0, colon);
  const auto args = text::split(spec.substr(colon + 1), ',');
  RelevancePrior p;
  if (name == "uniform" && args.size() == 2) {
    p.kind = Kind::kUniform;
  } else if (name == "beta" && args.size() == 2) {
    p.kind = Kind::kBeta;
  } else if (name == "constant" && args.size() == 1) {
    p.kind = Kind::kConstant;
  } else {
    throw ValidationError("bad relevance prior '" + std::string(spec) + "'");
  }
  p.a = text::parse_double(args[0]);
  p.b = args.size() > 1 ? text::parse_double(args[1]) : 0.0;
  p.validate();
  return p;
}

void SimConfig::validate() const {
  if (n_queries < 1 || docs_per_query < 1 || impressions_per_query < 1 || positions < 1) {
    throw ValidationError("simulation counts must be >= 1");
  }
  if (positions > kMaxPositions) {
    throw ValidationError("positions must be <= " + std::to_string(kMaxPositions));
  }
  if (signal_features > kDocFeatureDim) {
    throw ValidationError("signal_features must be <= " + std::to_string(kDocFeatureDim));
  }
  exam_model.validate();
  relevance_prior.validate();
}

std::optional<double> GroundTruth::relevance(std::string_view query_id,
                                             std::string_view doc_id) const {
  std::string key(query_id);
  key.push_back('\t');
  key.append(doc_id);
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return entries[it->second].relevance;
}

void GroundTruth::add(std::string query_id, std::string doc_id, double rel) {
  std::string key = query_id + '\t' + doc_id;
  if (auto it = index_.find(key); it != index_.end()) {
    entries[it->second].relevance = rel;
    return;
  }
  index_.emplace(std::move(key), entries.size());
  entries.push_back(Entry{std::move(query_id), std::move(doc_id), rel});
}

void write_ground_truth(std::ostream& out, const GroundTruth& gt) {
  out << "#exam_model\t" << gt.exam_model.describe() << '\n';
  for (const auto& e : gt.entries) {
    out << e.query_id << '\t' << e.doc_id << '\t' << text::format_double(e.relevance) << '\n';
  }
}

GroundTruth read_ground_truth(std::istream& in) {
  GroundTruth gt;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty ground-truth file");
  constexpr std::string_view kPrefix = "#exam_model\t";
  auto header = text::strip_eol(line);
  if (header.substr(0, kPrefix.size()) != kPrefix) {
    throw ParseError(1, "ground-truth header must start with '#exam_model'");
  }
  gt.exam_model = ExamModel::parse(header.substr(kPrefix.size()));
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = text::strip_eol(line);
    if (view.empty() || view.front() == '#') continue;
    auto fields = text::split(view, '\t');
    if (fields.size() != 3) throw ParseError(line_no, "ground-truth row needs 3 fields");
    const double rel = text::parse_double(fields[2], line_no);
    if (!is_probability(rel)) throw ParseError(line_no, "relevance outside [0,1]");
    gt.add(std::string(fields[0]), std::string(fields[1]), rel);
  }
  return gt;
}

std::pair<Dataset, GroundTruth> simulate_logs(const SimConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const SynthFeatureOptions feat_opts{cfg.signal_features, 0.25};

  Dataset ds;
  GroundTruth gt;
  gt.exam_model = cfg.exam_model;

  const std::size_t shown = std::min(cfg.docs_per_query, cfg.positions);
  std::vector<double> exam(shown);
  for (std::size_t r = 0; r < shown; ++r) exam[r] = cfg.exam_model.exam_prob(static_cast<int>(r + 1));

  ds.impressions.reserve(cfg.n_queries * cfg.impressions_per_query);
  std::vector<std::string> doc_ids(cfg.docs_per_query);
  std::vector<double> rel(cfg.docs_per_query);
  std::vector<std::size_t> order(cfg.docs_per_query);
  for (std::size_t q = 0; q < cfg.n_queries; ++q) {
    const std::string qid = "q" + std::to_string(q);
    for (std::size_t j = 0; j < cfg.docs_per_query; ++j) {
      doc_ids[j] = qid + "-d" + std::to_string(j);
      rel[j] = cfg.relevance_prior.sample(rng);
      const std::uint64_t feature_seed = rng();
      ds.features.set(qid, doc_ids[j], synth_doc_features(rel[j], feature_seed, feat_opts));
      gt.add(qid, doc_ids[j], rel[j]);
    }
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    for (std::size_t i = 0; i < cfg.impressions_per_query; ++i) {
      Impression imp;
      imp.session_id = "s" + std::to_string(q) + "-" + std::to_string(i);
      imp.query_id = qid;
      imp.doc_ids.reserve(shown);
      imp.clicks.reserve(shown);
      for (std::size_t r = 0; r < shown; ++r) {
        const std::size_t j = order[r];
        imp.doc_ids.push_back(doc_ids[j]);
        imp.clicks.push_back(unit(rng) < exam[r] * rel[j] ? 1 : 0);
      }
      ds.impressions.push_back(std::move(imp));
    }
  }
  return {std::move(ds), std::move(gt)};
}

}  // namespace clickrl
