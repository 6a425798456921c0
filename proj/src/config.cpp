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

#include "clickrl/config.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <set>

#include "clickrl/error.hpp"
#include "clickrl/text.hpp"

namespace clickrl {
namespace {

struct Entry {
  const char* key;
  const char* doc;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
  bool identity = true;  // part of the hashed canonical form
};

std::uint64_t to_u64(std::string_view v) {
  const auto n = text::parse_int(v);
  if (n < 0) throw ParseError(0, "expected a non-negative integer, got '" + std::string(v) + "'");
  return static_cast<std::uint64_t>(n);
}

int to_int(std::string_view v) { return static_cast<int>(text::parse_int(v)); }

bool to_bool(std::string_view v) {
  v = text::trim(v);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ParseError(0, "expected true or false, got '" + std::string(v) + "'");
}

std::string str(double v) { return text::format_double(v); }
std::string str(bool v) { return v ? "true" : "false"; }
template <typename T>
std::string str(T v) {
  return std::to_string(v);
}

std::string exam_kind_name(ExamModel::Kind k) {
  switch (k) {
    case ExamModel::Kind::kRankDecay: return "rank_decay";
    case ExamModel::Kind::kCascade: return "cascade";
    case ExamModel::Kind::kWindow: return "window";
  }
  return "window";
}

ExamModel::Kind exam_kind(std::string_view v) {
  if (v == "rank_decay") return ExamModel::Kind::kRankDecay;
  if (v == "cascade") return ExamModel::Kind::kCascade;
  if (v == "window") return ExamModel::Kind::kWindow;
  throw ParseError(0, "unknown examination model '" + std::string(v) + "'");
}

#define CLICKRL_NUM(KEY, DOC, FIELD, CONV)                                      \
  Entry {                                                                       \
    KEY, DOC, [](ExperimentConfig& c, std::string_view v) { c.FIELD = CONV(v); }, \
        [](const ExperimentConfig& c) { return str(c.FIELD); }                  \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      {"seed", "single seed for simulation, splitting and training",
       [](ExperimentConfig& c, std::string_view v) { c.set_seed(to_u64(v)); },
       [](const ExperimentConfig& c) { return str(c.seed); }},
      CLICKRL_NUM("sim.queries", "number of simulated queries", sim.n_queries, to_u64),
      CLICKRL_NUM("sim.docs_per_query", "documents per query", sim.docs_per_query, to_u64),
      CLICKRL_NUM("sim.impressions_per_query", "impressions per query",
                  sim.impressions_per_query, to_u64),
      CLICKRL_NUM("sim.positions", "ranks shown per impression (<= 10)", sim.positions, to_u64),
      CLICKRL_NUM("sim.signal_features", "feature coordinates carrying relevance",
                  sim.signal_features, to_u64),
      {"sim.relevance", "relevance prior: uniform:lo,hi | beta:a,b | constant:v",
       [](ExperimentConfig& c, std::string_view v) {
         c.sim.relevance_prior = RelevancePrior::parse(text::trim(v));
       },
       [](const ExperimentConfig& c) { return c.sim.relevance_prior.to_string(); }},
      {"sim.exam", "examination model: window | rank_decay | cascade",
       [](ExperimentConfig& c, std::string_view v) { c.sim.exam_model.kind = exam_kind(text::trim(v)); },
       [](const ExperimentConfig& c) { return exam_kind_name(c.sim.exam_model.kind); }},
      CLICKRL_NUM("sim.exam_exponent", "rank_decay exponent", sim.exam_model.exponent,
                  text::parse_double),
      CLICKRL_NUM("sim.exam_continuation", "cascade continuation probability",
                  sim.exam_model.continuation, text::parse_double),
      CLICKRL_NUM("sim.exam_window", "window examination size", sim.exam_model.window_size, to_int),
      CLICKRL_NUM("sim.exam_inside", "examination probability inside the window",
                  sim.exam_model.inside_prob, text::parse_double),
      CLICKRL_NUM("sim.exam_outside", "examination probability outside the window",
                  sim.exam_model.outside_prob, text::parse_double),
      CLICKRL_NUM("split.train", "training share of sessions", split.train, text::parse_double),
      CLICKRL_NUM("split.valid", "validation share of sessions", split.valid, text::parse_double),
      CLICKRL_NUM("split.test", "test share of sessions", split.test, text::parse_double),
      CLICKRL_NUM("drlc.beta", "weight of the de-biased term in the cost", hyper.beta,
                  text::parse_double),
      CLICKRL_NUM("drlc.theta", "C1/C2 ratio below which a position is unobserved", hyper.theta,
                  text::parse_double),
      CLICKRL_NUM("drlc.window_size", "observation window size", hyper.window_size, to_int),
      CLICKRL_NUM("drlc.discount", "discount of per-step costs, in (0,1]", hyper.discount,
                  text::parse_double),
      CLICKRL_NUM("drlc.epochs", "maximum training epochs after pretraining", hyper.epochs, to_int),
      CLICKRL_NUM("drlc.pretrain_epochs", "pretraining epochs", hyper.pretrain_epochs, to_int),
      CLICKRL_NUM("drlc.patience", "epochs without validation gain before stopping",
                  hyper.patience, to_int),
      CLICKRL_NUM("drlc.epsilon", "random relabeling probability for unclicked ranks",
                  hyper.epsilon, text::parse_double),
      CLICKRL_NUM("drlc.inclusive_last_click", "pretrain C2 through the last click",
                  hyper.inclusive_last_click, to_bool),
      {"opt.method", "sgd | momentum",
       [](ExperimentConfig& c, std::string_view v) {
         v = text::trim(v);
         if (v == "sgd") {
           c.hyper.opt.method = nn::OptConfig::Method::kSgd;
         } else if (v == "momentum") {
           c.hyper.opt.method = nn::OptConfig::Method::kSgdMomentum;
         } else {
           throw ParseError(0, "unknown optimizer '" + std::string(v) + "'");
         }
       },
       [](const ExperimentConfig& c) {
         return std::string(c.hyper.opt.method == nn::OptConfig::Method::kSgd ? "sgd" : "momentum");
       }},
      CLICKRL_NUM("opt.learning_rate", "step size", hyper.opt.learning_rate, text::parse_double),
      CLICKRL_NUM("opt.momentum", "heavy-ball coefficient", hyper.opt.momentum, text::parse_double),
      CLICKRL_NUM("opt.batch_size", "impressions per update", hyper.opt.batch_size, to_u64),
      CLICKRL_NUM("opt.weight_decay", "L2 coefficient", hyper.opt.weight_decay, text::parse_double),
      CLICKRL_NUM("pgm.iterations", "maximum EM iterations for UBM and DBN", pgm.iterations, to_int),
      CLICKRL_NUM("pgm.patience", "EM iterations without validation gain before stopping",
                  pgm.patience, to_int),
      CLICKRL_NUM("pgm.prior", "probability for pairs unseen in training", pgm.prior,
                  text::parse_double),
      CLICKRL_NUM("pgm.persevere", "DBN perseverance", pgm.persevere, text::parse_double),
      {"eval.ks", "comma-separated NDCG cutoffs",
       [](ExperimentConfig& c, std::string_view v) { c.ks = parse_ks(v); },
       [](const ExperimentConfig& c) {
         std::string s;
         for (int k : c.ks) s += (s.empty() ? "" : ",") + std::to_string(k);
         return s;
       }},
      {"paths.data", "default dataset directory",
       [](ExperimentConfig& c, std::string_view v) { c.data_path = text::trim(v); },
       [](const ExperimentConfig& c) { return c.data_path; }, false},
      {"paths.out", "default output directory",
       [](ExperimentConfig& c, std::string_view v) { c.out_path = text::trim(v); },
       [](const ExperimentConfig& c) { return c.out_path; }, false},
  };
  return table;
}

#undef CLICKRL_NUM

const Entry* find_entry(std::string_view key) {
  for (const auto& e : entries()) {
    if (key == e.key) return &e;
  }
  return nullptr;
}

}  // namespace

std::vector<ExperimentConfig::KeyDoc> ExperimentConfig::keys() {
  std::vector<KeyDoc> out;
  for (const auto& e : entries()) out.push_back({e.key, e.doc});
  return out;
}

void ExperimentConfig::set_seed(std::uint64_t s) {
  seed = s;
  sim.seed = s;
  hyper.seed = s;
}

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  const auto* e = find_entry(key);
  if (!e) throw ValidationError("unknown config key '" + std::string(key) + "'");
  e->set(*this, value);
}

ExperimentConfig ExperimentConfig::parse(std::istream& in) {
  ExperimentConfig cfg;
  std::set<std::string, std::less<>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = text::trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected key = value");
    const auto key = text::trim(view.substr(0, eq));
    const auto value = text::trim(view.substr(eq + 1));
    if (!find_entry(key)) throw ParseError(line_no, "unknown config key '" + std::string(key) + "'");
    if (!seen.emplace(key).second) {
      throw ParseError(line_no, "config key '" + std::string(key) + "' given twice");
    }
    try {
      cfg.set(key, value);
    } catch (const ParseError& e) {
      throw ParseError(line_no, std::string(key) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ParseError(line_no, std::string(key) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  return parse(in);
}

void ExperimentConfig::validate() const {
  sim.validate();
  hyper.validate();
  if (!(split.train > 0.0 && split.valid > 0.0 && split.test > 0.0) ||
      std::abs(split.train + split.valid + split.test - 1.0) > 1e-9) {
    throw ValidationError("split ratios must be positive and sum to 1");
  }
  if (pgm.iterations < 1) throw ValidationError("pgm.iterations must be >= 1");
  if (pgm.patience < 1) throw ValidationError("pgm.patience must be >= 1");
  if (!(pgm.prior > 0.0 && pgm.prior < 1.0)) throw ValidationError("pgm.prior must be in (0,1)");
  if (!(pgm.persevere > 0.0 && pgm.persevere <= 1.0)) {
    throw ValidationError("pgm.persevere must be in (0,1]");
  }
  if (ks.empty()) throw ValidationError("eval.ks must name at least one cutoff");
}

std::string ExperimentConfig::canonical() const {
  std::string out;
  for (const auto& e : entries()) {
    if (e.identity) out += std::string(e.key) + "=" + e.get(*this) + "\n";
  }
  return out;
}

std::string ExperimentConfig::hash() const { return sha256_hex(canonical()); }

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    char buf[3];
    std::snprintf(buf, sizeof(buf), "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

std::vector<int> parse_ks(std::string_view text) {
  std::vector<int> ks;
  for (auto part : text::split(text::trim(text), ',')) {
    const auto k = text::parse_int(part);
    if (k < 1) throw ValidationError("NDCG cutoffs must be >= 1");
    ks.push_back(static_cast<int>(k));
  }
  return ks;
}

}  // namespace clickrl
