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

#include "clickrl/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "clickrl/clicklog.hpp"
#include "clickrl/config.hpp"
#include "clickrl/drlc.hpp"
#include "clickrl/error.hpp"
#include "clickrl/eval.hpp"
#include "clickrl/nn.hpp"
#include "clickrl/pgm.hpp"
#include "clickrl/text.hpp"

namespace clickrl::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

constexpr const char* kRunFile = "run.json";
constexpr const char* kParamsFile = "params.tsv";
constexpr const char* kHistoryFile = "history.tsv";
constexpr double kGradTolerance = 1e-4;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("write failed for " + path.string());
}

std::string hash_line(const std::string& hash) { return "#config_hash\t" + hash + "\n"; }

ExperimentConfig load_config(const std::string& path, long long seed_override) {
  auto cfg = ExperimentConfig::load(path);
  if (seed_override >= 0) cfg.set_seed(static_cast<std::uint64_t>(seed_override));
  return cfg;
}

ordered_json split_json(const SplitRatios& r) {
  return {{"train", r.train}, {"valid", r.valid}, {"test", r.test}};
}

// --- simulate -----------------------------------------------------------------

int do_simulate(const std::string& config, const std::string& out_dir, long long seed,
                std::ostream& out) {
  const auto cfg = load_config(config, seed);
  const auto hash = cfg.hash();
  const auto [ds, truth] = simulate_logs(cfg.sim);
  const fs::path root(out_dir);

  std::ostringstream clicks, feats, gt;
  clicks << hash_line(hash);
  write_canonical(clicks, ds.impressions);
  feats << hash_line(hash);
  write_feature_tsv(feats, ds.features);
  write_ground_truth(gt, truth);
  gt << hash_line(hash);

  ordered_json manifest;
  manifest["kind"] = "dataset";
  manifest["config_hash"] = hash;
  manifest["seed"] = cfg.seed;
  manifest["impressions"] = ds.impressions.size();
  ordered_json files = ordered_json::object();
  for (const auto& [name, body] : {std::pair{"clicks.tsv", clicks.str()},
                                   std::pair{"features.tsv", feats.str()},
                                   std::pair{"truth.tsv", gt.str()}}) {
    write_file(root / name, body);
    files[name] = sha256_hex(body);
  }
  manifest["sha256"] = files;
  write_file(root / "manifest.json", manifest.dump(2) + "\n");
  out << "simulated " << ds.impressions.size() << " impressions into " << out_dir << "\n";
  return kExitOk;
}

// --- convert ------------------------------------------------------------------

int do_convert(const std::string& from, const std::string& in_path, const std::string& out_path,
               std::ostream& out, std::ostream& err) {
  if (from != "interactive-csv") throw ValidationError("unsupported input format '" + from + "'");
  std::ifstream in(in_path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + in_path);
  const auto conv = convert_interactive_csv(in);
  for (const auto& d : conv.diagnostics) err << "skipped: " << d << "\n";
  std::ostringstream body;
  write_canonical(body, conv.impressions);
  write_file(out_path, body.str());
  out << "converted " << conv.impressions.size() << " impressions, skipped "
      << conv.skipped_rows << " rows\n";
  return kExitOk;
}

// --- train --------------------------------------------------------------------

int do_train(const std::string& model, const std::string& data, const std::string& config,
             const std::string& out_dir, long long seed, std::ostream& out) {
  const auto cfg = load_config(config, seed);
  const auto hash = cfg.hash();
  const auto ds = load_dataset_dir(data);
  const auto splits = split_dataset(ds, cfg.split, cfg.seed);
  const fs::path root(out_dir);
  fs::create_directories(root);

  ordered_json run;
  run["model"] = model;
  run["config_hash"] = hash;
  run["seed"] = cfg.seed;
  run["split"] = split_json(cfg.split);
  run["train_impressions"] = splits.train.impressions.size();

  if (model == "drlc") {
    drlc::History history;
    const auto m = drlc::fit(splits.train, splits.valid, cfg.hyper, &history);
    drlc::save_model(m, out_dir, hash);
    std::string h = hash_line(hash) + "epoch\tmean_cost\tvalid_log_likelihood\n";
    for (const auto& e : history.epochs) {
      h += std::to_string(e.epoch) + "\t" + text::format_double(e.mean_cost) + "\t" +
           text::format_double(e.valid_ll) + "\n";
    }
    write_file(root / kHistoryFile, h);
    run["best_epoch"] = history.best_epoch;
    run["early_stopped"] = history.early_stopped;
    run["objective"] = "minimize squared-error cost";
    out << "trained drlc: best epoch " << history.best_epoch << " of "
        << (history.epochs.size() - 1) << "\n";
  } else {
    const std::span<const Impression> log(splits.train.impressions);
    pgm::PgmParams params;
    int iterations = 0;
    const pgm::EmStopping stopping{splits.valid.impressions, cfg.pgm.patience};
    if (model == "dcm") {
      params = pgm::train_dcm(log, {cfg.pgm.prior, kMaxPositions});
    } else if (model == "ubm") {
      auto res = pgm::train_ubm(log, cfg.pgm.iterations, {cfg.pgm.prior, kMaxPositions, stopping});
      params = std::move(res.params);
      iterations = res.best_iteration;
    } else if (model == "dbn") {
      auto res = pgm::train_dbn(log, cfg.pgm.iterations,
                                {cfg.pgm.persevere, cfg.pgm.prior, stopping});
      params = std::move(res.params);
      iterations = res.best_iteration;
    } else {
      throw ValidationError("unknown model '" + model + "'");
    }
    std::ostringstream body;
    pgm::write_params(body, params, iterations);
    body << hash_line(hash);
    write_file(root / kParamsFile, body.str());
    if (iterations > 0) run["best_iteration"] = iterations;
    out << "trained " << model << "\n";
  }
  write_file(root / kRunFile, run.dump(2) + "\n");
  return kExitOk;
}

// --- evaluate / compare -----------------------------------------------------------

struct LoadedRun {
  ordered_json run;
  std::string model;
};

LoadedRun load_run(const std::string& dir) {
  LoadedRun r;
  try {
    r.run = ordered_json::parse(read_file(fs::path(dir) / kRunFile));
    r.model = r.run.at("model").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(dir + "/" + kRunFile + ": " + e.what());
  }
  return r;
}

const Dataset& pick_split(const std::string& split, const Dataset& all, const DatasetSplits& s) {
  if (split == "all") return all;
  if (split == "train") return s.train;
  if (split == "valid") return s.valid;
  if (split == "test") return s.test;
  throw ValidationError("unknown split '" + split + "'");
}

eval::Report evaluate_dir(const std::string& dir, const Dataset& all, const std::string& split,
                          const std::vector<int>& ks) {
  const auto loaded = load_run(dir);
  SplitRatios ratios;
  std::uint64_t seed = 0;
  std::string hash;
  try {
    const auto& sj = loaded.run.at("split");
    ratios = {sj.at("train").get<double>(), sj.at("valid").get<double>(), sj.at("test").get<double>()};
    seed = loaded.run.at("seed").get<std::uint64_t>();
    hash = loaded.run.at("config_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(dir + "/" + kRunFile + ": " + e.what());
  }
  DatasetSplits splits;
  if (split != "all") splits = split_dataset(all, ratios, seed);
  const auto& ds = pick_split(split, all, splits);

  eval::ModelScores scores;
  if (loaded.model == "drlc") {
    scores = eval::score_drlc(drlc::load_model(dir), ds);
  } else {
    std::istringstream in(read_file(fs::path(dir) / kParamsFile));
    scores = eval::score_pgm(pgm::read_params(in), ds.impressions);
  }
  auto report = eval::evaluate(scores, ds.impressions, ks, split);
  report.metadata["config_hash"] = hash;
  report.metadata["seed"] = std::to_string(seed);
  report.metadata["model_dir"] = fs::path(dir).filename().string();
  if (loaded.model == "drlc") report.metadata["objective"] = "minimize squared-error cost";
  return report;
}

std::size_t max_ranks(const std::vector<eval::Report>& reports) {
  std::size_t n = 0;
  for (const auto& r : reports) n = std::max(n, r.perplexity_per_rank.size());
  return n;
}

int do_evaluate(const std::vector<std::string>& models, const std::string& data,
                const std::string& ks_text, const std::string& report_path,
                const std::string& csv_path, const std::string& split, bool table, bool compare,
                std::ostream& out) {
  const auto ks = parse_ks(ks_text);
  const auto all = load_dataset_dir(data);
  std::vector<eval::Report> reports;
  for (const auto& m : models) reports.push_back(evaluate_dir(m, all, split, ks));

  if (compare) {
    eval::sort_for_compare(reports);
    ordered_json j;
    ordered_json ranking = ordered_json::array();
    for (const auto& r : reports) ranking.push_back(r.model);
    j["ranking"] = ranking;
    j["reports"] = ordered_json::array();
    for (const auto& r : reports) j["reports"].push_back(ordered_json::parse(eval::to_json(r)));
    j["table"] = eval::render_table(reports, ks);
    write_file(report_path, j.dump(2) + "\n");
  } else {
    write_file(report_path, eval::to_json(reports.front()));
  }
  if (!csv_path.empty()) {
    const auto ranks = max_ranks(reports);
    std::string csv = eval::csv_header(ks, ranks);
    for (const auto& r : reports) csv += eval::csv_row(r, ks, ranks);
    write_file(csv_path, csv);
  }
  if (table) out << eval::render_table(reports, ks);
  return kExitOk;
}

// --- gradcheck ------------------------------------------------------------------

int do_gradcheck(std::uint64_t seed, int trials, std::ostream& out) {
  const auto results = nn::grad_check_suite(seed, trials);
  double worst = 0.0;
  for (const auto& r : results) worst = std::max(worst, r.max_rel_err);
  out << "max relative error " << text::format_double(worst) << " over " << results.size()
      << " trials\n";
  return worst < kGradTolerance ? kExitOk : kExitFailure;
}

int do_keys(std::ostream& out) {
  for (const auto& k : ExperimentConfig::keys()) out << k.key << "\t" << k.description << "\n";
  return kExitOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"clickrl: click models from logs"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "worker cap (work is single-threaded)")
      ->check(CLI::PositiveNumber);

  std::string config, out_dir, data, model, from, in_path, ks = "1,3,5,10", report, csv;
  std::string split = "test";
  std::vector<std::string> models;
  long long seed = -1;
  int trials = 20;
  bool table = false;

  auto* sim = app.add_subcommand("simulate", "write a simulated dataset");
  sim->add_option("--config", config)->required();
  sim->add_option("--out", out_dir)->required();
  sim->add_option("--seed", seed, "overrides the config seed");

  auto* conv = app.add_subcommand("convert", "convert an export to the canonical log format");
  conv->add_option("--from", from)->required();
  conv->add_option("--in", in_path)->required();
  conv->add_option("--out", out_dir)->required();

  auto* train = app.add_subcommand("train", "train a model on the training split");
  train->add_option("--model", model)->required()->check(CLI::IsMember({"drlc", "dcm", "ubm", "dbn"}));
  train->add_option("--data", data)->required();
  train->add_option("--config", config)->required();
  train->add_option("--out", out_dir)->required();
  train->add_option("--seed", seed, "overrides the config seed");

  auto add_eval_flags = [&](CLI::App* sub) {
    sub->add_option("--data", data)->required();
    sub->add_option("--ks", ks, "NDCG cutoffs");
    sub->add_option("--report", report)->required();
    sub->add_option("--csv", csv, "also write CSV rows");
    sub->add_option("--split", split, "test, valid, train or all")
        ->check(CLI::IsMember({"test", "valid", "train", "all"}));
    sub->add_flag("--table", table, "print an aligned table");
  };
  auto* evaluate = app.add_subcommand("evaluate", "evaluate one trained model");
  evaluate->add_option("--model", model)->required();
  add_eval_flags(evaluate);

  auto* compare = app.add_subcommand("compare", "evaluate and rank several models");
  compare->add_option("--models", models)->required();
  add_eval_flags(compare);

  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient check");
  grad->add_option("--seed", seed)->required();
  grad->add_option("--trials", trials)->check(CLI::PositiveNumber);

  app.add_subcommand("keys", "list configuration keys");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }

  try {
    if (sim->parsed()) return do_simulate(config, out_dir, seed, out);
    if (conv->parsed()) return do_convert(from, in_path, out_dir, out, err);
    if (train->parsed()) return do_train(model, data, config, out_dir, seed, out);
    if (evaluate->parsed()) {
      return do_evaluate({model}, data, ks, report, csv, split, table, false, out);
    }
    if (compare->parsed()) return do_evaluate(models, data, ks, report, csv, split, table, true, out);
    if (grad->parsed()) {
      if (seed < 0) throw ValidationError("--seed must be >= 0");
      return do_gradcheck(static_cast<std::uint64_t>(seed), trials, out);
    }
    return do_keys(out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace clickrl::cli
