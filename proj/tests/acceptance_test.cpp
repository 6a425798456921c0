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
// Acceptance run: one PASS/FAIL line per criterion, tolerances fixed below.
// Usage: acceptance_test [results_file]

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "clickrl/cli.hpp"
#include "clickrl/clicklog.hpp"
#include "clickrl/config.hpp"
#include "clickrl/drlc.hpp"
#include "clickrl/eval.hpp"
#include "clickrl/nn.hpp"
#include "clickrl/pgm.hpp"
#include "pgm_oracles.hpp"

namespace fs = std::filesystem;
using namespace clickrl;

namespace {

// Criterion 1
constexpr int kGradTrials = 20;
constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 120.0;
// Criterion 2
constexpr double kMonotoneTol = -1e-12;
constexpr double kGridTol = 1e-4;
constexpr double kCountingTol = 1e-6;
// Criterion 3
constexpr double kClosedFormTol = 1e-12;
constexpr double kPerfectTol = 1e-9;
// Criteria 4 and 5
constexpr int kSeeds = 5;
constexpr std::size_t kQueries = 2000;
constexpr double kMinSpearman = 0.8;
constexpr double kMinNdcgGain = 0.03;
constexpr double kPplFactor = 0.995;
constexpr double kRecoverySeconds = 15 * 60.0;
// Criterion 6
constexpr std::size_t kMinPositions = 100000;
constexpr int kGatingInputs = 1000;
// Criterion 7
constexpr std::size_t kRoundTripImpressions = 10000;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

// --- 1. gradients ---

Outcome gradients() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto trials = nn::grad_check_suite(7, kGradTrials);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  for (const auto& t : trials) worst = std::max(worst, t.max_rel_err);
  o.detail << trials.size() << " trials, max relative error " << sci(worst) << ", " << fmt(secs, 1)
           << " s";
  o.require(static_cast<int>(trials.size()) == kGradTrials, "trial count");
  o.require(worst < kGradTol, "error < 1e-4");
  o.require(secs < kGradSeconds, "runtime < 2 min");
  return o;
}

// --- 2. EM ---

double worst_step(const std::vector<double>& trace) {
  double w = INFINITY;
  for (std::size_t i = 1; i < trace.size(); ++i) w = std::min(w, trace[i] - trace[i - 1]);
  return w;
}

Outcome em() {
  Outcome o;
  double worst = INFINITY;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto log = pgm::random_log(seed);
    worst = std::min(worst, worst_step(pgm::train_ubm(log, 50).ll_trace));
    worst = std::min(worst, worst_step(pgm::train_dbn(log, 50).ll_trace));
  }
  const auto tiny = pgm::tiny_log();
  const double grid_gap =
      std::abs(pgm::train_ubm(tiny, 3000).ll_trace.back() - pgm::ubm_grid_oracle(tiny));

  const auto counting = pgm::counting_log();
  const auto c = pgm::count_sdbn(counting);
  const auto p = std::get<pgm::DbnParams>(
      pgm::train_dbn(counting, 2000, {1.0, pgm::kUnseenPrior, {}}).params);
  double count_gap = 0.0;
  for (const std::string d : {"A", "B", "C", "D"}) {
    count_gap = std::max(count_gap, std::abs(pgm::lookup(p.attract, "q", d, -1) -
                                             c.clicks.at(d) / c.before_last.at(d)));
    if (c.clicks.at(d) > 0) {
      const double last = c.last.count(d) ? c.last.at(d) : 0.0;
      count_gap = std::max(count_gap,
                           std::abs(pgm::lookup(p.satisfy, "q", d, -1) - last / c.clicks.at(d)));
    }
  }
  o.detail << "worst LL step " << sci(worst) << " over 3 logs x {UBM, DBN}; UBM tiny-log gap "
           << sci(grid_gap) << "; DBN counting gap " << sci(count_gap);
  o.require(worst >= kMonotoneTol, "monotone LL");
  o.require(grid_gap <= kGridTol, "grid search");
  o.require(count_gap <= kCountingTol, "counting oracle");
  return o;
}

// --- 3. metrics ---

Outcome metrics() {
  Outcome o;
  std::mt19937_64 rng(3);
  std::bernoulli_distribution coin(0.3);
  eval::ClickBits clicks(500, std::vector<std::uint8_t>(10));
  for (auto& row : clicks) for (auto& b : row) b = coin(rng) ? 1 : 0;
  eval::Predictions half, perfect;
  for (const auto& row : clicks) {
    half.emplace_back(row.size(), 0.5);
    perfect.emplace_back(row.begin(), row.end());
  }
  const double ll = eval::log_likelihood(half, clicks);
  const auto ppl_half = eval::perplexity(half, clicks);
  const auto ppl_perfect = eval::perplexity(perfect, clicks);
  const double nd = eval::ndcg_at_k(std::vector<double>{0.9, 0.8, 0.1},
                                    std::vector<std::uint8_t>{0, 1, 0}, 10);
  bool every_rank_two = true;
  for (double v : ppl_half.per_rank) every_rank_two = every_rank_two && v == 2.0;
  o.detail << "uniform ppl " << fmt(ppl_half.overall, 12) << ", LL + ln2 = " << sci(ll + std::log(2.0))
           << "; perfect ppl - 1 = " << sci(ppl_perfect.overall - 1.0)
           << "; NDCG click-second - 1/log2(3) = " << sci(nd - 1.0 / std::log2(3.0));
  o.require(ppl_half.overall == 2.0 && every_rank_two, "uniform perplexity exactly 2");
  o.require(std::abs(ll + std::log(2.0)) <= kClosedFormTol, "uniform LL");
  o.require(std::abs(ppl_perfect.overall - 1.0) <= kPerfectTol, "perfect perplexity");
  o.require(std::abs(nd - 1.0 / std::log2(3.0)) <= kClosedFormTol, "NDCG");
  return o;
}

// --- 4 and 5. recovery and ordering ---

struct SeedResult {
  double spearman = 0, ndcg_c2 = 0, ndcg_ctr = 0;
  double ppl_drlc = 0, ppl_dcm = 0, ppl_ubm = 0, ppl_dbn = 0, ppl_oracle = 0;
  int best_epoch = 0, epochs_run = 0, ubm_iter = 0, dbn_iter = 0;
  double fit_seconds = 0;
};

SeedResult run_seed(std::uint64_t seed) {
  SeedResult r;
  SimConfig sc;  // window examination 0.95 / 0.05, window 3, 10 positions
  sc.n_queries = kQueries;
  sc.impressions_per_query = 20;
  sc.positions = 10;
  sc.seed = seed;
  const auto [ds, truth] = simulate_logs(sc);
  const auto splits = split_dataset(ds, {}, seed);

  drlc::Hyper hp;
  hp.seed = seed;
  drlc::History history;
  const auto t0 = Clock::now();
  const auto model = drlc::fit(splits.train, splits.valid, hp, &history);
  r.fit_seconds = seconds_since(t0);
  r.best_epoch = history.best_epoch;
  r.epochs_run = history.epochs.back().epoch;

  // De-biased relevance: C2 over every (query, doc) pair.
  std::vector<double> c2, rel;
  std::map<std::string, std::vector<std::size_t>> by_query;
  for (std::size_t i = 0; i < ds.features.size(); ++i) {
    c2.push_back(nn::click_probability(model.nets.c2,
                                       drlc::doc_input(model.norm.apply(ds.features.at(i)))));
    rel.push_back(*truth.relevance(ds.features.query_id(i), ds.features.doc_id(i)));
    by_query[ds.features.query_id(i)].push_back(i);
  }
  r.spearman = eval::spearman(c2, rel);

  const auto ctr = eval::CtrRanker::fit(splits.train.impressions);
  for (const auto& [q, rows] : by_query) {
    std::vector<double> a, b, g;
    for (auto i : rows) {
      a.push_back(c2[i]);
      b.push_back(ctr.ctr(q, ds.features.doc_id(i)));
      g.push_back(rel[i]);
    }
    r.ndcg_c2 += eval::ndcg_at_k(a, g, 10);
    r.ndcg_ctr += eval::ndcg_at_k(b, g, 10);
  }
  r.ndcg_c2 /= by_query.size();
  r.ndcg_ctr /= by_query.size();

  // Click prediction on the held-out split; EM baselines stop on validation.
  const std::span<const Impression> test(splits.test.impressions);
  const std::vector<int> ks{1, 3, 5, 10};
  const auto ppl = [&](const eval::ModelScores& s) {
    return eval::evaluate(s, test, ks, "test").perplexity_overall;
  };
  const auto& train = splits.train.impressions;
  const pgm::EmStopping stop{splits.valid.impressions, 3};
  const auto ubm = pgm::train_ubm(train, 50, {pgm::kUnseenPrior, kMaxPositions, stop});
  const auto dbn = pgm::train_dbn(train, 50, {pgm::kDefaultPersevere, pgm::kUnseenPrior, stop});
  r.ubm_iter = ubm.best_iteration;
  r.dbn_iter = dbn.best_iteration;
  r.ppl_drlc = ppl(eval::score_drlc(model, splits.test));
  r.ppl_dcm = ppl(eval::score_pgm(pgm::train_dcm(train), test));
  r.ppl_ubm = ppl(eval::score_pgm(ubm.params, test));
  r.ppl_dbn = ppl(eval::score_pgm(dbn.params, test));
  r.ppl_oracle = ppl(eval::score_oracle(test, truth));
  return r;
}

struct Recovery {
  Outcome c4, c5;
  std::vector<std::string> seed_lines;
};

Recovery recovery() {
  Recovery out;
  const auto t0 = Clock::now();
  std::vector<SeedResult> rs;
  for (int s = 1; s <= kSeeds; ++s) {
    rs.push_back(run_seed(static_cast<std::uint64_t>(s)));
    const auto& r = rs.back();
    std::ostringstream line;
    line << "  seed " << s << ": spearman " << fmt(r.spearman) << ", NDCG@10 C2 "
              << fmt(r.ndcg_c2) << " CTR " << fmt(r.ndcg_ctr) << ", ppl drlc " << fmt(r.ppl_drlc)
              << " dcm " << fmt(r.ppl_dcm) << " ubm " << fmt(r.ppl_ubm) << " (iter " << r.ubm_iter
              << ") dbn " << fmt(r.ppl_dbn) << " (iter " << r.dbn_iter << ") oracle "
              << fmt(r.ppl_oracle) << ", best epoch " << r.best_epoch << "/" << r.epochs_run
              << ", fit " << fmt(r.fit_seconds, 1) << " s";
    std::cout << line.str() << std::endl;
    out.seed_lines.push_back(line.str());
  }
  const double secs = seconds_since(t0);
  auto mean = [&](auto field) {
    double s = 0;
    for (const auto& r : rs) s += r.*field;
    return s / rs.size();
  };
  const double sp = mean(&SeedResult::spearman);
  const double gain = mean(&SeedResult::ndcg_c2) - mean(&SeedResult::ndcg_ctr);
  out.c4.detail << kSeeds << " seeds: mean spearman " << fmt(sp) << ", mean NDCG@10 C2 "
                << fmt(mean(&SeedResult::ndcg_c2)) << " vs CTR " << fmt(mean(&SeedResult::ndcg_ctr))
                << " (gain " << fmt(gain) << "), " << fmt(secs / 60, 1) << " min total";
  out.c4.require(sp >= kMinSpearman, "spearman >= 0.8");
  out.c4.require(gain >= kMinNdcgGain, "NDCG gain >= 0.03");
  out.c4.require(secs < kRecoverySeconds, "runtime < 15 min");

  double best_pgm = 0.0;
  for (const auto& r : rs) best_pgm += std::min({r.ppl_dcm, r.ppl_ubm, r.ppl_dbn});
  best_pgm /= rs.size();
  const double drlc_ppl = mean(&SeedResult::ppl_drlc);
  out.c5.detail << "mean test perplexity drlc " << fmt(drlc_ppl, 5) << " vs best baseline "
                << fmt(best_pgm, 5) << " (ratio " << fmt(drlc_ppl / best_pgm, 5) << ", bound "
                << kPplFactor << "); dcm " << fmt(mean(&SeedResult::ppl_dcm), 5) << ", ubm "
                << fmt(mean(&SeedResult::ppl_ubm), 5) << ", dbn "
                << fmt(mean(&SeedResult::ppl_dbn), 5) << ", oracle "
                << fmt(mean(&SeedResult::ppl_oracle), 5);
  out.c5.require(drlc_ppl <= kPplFactor * best_pgm, "drlc <= 0.995 x best baseline");
  return out;
}

// --- 6. episode mechanics ---

Outcome mechanics() {
  Outcome o;
  SimConfig sc;
  sc.n_queries = 500;
  sc.seed = 6;
  const auto ds = simulate_logs(sc).first;
  std::vector<std::size_t> rows(ds.features.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const drlc::Corpus corpus(ds, MinMaxNormalizer::fit(ds.features, rows));
  drlc::Hyper hp;
  hp.seed = 6;
  hp.pretrain_epochs = 1;
  const auto nets = drlc::pretrain(corpus, hp);
  std::vector<std::size_t> items(corpus.size());
  for (std::size_t i = 0; i < items.size(); ++i) items[i] = i;
  const auto eps = drlc::run_episodes(nets.c1, nets.c2, corpus, items, hp);

  std::size_t positions = 0, violations = 0, window_breaks = 0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const auto& clicks = corpus.items()[i].clicks;
    const auto& ep = eps[i];
    for (std::size_t t = 0; t < clicks.size(); ++t) {
      ++positions;
      if (clicks[t] && ep.final_state.labels[t] != ObservationLabel::kObservedClick) {
        ++violations;
      }
      if (t > 0 && ep.window_starts[t] < ep.window_starts[t - 1]) ++window_breaks;
    }
  }

  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int gating_errors = 0;
  for (int i = 0; i < kGatingInputs; ++i) {
    drlc::Hyper h;
    h.beta = 2.0 * u(rng);
    const bool clicked = u(rng) < 0.5;
    const double c1 = u(rng), c2 = u(rng), other = u(rng);
    const double C = clicked ? 1.0 : 0.0;
    const double off = drlc::reward(clicked, c1, c2, false, h);
    const double bias_term = (C - c1) * (C - c1);
    // O = 0 removes the C2 term exactly; O = 1 adds beta (C - c2)^2.
    if (off != bias_term || drlc::reward(clicked, c1, other, false, h) != off) ++gating_errors;
    const double on = drlc::reward(clicked, c1, c2, true, h);
    if (std::abs(on - (bias_term + h.beta * (C - c2) * (C - c2))) > 1e-15) ++gating_errors;
  }
  o.detail << positions << " positions, " << violations << " clicked-but-unobserved, "
           << window_breaks << " window decreases; gating errors " << gating_errors << "/"
           << kGatingInputs;
  o.require(positions >= kMinPositions, ">= 1e5 positions");
  o.require(violations == 0, "clicked implies observed");
  o.require(window_breaks == 0, "window monotone");
  o.require(gating_errors == 0, "gating");
  return o;
}

// --- 7. reproducibility ---

int cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_command(args, out, err);
  if (code != 0) std::cerr << "  command failed: " << args.front() << ": " << err.str();
  return code;
}

std::map<std::string, std::string> checksums(const fs::path& dir) {
  std::map<std::string, std::string> sums;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    sums[fs::relative(e.path(), dir).string()] = sha256_hex(ss.str());
  }
  return sums;
}

int pipeline(const fs::path& cfg, const fs::path& root) {
  int fails = cli({"simulate", "--config", cfg.string(), "--out", (root / "data").string()});
  std::vector<std::string> dirs;
  for (const std::string m : {"drlc", "dcm", "ubm", "dbn"}) {
    dirs.push_back((root / ("model_" + m)).string());
    fails += cli({"train", "--model", m, "--data", (root / "data").string(), "--config",
                  cfg.string(), "--out", dirs.back()});
  }
  fails += cli({"evaluate", "--model", dirs.front(), "--data", (root / "data").string(), "--ks",
                "1,3,5,10", "--report", (root / "eval.json").string(), "--csv",
                (root / "eval.csv").string()});
  std::vector<std::string> cmp{"compare", "--models"};
  cmp.insert(cmp.end(), dirs.begin(), dirs.end());
  for (const std::string& a : std::vector<std::string>{"--data", (root / "data").string(),
                                                        "--report", (root / "compare.json").string()}) {
    cmp.push_back(a);
  }
  fails += cli(cmp);
  fails += cli({"convert", "--from", "interactive-csv", "--in", (root.parent_path() / "table1.csv").string(),
                "--out", (root / "table1.tsv").string()});
  return fails;
}

const char* kTable1 =
    "visitor ID,session id,date,time,searchterm,click sku,atc sku,order sku,product impression\n"
    "1000,1000-mobile-1,6/1/2020,6:30 pm,everbilt dropcloth,2034,,,3072|2034|2037|2036\n"
    "1000,1000-mobile-1,6/1/2020,6:34 pm,pull down shades,3022,3022,3022,3022|2051|3042|2071\n"
    "1001,1001-mobile-1,6/1/2020,6:36pm,fence panel,,,,2030|1003|2029|1000\n";

Outcome reproducibility(const fs::path& work) {
  Outcome o;
  const auto cfg = work / "repro.cfg";
  std::ofstream(cfg) << "seed = 11\nsim.queries = 60\ndrlc.epochs = 2\ndrlc.pretrain_epochs = 1\n";
  std::ofstream(work / "table1.csv") << kTable1;
  const int fails = pipeline(cfg, work / "run_a") + pipeline(cfg, work / "run_b");
  const auto a = checksums(work / "run_a");
  const auto b = checksums(work / "run_b");
  std::size_t differing = 0;
  for (const auto& [name, sum] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second != sum) ++differing;
  }

  SimConfig sc;
  sc.n_queries = kRoundTripImpressions / sc.impressions_per_query;
  sc.seed = 12;
  const auto imps = simulate_logs(sc).first.impressions;
  std::stringstream first;
  write_canonical(first, imps);
  const auto text = first.str();
  const auto back = read_canonical(first);
  std::ostringstream second;
  write_canonical(second, back);
  bool same = back.size() == imps.size();
  for (std::size_t i = 0; same && i < imps.size(); ++i) {
    same = back[i].session_id == imps[i].session_id && back[i].query_id == imps[i].query_id &&
           back[i].doc_ids == imps[i].doc_ids && back[i].clicks == imps[i].clicks;
  }
  o.detail << a.size() << " files over simulate/train x4/evaluate/compare/convert, " << differing
           << " differ, " << fails << " failed commands; canonical round trip of " << imps.size()
           << " impressions " << (same && second.str() == text ? "exact" : "BROKEN");
  o.require(fails == 0, "all commands succeed");
  o.require(a.size() == b.size() && differing == 0 && !a.empty(), "identical checksums");
  o.require(imps.size() >= kRoundTripImpressions, "1e4 impressions");
  o.require(same && second.str() == text, "parser round trip");
  return o;
}

// --- 8. Table-1 rows ---

Outcome table_one(const fs::path& work) {
  Outcome o;
  std::ifstream in(work / "run_a" / "table1.tsv");
  const auto imps = read_canonical(in);
  std::vector<std::string> bits;
  for (const auto& i : imps) {
    std::string b;
    for (auto c : i.clicks) b += c ? '1' : '0';
    bits.push_back(b);
  }
  for (std::size_t i = 0; i < bits.size(); ++i) o.detail << (i ? ", " : "") << bits[i];
  o.require(bits == std::vector<std::string>{"0100", "1000", "0000"}, "0100, 1000, 0000");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const auto work = fs::temp_directory_path() / ("clickrl_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(work);
  fs::create_directories(work);

  std::vector<std::string> lines, seed_lines;
  bool all = true;
  const auto report = [&](int n, const std::string& name, const Outcome& o) {
    const std::string line = "criterion " + std::to_string(n) + " (" + name + "): " +
                             (o.pass ? "PASS" : "FAIL") + " | " + o.detail.str();
    std::cout << line << std::endl;
    lines.push_back(line);
    all = all && o.pass;
  };
  const auto t0 = Clock::now();
  try {
    report(1, "gradient correctness", gradients());
    report(2, "EM soundness", em());
    report(3, "metric closed forms", metrics());
    report(6, "episode mechanics", mechanics());
    report(7, "reproducibility", reproducibility(work));
    report(8, "Table-1 fidelity", table_one(work));
    const auto rec = recovery();
    report(4, "de-bias recovery", rec.c4);
    report(5, "perplexity vs baselines", rec.c5);
    seed_lines = rec.seed_lines;
  } catch (const std::exception& e) {
    std::cout << "error: " << e.what() << std::endl;
    all = false;
  }
  fs::remove_all(work);
  std::sort(lines.begin(), lines.end(), [](const std::string& a, const std::string& b) {
    return std::stoi(a.substr(10)) < std::stoi(b.substr(10));
  });
  const std::string summary = std::string("overall: ") + (all ? "PASS" : "FAIL") + " (" +
                              fmt(seconds_since(t0) / 60, 1) + " min)";
  std::cout << summary << std::endl;
  if (argc > 1) {
    std::ofstream out(argv[1]);
    for (const auto& l : lines) out << l << "\n";
    out << summary << "\n";
    for (const auto& l : seed_lines) out << l << "\n";
  }
  return all ? 0 : 1;
}
