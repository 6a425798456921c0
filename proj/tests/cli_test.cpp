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
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "clickrl/cli.hpp"
#include "clickrl/clicklog.hpp"
#include "clickrl/config.hpp"
#include "clickrl/error.hpp"

namespace clickrl::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_command(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << s;
}

/// name -> bytes of every regular file below `dir`.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return files;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / ("clickrl_cli_" + std::to_string(::getpid()));
    fs::remove_all(root_);
    spit(root_ / "small.cfg",
         "# tiny pipeline\n"
         "seed = 4\n"
         "sim.queries = 40\n"
         "drlc.epochs = 2\n"
         "drlc.pretrain_epochs = 1\n"
         "opt.batch_size = 32\n"
         "pgm.iterations = 20\n");
    ASSERT_EQ(run({"simulate", "--config", cfg(), "--out", path("data")}).code, kExitOk);
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static std::string cfg() { return (root_ / "small.cfg").string(); }
  static std::string path(const std::string& name) { return (root_ / name).string(); }

  static Outcome train(const std::string& model, const std::string& out) {
    return run({"train", "--model", model, "--data", path("data"), "--config", cfg(), "--out",
                path(out)});
  }

  static fs::path root_;
};

fs::path Cli::root_;

TEST_F(Cli, SimulateIsByteIdenticalOnRerun) {
  ASSERT_EQ(run({"simulate", "--config", cfg(), "--out", path("data_again")}).code, kExitOk);
  const auto a = snapshot(path("data"));
  EXPECT_EQ(a, snapshot(path("data_again")));
  EXPECT_EQ(a.size(), 4u);
  ASSERT_EQ(run({"simulate", "--config", cfg(), "--out", path("data_seed9"), "--seed", "9"}).code,
            kExitOk);
  EXPECT_NE(a.at("clicks.tsv"), slurp(path("data_seed9") + "/clicks.tsv"));
}

TEST_F(Cli, ArtifactsCarryConfigHash) {
  const auto hash = ExperimentConfig::load(cfg()).hash();
  const auto files = snapshot(path("data"));
  for (const auto& [name, body] : files) {
    EXPECT_NE(body.find(hash), std::string::npos) << name;
  }
  const auto manifest = json::parse(files.at("manifest.json"));
  for (const auto& name : {"clicks.tsv", "features.tsv", "truth.tsv"}) {
    EXPECT_EQ(manifest.at("sha256").at(name).get<std::string>(), sha256_hex(files.at(name)));
  }
  // The written dataset loads back whole.
  EXPECT_EQ(load_dataset_dir(path("data")).impressions.size(),
            manifest.at("impressions").get<std::size_t>());
}

TEST_F(Cli, TrainAndEvaluateAreByteIdenticalOnRerun) {
  const auto hash = ExperimentConfig::load(cfg()).hash();
  for (const std::string model : {"dcm", "ubm", "dbn", "drlc"}) {
    ASSERT_EQ(train(model, "m_" + model).code, kExitOk) << model;
    ASSERT_EQ(train(model, "m2_" + model).code, kExitOk) << model;
    const auto a = snapshot(path("m_" + model));
    EXPECT_EQ(a, snapshot(path("m2_" + model))) << model;
    const auto run_json = json::parse(a.at("run.json"));
    EXPECT_EQ(run_json.at("model"), model);
    EXPECT_EQ(run_json.at("config_hash"), hash);
    if (model == "ubm" || model == "dbn") {
      EXPECT_GE(run_json.at("best_iteration").get<int>(), 1);
      EXPECT_LE(run_json.at("best_iteration").get<int>(), 20);
    }

    const auto eval = [&](const std::string& name) {
      return run({"evaluate", "--model", path("m_" + model), "--data", path("data"), "--ks",
                  "1,3,5,10", "--report", path(name), "--csv", path(name + ".csv")});
    };
    ASSERT_EQ(eval("r_" + model + ".json").code, kExitOk);
    ASSERT_EQ(eval("r2_" + model + ".json").code, kExitOk);
    EXPECT_EQ(slurp(path("r_" + model + ".json")), slurp(path("r2_" + model + ".json")));
    EXPECT_EQ(slurp(path("r_" + model + ".json.csv")), slurp(path("r2_" + model + ".json.csv")));

    const auto report = json::parse(slurp(path("r_" + model + ".json")));
    std::set<std::string> keys;
    for (const auto& [k, v] : report.at("ndcg").items()) keys.insert(k);
    EXPECT_EQ(keys, (std::set<std::string>{"1", "3", "5", "10"})) << model;
    EXPECT_EQ(report.at("metadata").at("config_hash"), hash);
    EXPECT_GE(report.at("perplexity").get<double>(), 1.0);
  }
}

TEST_F(Cli, CompareRanksByPerplexity) {
  for (const std::string model : {"dcm", "ubm"}) ASSERT_EQ(train(model, "c_" + model).code, kExitOk);
  const auto r = run({"compare", "--models", path("c_dcm"), path("c_ubm"), "--data", path("data"),
                      "--report", path("cmp.json"), "--table"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = json::parse(slurp(path("cmp.json")));
  ASSERT_EQ(j.at("reports").size(), 2u);
  EXPECT_LE(j["reports"][0]["perplexity"].get<double>(), j["reports"][1]["perplexity"].get<double>());
  EXPECT_EQ(j["ranking"][0], j["reports"][0]["model"]);
  EXPECT_NE(r.out.find("NDCG@10"), std::string::npos);
  EXPECT_EQ(j.at("table").get<std::string>(), r.out);
}

TEST_F(Cli, ConvertTableOneExport) {
  spit(root_ / "table1.csv",
       "visitor ID,session id,date,time,searchterm,click sku,atc sku,order sku,product impression\n"
       "1000,1000-mobile-1,6/1/2020,6:30 pm,everbilt dropcloth,2034,,,3072|2034|2037|2036\n"
       "1000,1000-mobile-1,6/1/2020,6:34 pm,pull down shades,3022,3022,3022,3022|2051|3042|2071\n"
       "1001,1001-mobile-1,6/1/2020,6:36pm,fence panel,,,,2030|1003|2029|1000\n");
  const auto r = run({"convert", "--from", "interactive-csv", "--in", path("table1.csv"), "--out",
                      path("table1.tsv")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::ifstream in(path("table1.tsv"));
  const auto imps = read_canonical(in);
  ASSERT_EQ(imps.size(), 3u);
  std::vector<std::string> bits;
  for (const auto& i : imps) {
    std::string b;
    for (auto c : i.clicks) b += c ? '1' : '0';
    bits.push_back(b);
  }
  EXPECT_EQ(bits, (std::vector<std::string>{"0100", "1000", "0000"}));
  EXPECT_EQ(run({"convert", "--from", "xml", "--in", path("table1.csv"), "--out", path("x")}).code,
            kExitInvalid);
}

TEST_F(Cli, GradcheckExitCode) {
  const auto r = run({"gradcheck", "--seed", "7", "--trials", "3"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("max relative error"), std::string::npos);
}

TEST_F(Cli, BadInvocationsExitOne) {
  EXPECT_EQ(run({}).code, kExitInvalid);
  EXPECT_EQ(run({"frobnicate"}).code, kExitInvalid);
  EXPECT_EQ(run({"simulate", "--config", cfg(), "--out", path("z"), "--bogus"}).code, kExitInvalid);
  EXPECT_EQ(run({"simulate", "--out", path("z")}).code, kExitInvalid);
  EXPECT_EQ(run({"simulate", "--config", path("missing.cfg"), "--out", path("z")}).code,
            kExitInvalid);
  EXPECT_EQ(train("crf", "z").code, kExitInvalid);
  EXPECT_EQ(run({"train", "--model", "dcm", "--data", path("nowhere"), "--config", cfg(), "--out",
                 path("z")})
                .code,
            kExitInvalid);
  EXPECT_EQ(run({"evaluate", "--model", path("nowhere"), "--data", path("data"), "--report",
                 path("z.json")})
                .code,
            kExitInvalid);
  EXPECT_EQ(run({"gradcheck", "--seed", "1", "--trials", "0"}).code, kExitInvalid);

  spit(root_ / "bad_key.cfg", "seed = 1\nsim.quereis = 10\n");
  const auto r = run({"simulate", "--config", path("bad_key.cfg"), "--out", path("z")});
  EXPECT_EQ(r.code, kExitInvalid);
  EXPECT_NE(r.err.find("sim.quereis"), std::string::npos);
  EXPECT_NE(r.err.find("2"), std::string::npos);

  spit(root_ / "bad_value.cfg", "drlc.theta = 1.5\n");
  EXPECT_EQ(run({"simulate", "--config", path("bad_value.cfg"), "--out", path("z")}).code,
            kExitInvalid);
}

TEST_F(Cli, KeysListsEveryConfigKey) {
  const auto r = run({"keys"});
  ASSERT_EQ(r.code, kExitOk);
  for (const auto& k : ExperimentConfig::keys()) {
    EXPECT_NE(r.out.find(k.key + "\t"), std::string::npos) << k.key;
    EXPECT_FALSE(k.description.empty()) << k.key;
  }
}

// --- configuration ---

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return ExperimentConfig::parse(in);
}

TEST(Config, DefaultsAndOverrides) {
  const auto c = parse("# comment\n\nseed = 9\nsim.queries=12\neval.ks = 1,5\ndrlc.theta = 0.25\n");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.sim.seed, 9u);
  EXPECT_EQ(c.hyper.seed, 9u);
  EXPECT_EQ(c.sim.n_queries, 12u);
  EXPECT_EQ(c.ks, (std::vector<int>{1, 5}));
  EXPECT_DOUBLE_EQ(c.hyper.theta, 0.25);
  EXPECT_DOUBLE_EQ(c.hyper.beta, ExperimentConfig{}.hyper.beta);
}

TEST(Config, RejectsUnknownDuplicateAndMalformedLines) {
  EXPECT_THROW(parse("nope = 1\n"), ParseError);
  EXPECT_THROW(parse("seed = 1\nseed = 2\n"), ParseError);
  EXPECT_THROW(parse("seed\n"), ParseError);
  EXPECT_THROW(parse("sim.queries = many\n"), ParseError);
  EXPECT_THROW(parse("split.train = 0.9\nsplit.valid = 0.9\n"), ValidationError);
  try {
    parse("seed = 1\n\nbogus.key = 3\n");
    FAIL() << "no throw";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
  }
}

TEST(Config, CanonicalFormRoundTrips) {
  const auto c = parse("seed = 5\ndrlc.window_size = 4\nopt.learning_rate = 0.003\n");
  const auto again = parse(c.canonical());
  EXPECT_EQ(again.canonical(), c.canonical());
  EXPECT_EQ(again.hash(), c.hash());
  EXPECT_EQ(c.hash().size(), 64u);
}

TEST(Config, HashIgnoresPathsButNotSettings) {
  const auto base = parse("seed = 5\n");
  EXPECT_EQ(parse("seed = 5\npaths.data = /x\npaths.out = /y\n").hash(), base.hash());
  EXPECT_NE(parse("seed = 6\n").hash(), base.hash());
  EXPECT_NE(parse("seed = 5\ndrlc.beta = 0.5\n").hash(), base.hash());
  // Every non-path key feeds the hash.
  for (const auto& k : ExperimentConfig::keys()) {
    if (k.key.rfind("paths.", 0) == 0) continue;
    EXPECT_NE(base.canonical().find(k.key + "="), std::string::npos) << k.key;
  }
}

TEST(Config, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Config, CutoffList) {
  EXPECT_EQ(parse_ks("10,1,3"), (std::vector<int>{10, 1, 3}));
  EXPECT_THROW(parse_ks("1,,3"), ParseError);
  EXPECT_THROW(parse_ks("0"), ValidationError);
}

}  // namespace
}  // namespace clickrl::cli
