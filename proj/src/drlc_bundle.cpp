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

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "clickrl/drlc.hpp"
#include "clickrl/error.hpp"

namespace clickrl::drlc {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

constexpr int kBundleVersion = 1;
constexpr const char* kManifest = "manifest.json";
constexpr const char* kC1File = "c1.ckpt";
constexpr const char* kC2File = "c2.ckpt";
constexpr const char* kNormFile = "norm.tsv";

ordered_json hyper_json(const Hyper& hp) {
  ordered_json j;
  j["beta"] = hp.beta;
  j["theta"] = hp.theta;
  j["window_size"] = hp.window_size;
  j["discount"] = hp.discount;
  j["epochs"] = hp.epochs;
  j["pretrain_epochs"] = hp.pretrain_epochs;
  j["patience"] = hp.patience;
  j["epsilon"] = hp.epsilon;
  j["inclusive_last_click"] = hp.inclusive_last_click;
  j["optimizer"] = hp.opt.method == nn::OptConfig::Method::kSgd ? "sgd" : "momentum";
  j["learning_rate"] = hp.opt.learning_rate;
  j["momentum"] = hp.opt.momentum;
  j["batch_size"] = hp.opt.batch_size;
  j["weight_decay"] = hp.opt.weight_decay;
  j["seed"] = hp.seed;
  return j;
}

Hyper hyper_from_json(const ordered_json& j) {
  Hyper hp;
  hp.beta = j.at("beta").get<double>();
  hp.theta = j.at("theta").get<double>();
  hp.window_size = j.at("window_size").get<int>();
  hp.discount = j.at("discount").get<double>();
  hp.epochs = j.at("epochs").get<int>();
  hp.pretrain_epochs = j.at("pretrain_epochs").get<int>();
  hp.patience = j.at("patience").get<int>();
  hp.epsilon = j.at("epsilon").get<double>();
  hp.inclusive_last_click = j.at("inclusive_last_click").get<bool>();
  const auto method = j.at("optimizer").get<std::string>();
  if (method == "sgd") {
    hp.opt.method = nn::OptConfig::Method::kSgd;
  } else if (method == "momentum") {
    hp.opt.method = nn::OptConfig::Method::kSgdMomentum;
  } else {
    throw FormatError("manifest: unknown optimizer '" + method + "'");
  }
  hp.opt.learning_rate = j.at("learning_rate").get<double>();
  hp.opt.momentum = j.at("momentum").get<double>();
  hp.opt.batch_size = j.at("batch_size").get<std::size_t>();
  hp.opt.weight_decay = j.at("weight_decay").get<double>();
  hp.seed = j.at("seed").get<std::uint64_t>();
  return hp;
}

}  // namespace

void save_model(const Model& m, const std::string& dir, const std::string& config_hash) {
  fs::create_directories(dir);
  const fs::path root(dir);
  nn::save_checkpoint(m.nets.c1, (root / kC1File).string());
  nn::save_checkpoint(m.nets.c2, (root / kC2File).string());
  {
    std::ofstream out(root / kNormFile, std::ios::binary);
    if (!out) throw Error("cannot write " + (root / kNormFile).string());
    m.norm.write(out);
  }
  ordered_json j;
  j["format"] = "clickrl-drlc";
  j["version"] = kBundleVersion;
  j["config_hash"] = config_hash;
  j["objective"] = "minimize squared-error cost";
  j["hyper"] = hyper_json(m.hp);
  j["files"] = {{"c1", kC1File}, {"c2", kC2File}, {"normalizer", kNormFile}};
  std::ofstream out(root / kManifest, std::ios::binary);
  if (!out) throw Error("cannot write " + (root / kManifest).string());
  out << j.dump(2) << '\n';
}

Model load_model(const std::string& dir) {
  const fs::path root(dir);
  std::ifstream in(root / kManifest, std::ios::binary);
  if (!in) throw ValidationError("no model manifest in " + dir);
  ordered_json j;
  try {
    j = ordered_json::parse(in);
    if (j.at("format").get<std::string>() != "clickrl-drlc") {
      throw FormatError("manifest: not a drlc bundle");
    }
    if (j.at("version").get<int>() != kBundleVersion) {
      throw FormatError("manifest: unsupported version");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  Hyper hp;
  try {
    hp = hyper_from_json(j.at("hyper"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  hp.validate();
  std::ifstream norm_in(root / kNormFile, std::ios::binary);
  if (!norm_in) throw ValidationError("missing " + (root / kNormFile).string());
  return Model{{nn::load_checkpoint((root / kC1File).string(), nn::NetKind::kBias),
                nn::load_checkpoint((root / kC2File).string(), nn::NetKind::kDebiased)},
               hp,
               MinMaxNormalizer::read(norm_in)};
}

}  // namespace clickrl::drlc
