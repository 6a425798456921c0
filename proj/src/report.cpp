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
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "clickrl/error.hpp"
#include "clickrl/eval.hpp"
#include "clickrl/text.hpp"

namespace clickrl::eval {
namespace {

using nlohmann::ordered_json;

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::string to_json(const Report& r) {
  ordered_json j;
  j["model"] = r.model;
  j["dataset"] = r.dataset;
  j["impressions"] = r.impressions;
  j["log_likelihood"] = r.log_likelihood;
  j["perplexity"] = r.perplexity_overall;
  j["perplexity_per_rank"] = r.perplexity_per_rank;
  ordered_json nd = ordered_json::object();
  for (const auto& [k, v] : r.ndcg) nd[std::to_string(k)] = v;
  j["ndcg"] = nd;
  j["ndcg_skipped_clickless"] = r.ndcg_skipped;
  ordered_json meta = ordered_json::object();
  for (const auto& [k, v] : r.metadata) meta[k] = v;
  j["metadata"] = meta;
  return j.dump(2) + "\n";
}

Report report_from_json(const std::string& text) {
  try {
    const auto j = ordered_json::parse(text);
    Report r;
    r.model = j.at("model").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.impressions = j.at("impressions").get<std::size_t>();
    r.log_likelihood = j.at("log_likelihood").get<double>();
    r.perplexity_overall = j.at("perplexity").get<double>();
    r.perplexity_per_rank = j.at("perplexity_per_rank").get<std::vector<double>>();
    for (const auto& [k, v] : j.at("ndcg").items()) {
      r.ndcg[static_cast<int>(text::parse_int(k))] = v.get<double>();
    }
    r.ndcg_skipped = j.at("ndcg_skipped_clickless").get<std::size_t>();
    for (const auto& [k, v] : j.at("metadata").items()) r.metadata[k] = v.get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  } catch (const ParseError& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
}

std::string csv_header(std::span<const int> ks, std::size_t ranks) {
  std::string h = "model,dataset,impressions,log_likelihood,perplexity";
  for (int k : ks) h += ",ndcg@" + std::to_string(k);
  for (std::size_t r = 1; r <= ranks; ++r) h += ",perplexity_r" + std::to_string(r);
  return h + ",config_hash\n";
}

std::string csv_row(const Report& r, std::span<const int> ks, std::size_t ranks) {
  std::string row = csv_field(r.model) + "," + csv_field(r.dataset) + "," +
                    std::to_string(r.impressions) + "," + text::format_double(r.log_likelihood) +
                    "," + text::format_double(r.perplexity_overall);
  for (int k : ks) {
    const auto it = r.ndcg.find(k);
    row += ",";
    if (it != r.ndcg.end()) row += text::format_double(it->second);
  }
  for (std::size_t i = 0; i < ranks; ++i) {
    row += ",";
    if (i < r.perplexity_per_rank.size()) row += text::format_double(r.perplexity_per_rank[i]);
  }
  const auto hash = r.metadata.find("config_hash");
  row += "," + (hash == r.metadata.end() ? std::string() : csv_field(hash->second));
  return row + "\n";
}

void sort_for_compare(std::vector<Report>& reports) {
  std::stable_sort(reports.begin(), reports.end(), [](const Report& a, const Report& b) {
    if (a.perplexity_overall != b.perplexity_overall) {
      return a.perplexity_overall < b.perplexity_overall;
    }
    return a.model < b.model;
  });
}

std::string render_table(const std::vector<Report>& reports, std::span<const int> ks) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head{"Model", "Perplexity", "Log-likelihood"};
  for (int k : ks) head.push_back("NDCG@" + std::to_string(k));
  rows.push_back(head);
  for (const auto& r : reports) {
    std::vector<std::string> row{r.model, fixed(r.perplexity_overall, 4), fixed(r.log_likelihood, 4)};
    for (int k : ks) {
      const auto it = r.ndcg.find(k);
      row.push_back(it == r.ndcg.end() ? "-" : fixed(it->second, 4));
    }
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      const auto& cell = rows[i][c];
      const auto pad = std::string(width[c] - cell.size(), ' ');
      out << (c == 0 ? cell + pad : "  " + pad + cell);
    }
    out << '\n';
    if (i == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      out << std::string(total - 2, '-') << '\n';
    }
  }
  return out.str();
}

}  // namespace clickrl::eval
