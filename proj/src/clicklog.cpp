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

#include "clickrl/clicklog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "clickrl/error.hpp"
#include "clickrl/text.hpp"

namespace clickrl {

void validate(const Impression& imp, std::size_t max_positions) {
  if (imp.doc_ids.empty()) throw ValidationError("impression has no documents");
  if (imp.doc_ids.size() != imp.clicks.size()) {
    throw ValidationError("impression has " + std::to_string(imp.doc_ids.size()) +
                          " documents but " + std::to_string(imp.clicks.size()) +
                          " click flags");
  }
  if (imp.doc_ids.size() > max_positions) {
    throw ValidationError("impression has " + std::to_string(imp.doc_ids.size()) +
                          " positions, limit is " + std::to_string(max_positions));
  }
  for (auto c : imp.clicks) {
    if (c > 1) throw ValidationError("click flag must be 0 or 1");
  }
}

std::optional<int> last_click_position(const Impression& imp) {
  for (std::size_t i = imp.clicks.size(); i > 0; --i) {
    if (imp.clicks[i - 1]) return static_cast<int>(i);
  }
  return std::nullopt;
}

Impression parse_canonical(std::string_view line, std::size_t line_no) {
  line = text::strip_eol(line);
  auto fields = text::split(line, '\t');
  if (fields.size() != 4) {
    throw ParseError(line_no, "expected 4 tab-separated fields, got " +
                                  std::to_string(fields.size()));
  }
  Impression imp;
  imp.session_id = std::string(fields[0]);
  imp.query_id = std::string(fields[1]);
  for (auto d : text::split(fields[2], '|')) {
    if (d.empty()) throw ParseError(line_no, "empty document id");
    imp.doc_ids.emplace_back(d);
  }
  const auto bits = fields[3];
  if (bits.size() != imp.doc_ids.size()) {
    throw ParseError(line_no, "click string has " + std::to_string(bits.size()) +
                                  " flags for " + std::to_string(imp.doc_ids.size()) +
                                  " documents");
  }
  imp.clicks.reserve(bits.size());
  for (char c : bits) {
    if (c != '0' && c != '1') {
      throw ParseError(line_no, std::string("click flag '") + c + "' is not 0 or 1");
    }
    imp.clicks.push_back(c == '1');
  }
  if (imp.doc_ids.size() > kMaxPositions) {
    throw ParseError(line_no, "more than " + std::to_string(kMaxPositions) + " positions");
  }
  return imp;
}

std::string write_canonical(const Impression& imp) {
  std::string out = imp.session_id;
  out.push_back('\t');
  out += imp.query_id;
  out.push_back('\t');
  for (std::size_t i = 0; i < imp.doc_ids.size(); ++i) {
    if (i) out.push_back('|');
    out += imp.doc_ids[i];
  }
  out.push_back('\t');
  for (auto c : imp.clicks) out.push_back(c ? '1' : '0');
  return out;
}

std::vector<Impression> read_canonical(std::istream& in) {
  std::vector<Impression> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = text::strip_eol(line);
    if (view.empty() || view.front() == '#') continue;
    out.push_back(parse_canonical(line, line_no));
  }
  return out;
}

void write_canonical(std::ostream& out, const std::vector<Impression>& imps) {
  for (const auto& imp : imps) out << write_canonical(imp) << '\n';
}

std::vector<std::string> split_csv_row(std::string_view row, std::size_t line_no) {
  row = text::strip_eol(row);
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < row.size(); ++i) {
    const char c = row[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < row.size() && row[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw ParseError(line_no, "unterminated quoted field");
  fields.push_back(std::move(cur));
  return fields;
}

InteractiveColumns InteractiveColumns::from_header(std::string_view header_row) {
  const auto names = split_csv_row(header_row, 1);
  auto find = [&](std::string_view name) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (text::trim(names[i]) == name) return i;
    }
    throw ParseError(1, "header is missing column '" + std::string(name) + "'");
  };
  InteractiveColumns cols;
  // All nine columns must be present even though only four are used.
  find("visitor ID");
  find("date");
  find("time");
  find("atc sku");
  find("order sku");
  cols.session = find("session id");
  cols.searchterm = find("searchterm");
  cols.click_sku = find("click sku");
  cols.impressions = find("product impression");
  cols.n_columns = names.size();
  return cols;
}

Impression parse_interactive_csv(std::string_view row, const InteractiveColumns& cols,
                                 std::size_t line_no) {
  const auto fields = split_csv_row(row, line_no);
  if (fields.size() != cols.n_columns) {
    throw ParseError(line_no, "expected " + std::to_string(cols.n_columns) + " columns, got " +
                                  std::to_string(fields.size()));
  }
  Impression imp;
  imp.session_id = std::string(text::trim(fields[cols.session]));
  imp.query_id = std::string(text::trim(fields[cols.searchterm]));
  const auto list = text::trim(fields[cols.impressions]);
  if (list.empty()) throw ParseError(line_no, "empty product impression list");
  for (auto sku : text::split(list, '|')) {
    sku = text::trim(sku);
    if (sku.empty()) throw ParseError(line_no, "empty sku in product impression list");
    imp.doc_ids.emplace_back(sku);
  }
  if (imp.doc_ids.size() > kMaxPositions) {
    throw ParseError(line_no, "more than " + std::to_string(kMaxPositions) + " impressions");
  }
  imp.clicks.assign(imp.doc_ids.size(), 0);
  const auto click_field = text::trim(fields[cols.click_sku]);
  if (!click_field.empty()) {
    for (auto sku : text::split(click_field, ',')) {
      sku = text::trim(sku);
      if (sku.empty()) continue;
      bool found = false;
      for (std::size_t i = 0; i < imp.doc_ids.size(); ++i) {
        if (imp.doc_ids[i] == sku) {
          imp.clicks[i] = 1;
          found = true;
        }
      }
      if (!found) {
        throw ParseError(line_no,
                         "click sku " + std::string(sku) + " is not in the impression list");
      }
    }
  }
  return imp;
}

InteractiveConversion convert_interactive_csv(std::istream& in) {
  InteractiveConversion result;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing header row");
  const auto cols = InteractiveColumns::from_header(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      result.impressions.push_back(parse_interactive_csv(line, cols, line_no));
    } catch (const ParseError& e) {
      ++result.skipped_rows;
      result.diagnostics.emplace_back(e.what());
    }
  }
  return result;
}

void Dataset::require_features() const {
  for (const auto& imp : impressions) {
    for (const auto& d : imp.doc_ids) {
      if (!features.index_of(imp.query_id, d)) {
        throw ValidationError("no features for (" + imp.query_id + ", " + d + ")");
      }
    }
  }
}

Dataset load_dataset_dir(const std::string& dir) {
  Dataset ds;
  std::ifstream clicks(dir + "/clicks.tsv");
  if (!clicks) throw ValidationError("cannot open " + dir + "/clicks.tsv");
  ds.impressions = read_canonical(clicks);
  std::ifstream feats(dir + "/features.tsv");
  if (feats) ds.features = read_feature_tsv(feats);
  return ds;
}

DatasetSplits split_dataset(const Dataset& ds, const SplitRatios& ratios, std::uint64_t seed) {
  const double r[3] = {ratios.train, ratios.valid, ratios.test};
  for (double x : r) {
    if (!(x > 0.0)) throw ValidationError("split ratios must be positive");
  }
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) {
    throw ValidationError("split ratios must sum to 1");
  }

  std::vector<std::string_view> sessions;
  std::unordered_map<std::string_view, std::size_t> session_index;
  for (const auto& imp : ds.impressions) {
    if (session_index.emplace(imp.session_id, sessions.size()).second) {
      sessions.push_back(imp.session_id);
    }
  }
  const std::size_t n = sessions.size();

  // Largest-remainder apportionment of sessions to splits.
  std::size_t counts[3];
  double frac[3];
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = r[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    frac[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i) {
      if (frac[i] > frac[best]) best = i;
    }
    ++counts[best];
    frac[best] = -1.0;
    ++assigned;
  }
  for (int i = 0; i < 3; ++i) {
    if (counts[i] == 0) {
      static const char* names[] = {"train", "valid", "test"};
      throw ValidationError(std::string("split '") + names[i] + "' would be empty (" +
                            std::to_string(n) + " sessions)");
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::uint8_t> which(n);
  for (std::size_t i = 0; i < n; ++i) {
    which[order[i]] = i < counts[0] ? 0 : (i < counts[0] + counts[1] ? 1 : 2);
  }

  DatasetSplits out;
  Dataset* parts[3] = {&out.train, &out.valid, &out.test};
  for (auto* p : parts) p->features = ds.features;
  for (const auto& imp : ds.impressions) {
    parts[which[session_index.at(imp.session_id)]]->impressions.push_back(imp);
  }
  return out;
}

}  // namespace clickrl
