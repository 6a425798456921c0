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

#include <istream>
#include <ostream>
#include <string>

#include "clickrl/error.hpp"
#include "clickrl/pgm.hpp"
#include "clickrl/text.hpp"

namespace clickrl::pgm {

namespace {

void write_pairs(std::ostream& out, const char* table, const PairMap& m) {
  for (const auto& [key, v] : m) {
    out << table << '\t' << key.first << '\t' << key.second << '\t' << text::format_double(v) << '\n';
  }
}

double unit_value(std::string_view s, std::size_t line) {
  const double v = text::parse_double(s, line);
  if (!(v >= 0.0 && v <= 1.0)) throw ParseError(line, "probability out of [0,1]: " + std::string(s));
  return v;
}

}  // namespace

void write_params(std::ostream& out, const PgmParams& params, int iterations) {
  out << "#model\t" << model_name(params) << "\titerations\t" << iterations << '\n';
  if (const auto* p = std::get_if<DcmParams>(&params)) {
    out << "prior\t" << text::format_double(p->prior) << '\n';
    for (std::size_t r = 0; r < p->lambda.size(); ++r) {
      out << "lambda\t" << r + 1 << '\t' << text::format_double(p->lambda[r]) << '\n';
    }
    write_pairs(out, "attractiveness", p->attractiveness);
  } else if (const auto* p = std::get_if<UbmParams>(&params)) {
    out << "prior\t" << text::format_double(p->prior) << '\n';
    for (std::size_t r = 0; r < p->exam.size(); ++r) {
      for (std::size_t prev = 0; prev < p->exam[r].size(); ++prev) {
        out << "exam\t" << r + 1 << '\t' << prev << '\t' << text::format_double(p->exam[r][prev]) << '\n';
      }
    }
    write_pairs(out, "alpha", p->alpha);
  } else {
    const auto& d = std::get<DbnParams>(params);
    out << "prior\t" << text::format_double(d.prior) << '\n';
    out << "persevere\t" << text::format_double(d.persevere) << '\n';
    write_pairs(out, "attract", d.attract);
    write_pairs(out, "satisfy", d.satisfy);
  }
}

PgmParams read_params(std::istream& in, int* iterations) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw FormatError("empty parameter file");
  ++line_no;
  const auto head = text::split(text::strip_eol(line), '\t');
  if (head.size() != 4 || head[0] != "#model" || head[2] != "iterations") {
    throw ParseError(line_no, "expected '#model\\t<name>\\titerations\\t<n>' header");
  }
  if (iterations) *iterations = static_cast<int>(text::parse_int(head[3], line_no));
  PgmParams params;
  if (head[1] == "dcm") {
    params = DcmParams{};
  } else if (head[1] == "ubm") {
    params = UbmParams{};
  } else if (head[1] == "dbn") {
    params = DbnParams{};
  } else {
    throw ParseError(line_no, "unknown model '" + std::string(head[1]) + "'");
  }

  while (std::getline(in, line)) {
    ++line_no;
    const auto sv = text::strip_eol(line);
    if (sv.empty() || sv.front() == '#') continue;
    const auto f = text::split(sv, '\t');
    const std::string table(f[0]);
    auto need = [&](std::size_t n) {
      if (f.size() != n) throw ParseError(line_no, "'" + table + "' row needs " + std::to_string(n) + " fields");
    };
    auto pair_row = [&](PairMap& m) {
      need(4);
      m[{std::string(f[1]), std::string(f[2])}] = unit_value(f[3], line_no);
    };
    if (table == "prior") {
      need(2);
      const double v = unit_value(f[1], line_no);
      std::visit([&](auto& p) { p.prior = v; }, params);
    } else if (auto* p = std::get_if<DcmParams>(&params)) {
      if (table == "lambda") {
        need(3);
        const auto r = text::parse_int(f[1], line_no);
        if (r < 1 || r > 1000) throw ParseError(line_no, "bad rank");
        if (p->lambda.size() < static_cast<std::size_t>(r)) p->lambda.resize(r, kInitValue);
        p->lambda[r - 1] = unit_value(f[2], line_no);
      } else if (table == "attractiveness") {
        pair_row(p->attractiveness);
      } else {
        throw ParseError(line_no, "unexpected row '" + table + "' for dcm");
      }
    } else if (auto* p = std::get_if<UbmParams>(&params)) {
      if (table == "exam") {
        need(4);
        const auto r = text::parse_int(f[1], line_no);
        const auto prev = text::parse_int(f[2], line_no);
        if (r < 1 || r > 1000 || prev < 0 || prev >= r) throw ParseError(line_no, "bad exam ranks");
        if (p->exam.size() < static_cast<std::size_t>(r)) {
          const auto old = p->exam.size();
          p->exam.resize(r);
          for (std::size_t k = old; k < p->exam.size(); ++k) p->exam[k].assign(k + 1, kInitValue);
        }
        p->exam[r - 1][prev] = unit_value(f[3], line_no);
      } else if (table == "alpha") {
        pair_row(p->alpha);
      } else {
        throw ParseError(line_no, "unexpected row '" + table + "' for ubm");
      }
    } else {
      auto& d = std::get<DbnParams>(params);
      if (table == "persevere") {
        need(2);
        d.persevere = unit_value(f[1], line_no);
      } else if (table == "attract") {
        pair_row(d.attract);
      } else if (table == "satisfy") {
        pair_row(d.satisfy);
      } else {
        throw ParseError(line_no, "unexpected row '" + table + "' for dbn");
      }
    }
  }
  return params;
}

}  // namespace clickrl::pgm
