/* Copyright 2026 The terrainseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "terrainseg/table.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "terrainseg/error.hpp"

namespace terrainseg {
namespace {

using nlohmann::json;

struct Row {
  json setting;
  std::string eval_set;
  std::map<std::string, const AggregateRow*> metrics;
};

std::string value_text(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

bool matches(const json& setting, const json& filter) {
  for (const auto& [name, value] : filter.items()) {
    if (!setting.contains(name) || setting.at(name) != value) return false;
  }
  return true;
}

std::string escape_latex(const std::string& text) {
  std::string out;
  for (char c : text) {
    if (c == '_' || c == '%' || c == '&' || c == '#') out += '\\';
    out += c;
  }
  return out;
}

std::string escape_csv(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::string_view to_string(TableFormat format) {
  switch (format) {
    case TableFormat::kMarkdown:
      return "markdown";
    case TableFormat::kCsv:
      return "csv";
    case TableFormat::kLatex:
      return "latex";
  }
  return "markdown";
}

std::optional<TableFormat> parse_table_format(std::string_view text) {
  if (text == "markdown" || text == "md") return TableFormat::kMarkdown;
  if (text == "csv") return TableFormat::kCsv;
  if (text == "latex" || text == "tex") return TableFormat::kLatex;
  return std::nullopt;
}

std::vector<std::string> metric_columns(const ClassTaxonomy& taxonomy, const std::string& recall_class) {
  const auto index = taxonomy.index_of(recall_class);
  if (!index) throw Error(ErrorCode::kConfigError, "taxonomy has no class " + recall_class);
  return {"Accuracy", "F1 Macro", "mIoU", taxonomy.display_name(*index) + " Recall"};
}

std::string emit_table(const SweepResult& result, TableFormat format, const TableOptions& options) {
  const ClassTaxonomy taxonomy = make_taxonomy(result.taxonomy);
  const auto headers = metric_columns(taxonomy, options.recall_class);
  const std::vector<std::string> keys = {"accuracy", "f1_macro", "miou", "recall_" + options.recall_class};

  std::vector<std::string> setting_columns;
  for (const auto& a : result.axis_names) {
    if (a != "seed") setting_columns.push_back(a);
  }

  std::vector<Row> rows;
  std::map<std::string, std::size_t> index;
  for (const auto& agg : result.aggregates) {
    if (!options.eval_sets.empty() &&
        std::find(options.eval_sets.begin(), options.eval_sets.end(), agg.eval_set) == options.eval_sets.end()) {
      continue;
    }
    if (!matches(agg.setting, options.filter)) continue;
    const std::string key = agg.setting.dump() + '\n' + agg.eval_set;
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, rows.size()).first;
      rows.push_back({agg.setting, agg.eval_set, {}});
    }
    rows[it->second].metrics[agg.metric] = &agg;
  }
  if (rows.empty()) {
    return fmt::format("EMPTY_SELECTION: no aggregate in sweep '{}' matches the requested filter\n", result.name);
  }

  std::vector<std::string> header = setting_columns;
  header.emplace_back("Eval Set");
  header.emplace_back("Seeds");
  header.insert(header.end(), headers.begin(), headers.end());

  std::vector<std::vector<std::string>> body;
  for (const auto& row : rows) {
    std::vector<std::string> cells;
    for (const auto& c : setting_columns) cells.push_back(row.setting.contains(c) ? value_text(row.setting.at(c)) : "");
    cells.push_back(row.eval_set);
    const auto first = row.metrics.find("accuracy");
    cells.push_back(first == row.metrics.end() ? "0" : std::to_string(first->second->values.size()));
    for (const auto& k : keys) {
      const auto it = row.metrics.find(k);
      if (it == row.metrics.end()) {
        cells.emplace_back(format == TableFormat::kCsv ? "" : "n/a");
        continue;
      }
      const AggregateRow& a = *it->second;
      const bool band = a.ci_low && a.ci_high;
      const double half = band ? (*a.ci_high - *a.ci_low) / 2.0 : 0.0;
      switch (format) {
        case TableFormat::kCsv:
          cells.push_back(band ? fmt::format("{:.6f} +/- {:.6f}", a.mean, half) : fmt::format("{:.6f}", a.mean));
          break;
        case TableFormat::kLatex:
          cells.push_back(band ? fmt::format("${:.3f} \\pm {:.3f}$", a.mean, half) : fmt::format("{:.3f}", a.mean));
          break;
        case TableFormat::kMarkdown:
          cells.push_back(band ? fmt::format("{:.3f} ± {:.3f}", a.mean, half) : fmt::format("{:.3f}", a.mean));
          break;
      }
    }
    body.push_back(std::move(cells));
  }

  std::ostringstream out;
  switch (format) {
    case TableFormat::kMarkdown: {
      auto line = [&](const std::vector<std::string>& cells) {
        out << '|';
        for (const auto& c : cells) out << ' ' << c << " |";
        out << '\n';
      };
      line(header);
      out << '|';
      for (std::size_t i = 0; i < header.size(); ++i) out << (i < setting_columns.size() + 1 ? " --- |" : " ---: |");
      out << '\n';
      for (const auto& r : body) line(r);
      break;
    }
    case TableFormat::kCsv: {
      auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << escape_csv(cells[i]);
        out << '\n';
      };
      line(header);
      for (const auto& r : body) line(r);
      break;
    }
    case TableFormat::kLatex: {
      out << "\\begin{tabular}{" << std::string(setting_columns.size() + 1, 'l')
          << std::string(header.size() - setting_columns.size() - 1, 'r') << "}\n\\hline\n";
      auto line = [&](const std::vector<std::string>& cells, bool escape) {
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? " & " : "") << (escape ? escape_latex(cells[i]) : cells[i]);
        out << " \\\\\n";
      };
      line(header, true);
      out << "\\hline\n";
      for (auto r : body) {
        for (std::size_t i = 0; i <= setting_columns.size(); ++i) r[i] = escape_latex(r[i]);
        line(r, false);
      }
      out << "\\hline\n\\end{tabular}\n";
      break;
    }
  }
  return out.str();
}

}  // namespace terrainseg
