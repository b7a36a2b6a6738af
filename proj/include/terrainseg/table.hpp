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

#ifndef TERRAINSEG_TABLE_HPP_
#define TERRAINSEG_TABLE_HPP_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "terrainseg/experiment.hpp"

namespace terrainseg {

enum class TableFormat { kMarkdown, kCsv, kLatex };
std::string_view to_string(TableFormat format);
std::optional<TableFormat> parse_table_format(std::string_view text);

struct TableOptions {
  std::string recall_class = "big_rock";
  std::vector<std::string> eval_sets;  // empty means every set
  nlohmann::json filter = nlohmann::json::object();  // partial setting to match
};

// Column headers after the setting columns.
std::vector<std::string> metric_columns(const ClassTaxonomy& taxonomy, const std::string& recall_class);

// One row per (setting, eval set). Returns an EMPTY_SELECTION message when
// nothing matches.
std::string emit_table(const SweepResult& result, TableFormat format, const TableOptions& options = {});

}  // namespace terrainseg

#endif  // TERRAINSEG_TABLE_HPP_
