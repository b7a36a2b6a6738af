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

#ifndef TERRAINSEG_EXPERIMENT_HPP_
#define TERRAINSEG_EXPERIMENT_HPP_

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "terrainseg/manifest.hpp"
#include "terrainseg/metrics.hpp"
#include "terrainseg/nn/model.hpp"
#include "terrainseg/train.hpp"

namespace terrainseg {

// Axis names a grid may sweep.
const std::vector<std::string>& known_axes();

struct GridAxis {
  std::string name;
  std::vector<nlohmann::json> values;
};

struct ExperimentGrid {
  std::string name;
  nlohmann::json base;  // sections: data, composition, backbone, loss, train, eval, output
  std::vector<GridAxis> axes;
  std::vector<nlohmann::json> exclude;  // partial axis assignments to skip
  std::filesystem::path output_dir;
  std::filesystem::path config_dir;  // relative paths resolve against this

  static ExperimentGrid from_json(const nlohmann::json& j, const std::filesystem::path& config_dir = {});
  static ExperimentGrid load(const std::filesystem::path& path);
};

struct GridCell {
  nlohmann::json axes;    // axis name -> value, in grid order
  nlohmann::json config;  // base with the axis values applied
  std::string digest;     // sha256 of config without the output section
};

std::string cell_digest(const nlohmann::json& config);
std::vector<GridCell> expand_grid(const ExperimentGrid& grid);

// Static checks of one resolved cell config; CONFIG_ERROR on failure.
void validate_cell_config(const nlohmann::json& config);
// Expands and validates every cell without executing anything.
std::size_t validate_grid(const ExperimentGrid& grid);

enum class CellStatus { kCompleted, kCached, kFailed };
std::string_view to_string(CellStatus status);

struct CellResult {
  std::string digest;
  nlohmann::json axes;
  CellStatus status = CellStatus::kCompleted;
  std::optional<std::string> error;
  std::map<std::string, EvalReport> reports;  // eval set name -> report
};

struct AggregateRow {
  nlohmann::json setting;  // axes without seed
  std::string eval_set;
  std::string metric;
  std::vector<double> values;  // one per seed, in cell order
  double mean = 0.0;
  std::optional<double> ci_low;  // Student-t 95%, needs >= 2 values
  std::optional<double> ci_high;
};

struct SweepResult {
  std::string name;
  std::vector<std::string> axis_names;
  TaxonomyVariant taxonomy = TaxonomyVariant::kFourClass;
  std::vector<CellResult> cells;
  std::vector<AggregateRow> aggregates;
  std::vector<std::string> failed_cells;

  std::vector<const CellResult*> successful() const;
};

struct StudentInterval {
  double mean = 0.0;
  std::optional<double> low;
  std::optional<double> high;
};
StudentInterval student_t_interval(const std::vector<double>& values, double confidence = 0.95);

// Metric names: accuracy, f1_macro, miou, recall_<class>.
std::vector<AggregateRow> aggregate(const SweepResult& result);

struct RunOptions {
  int workers = 1;
  std::optional<std::filesystem::path> data_root;
  std::function<void(const CellResult&)> on_cell;
};

// Data root precedence: RunOptions, TERRAINSEG_DATA_ROOT, data.root, config dir.
std::filesystem::path resolve_data_root(const ExperimentGrid& grid, const RunOptions& options);

DatasetManifest build_training_manifest(const nlohmann::json& config, const std::filesystem::path& data_root);

// Compose, train and evaluate one cell inside dir. Skips the work when every
// report already exists and resumes from dir/checkpoints/last.tsck.
CellResult run_cell(const GridCell& cell, const std::filesystem::path& dir, const std::filesystem::path& data_root);

SweepResult run_grid(const ExperimentGrid& grid, const RunOptions& options = {});

// Rebuilds a sweep from the files under output_dir.
SweepResult load_sweep(const std::filesystem::path& output_dir);

void write_sweep_summary(const SweepResult& result, const std::filesystem::path& output_dir);
nlohmann::json to_json(const AggregateRow& row);

}  // namespace terrainseg

#endif  // TERRAINSEG_EXPERIMENT_HPP_
