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

#ifndef TERRAINSEG_PLOT_HPP_
#define TERRAINSEG_PLOT_HPP_

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "terrainseg/experiment.hpp"

namespace terrainseg {

enum class PlotKind { kProportionCurve, kLabelFractionCurve, kConfusionHeatmap, kClassDistribution, kModelSizeCurve };
std::string_view to_string(PlotKind kind);
std::optional<PlotKind> parse_plot_kind(std::string_view text);

struct PlotOptions {
  std::vector<std::string> metrics = {"accuracy", "f1_macro"};
  std::vector<std::string> eval_sets;  // empty means every set in the result
  // Horizontal dashed line per (eval set, metric), keyed "set/metric" or "metric".
  std::map<std::string, double> reference_lines;
  int width = 720;
  int height = 480;
};

struct PlotArtifact {
  std::filesystem::path image;
  std::filesystem::path data;  // CSV with the plotted numbers
  std::string eval_set;
  std::string metric;  // empty for heatmaps and distributions
  std::string setting;
};

// Curves draw the seed mean per series and a 95% band where n >= 2.
// Throws MISSING_AXIS when the sweep lacks the axis the kind plots against
// or holds no successful cell.
std::vector<PlotArtifact> plot_sweep(const SweepResult& result, PlotKind kind,
                                     const std::filesystem::path& output_dir, const PlotOptions& options = {});

struct HeatmapLayout {
  int left = 0;
  int top = 0;
  int cell = 0;  // side of one matrix cell in pixels
};
HeatmapLayout heatmap_layout(int num_classes, int size);

// Renders one row-normalized confusion matrix.
void render_confusion_heatmap(const ConfusionMatrix& cm, const ClassTaxonomy& taxonomy, const std::string& title,
                              const std::filesystem::path& image, int size = 480);

}  // namespace terrainseg

#endif  // TERRAINSEG_PLOT_HPP_
