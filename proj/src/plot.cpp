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

#include "terrainseg/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include <fmt/format.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "terrainseg/error.hpp"

namespace terrainseg {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

const cv::Scalar kWhite(255, 255, 255);
const cv::Scalar kBlack(0, 0, 0);
const cv::Scalar kGrid(225, 225, 225);
const std::vector<cv::Scalar> kPalette = {{180, 119, 31}, {14, 127, 255}, {44, 160, 44},  {40, 39, 214},
                                          {189, 103, 148}, {75, 86, 140}, {194, 119, 227}, {127, 127, 127}};

std::string value_text(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

std::string slug(const std::string& text) {
  std::string out;
  for (char c : text) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-';
    if (keep) {
      out += c;
    } else if (!out.empty() && out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out.empty() ? "all" : out;
}

std::string setting_label(const json& setting) {
  std::string out;
  for (const auto& [name, value] : setting.items()) {
    out += (out.empty() ? "" : ", ") + name + "=" + value_text(value);
  }
  return out;
}

void write_image(const fs::path& path, const cv::Mat& image) {
  fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), image)) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
}

std::ofstream open_csv(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
  return out;
}

void text(cv::Mat& img, const std::string& s, cv::Point at, double scale = 0.45, const cv::Scalar& colour = kBlack) {
  cv::putText(img, s, at, cv::FONT_HERSHEY_SIMPLEX, scale, colour, 1, cv::LINE_AA);
}

void dashed_line(cv::Mat& img, cv::Point a, cv::Point b, const cv::Scalar& colour) {
  const double length = std::hypot(b.x - a.x, b.y - a.y);
  for (double t = 0.0; t < length; t += 12.0) {
    const double u = std::min(length, t + 6.0);
    const cv::Point p(a.x + static_cast<int>((b.x - a.x) * t / length), a.y + static_cast<int>((b.y - a.y) * t / length));
    const cv::Point q(a.x + static_cast<int>((b.x - a.x) * u / length), a.y + static_cast<int>((b.y - a.y) * u / length));
    cv::line(img, p, q, colour, 1, cv::LINE_AA);
  }
}

int family_rank(const std::string& name) {
  static const std::vector<std::string> order = {"toy", "mobilenet_v2", "resnet_50", "resnet_101", "resnet_101_2x"};
  const auto it = std::find(order.begin(), order.end(), name);
  return it == order.end() ? static_cast<int>(order.size()) : static_cast<int>(it - order.begin());
}

struct Point {
  double x = 0.0;
  std::string x_label;
  const AggregateRow* row = nullptr;
};

std::string x_axis_of(PlotKind kind) {
  switch (kind) {
    case PlotKind::kProportionCurve:
      return "m2020_proportion";
    case PlotKind::kLabelFractionCurve:
      return "label_fraction";
    case PlotKind::kModelSizeCurve:
      return "backbone_family";
    default:
      return "";
  }
}

std::vector<std::string> eval_sets_of(const SweepResult& result, const PlotOptions& options) {
  if (!options.eval_sets.empty()) return options.eval_sets;
  std::vector<std::string> sets;
  for (const CellResult* cell : result.successful()) {
    for (const auto& [name, report] : cell->reports) {
      if (std::find(sets.begin(), sets.end(), name) == sets.end()) sets.push_back(name);
    }
  }
  return sets;
}

std::optional<double> reference_for(const PlotOptions& options, const std::string& set, const std::string& metric) {
  if (auto it = options.reference_lines.find(set + "/" + metric); it != options.reference_lines.end()) return it->second;
  if (auto it = options.reference_lines.find(metric); it != options.reference_lines.end()) return it->second;
  return std::nullopt;
}

PlotArtifact draw_curve(const std::map<std::string, std::vector<Point>>& series, bool categorical,
                        const std::string& x_axis, const std::string& set, const std::string& metric,
                        std::optional<double> reference, const fs::path& image_path, const PlotOptions& options) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double x_lo = lo;
  double x_hi = -lo;
  for (const auto& [name, points] : series) {
    for (const auto& p : points) {
      lo = std::min({lo, p.row->mean, p.row->ci_low.value_or(p.row->mean)});
      hi = std::max({hi, p.row->mean, p.row->ci_high.value_or(p.row->mean)});
      x_lo = std::min(x_lo, p.x);
      x_hi = std::max(x_hi, p.x);
    }
  }
  if (reference) {
    lo = std::min(lo, *reference);
    hi = std::max(hi, *reference);
  }
  lo = std::floor(lo * 10.0) / 10.0;
  hi = std::ceil(hi * 10.0) / 10.0;
  if (hi - lo < 0.1) hi = lo + 0.1;
  if (x_hi - x_lo <= 0.0) {
    x_lo -= 0.5;
    x_hi += 0.5;
  }

  const int left = 70;
  const int right = options.width - 20;
  const int top = 40;
  const int bottom = options.height - 60;
  cv::Mat img(options.height, options.width, CV_8UC3, kWhite);
  auto px = [&](double x) { return left + static_cast<int>(std::lround((x - x_lo) / (x_hi - x_lo) * (right - left))); };
  auto py = [&](double y) { return bottom - static_cast<int>(std::lround((y - lo) / (hi - lo) * (bottom - top))); };

  for (int i = 0; i <= 5; ++i) {
    const double y = lo + (hi - lo) * i / 5.0;
    cv::line(img, {left, py(y)}, {right, py(y)}, kGrid, 1);
    text(img, fmt::format("{:.2f}", y), {left - 45, py(y) + 4}, 0.4);
  }
  std::map<double, std::string> ticks;
  for (const auto& [name, points] : series) {
    for (const auto& p : points) ticks[p.x] = p.x_label;
  }
  for (const auto& [x, label] : ticks) {
    cv::line(img, {px(x), bottom}, {px(x), bottom + 5}, kBlack, 1);
    const int w = cv::getTextSize(label, cv::FONT_HERSHEY_SIMPLEX, 0.4, 1, nullptr).width;
    text(img, label, {px(x) - w / 2, bottom + 20}, 0.4);
  }
  cv::rectangle(img, {left, top}, {right, bottom}, kBlack, 1);
  text(img, x_axis, {(left + right) / 2 - 50, options.height - 20});
  text(img, metric + " on " + set, {left, top - 14}, 0.55);

  std::size_t colour_index = 0;
  int legend_y = top + 18;
  for (const auto& [name, points] : series) {
    const cv::Scalar colour = kPalette[colour_index++ % kPalette.size()];
    cv::Mat overlay = img.clone();
    bool banded = false;
    std::vector<cv::Point> upper;
    std::vector<cv::Point> lower;
    auto flush = [&]() {
      if (upper.size() >= 2 || (upper.size() == 1 && categorical)) {
        std::vector<cv::Point> poly = upper;
        if (upper.size() == 1) {
          poly = {upper[0] + cv::Point(-6, 0), upper[0] + cv::Point(6, 0), lower[0] + cv::Point(6, 0),
                  lower[0] + cv::Point(-6, 0)};
        } else {
          poly.insert(poly.end(), lower.rbegin(), lower.rend());
        }
        cv::fillPoly(overlay, std::vector<std::vector<cv::Point>>{poly}, colour);
        banded = true;
      }
      upper.clear();
      lower.clear();
    };
    for (const auto& p : points) {
      if (p.row->ci_low && p.row->ci_high) {
        upper.emplace_back(px(p.x), py(*p.row->ci_high));
        lower.emplace_back(px(p.x), py(*p.row->ci_low));
      } else {
        flush();
      }
    }
    flush();
    if (banded) cv::addWeighted(overlay, 0.25, img, 0.75, 0.0, img);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const cv::Point at(px(points[i].x), py(points[i].row->mean));
      if (i > 0) cv::line(img, {px(points[i - 1].x), py(points[i - 1].row->mean)}, at, colour, 2, cv::LINE_AA);
      cv::circle(img, at, 3, colour, cv::FILLED, cv::LINE_AA);
    }
    if (!name.empty()) {
      cv::line(img, {right - 200, legend_y - 4}, {right - 180, legend_y - 4}, colour, 2);
      text(img, name, {right - 175, legend_y}, 0.38);
      legend_y += 16;
    }
  }
  if (reference) {
    dashed_line(img, {left, py(*reference)}, {right, py(*reference)}, kBlack);
  }

  PlotArtifact artifact;
  artifact.image = image_path;
  artifact.data = fs::path(image_path).replace_extension(".csv");
  artifact.eval_set = set;
  artifact.metric = metric;
  write_image(artifact.image, img);
  auto csv = open_csv(artifact.data);
  csv << "series," << x_axis << ",n,mean,ci_low,ci_high\n";
  for (const auto& [name, points] : series) {
    for (const auto& p : points) {
      csv << '"' << name << "\"," << p.x_label << ',' << p.row->values.size() << ','
          << fmt::format("{:.9g}", p.row->mean) << ','
          << (p.row->ci_low ? fmt::format("{:.9g}", *p.row->ci_low) : "") << ','
          << (p.row->ci_high ? fmt::format("{:.9g}", *p.row->ci_high) : "") << '\n';
    }
  }
  if (reference) csv << "reference,,," << fmt::format("{:.9g}", *reference) << ",,\n";
  return artifact;
}

std::vector<PlotArtifact> plot_curves(const SweepResult& result, PlotKind kind, const fs::path& output_dir,
                                      const PlotOptions& options) {
  const std::string x_axis = x_axis_of(kind);
  const bool categorical = kind == PlotKind::kModelSizeCurve;
  std::vector<PlotArtifact> artifacts;
  for (const auto& set : eval_sets_of(result, options)) {
    for (const auto& metric : options.metrics) {
      std::map<std::string, std::vector<Point>> series;
      for (const auto& row : result.aggregates) {
        if (row.eval_set != set || row.metric != metric || !row.setting.contains(x_axis)) continue;
        json rest = row.setting;
        rest.erase(x_axis);
        const json& xv = row.setting.at(x_axis);
        Point p;
        p.row = &row;
        p.x_label = value_text(xv);
        p.x = categorical ? family_rank(p.x_label) : xv.get<double>();
        series[setting_label(rest)].push_back(p);
      }
      if (series.empty()) continue;
      for (auto& [name, points] : series) {
        std::sort(points.begin(), points.end(), [](const Point& a, const Point& b) { return a.x < b.x; });
      }
      const fs::path image = output_dir / (std::string(to_string(kind)) + "_" + slug(set) + "_" + slug(metric) + ".png");
      artifacts.push_back(
          draw_curve(series, categorical, x_axis, set, metric, reference_for(options, set, metric), image, options));
    }
  }
  return artifacts;
}

std::vector<PlotArtifact> plot_heatmaps(const SweepResult& result, const fs::path& output_dir,
                                        const PlotOptions& options) {
  const ClassTaxonomy taxonomy = make_taxonomy(result.taxonomy);
  std::vector<PlotArtifact> artifacts;
  for (const auto& set : eval_sets_of(result, options)) {
    std::vector<std::string> order;
    std::map<std::string, std::pair<json, ConfusionMatrix>> groups;
    for (const CellResult* cell : result.successful()) {
      const auto it = cell->reports.find(set);
      if (it == cell->reports.end()) continue;
      json setting = cell->axes;
      setting.erase("seed");
      const std::string key = setting.dump();
      auto g = groups.find(key);
      if (g == groups.end()) {
        groups.emplace(key, std::make_pair(setting, it->second.confusion));
        order.push_back(key);
      } else {
        g->second.second = merge(g->second.second, it->second.confusion);
      }
    }
    for (const auto& key : order) {
      const auto& [setting, cm] = groups.at(key);
      PlotArtifact artifact;
      artifact.eval_set = set;
      artifact.setting = setting_label(setting);
      const std::string stem = "confusion_heatmap_" + slug(set) + "_" + slug(artifact.setting);
      artifact.image = output_dir / (stem + ".png");
      artifact.data = output_dir / (stem + ".csv");
      render_confusion_heatmap(cm, taxonomy, set + (artifact.setting.empty() ? "" : ": " + artifact.setting),
                               artifact.image);
      auto csv = open_csv(artifact.data);
      const auto norm = row_normalized(cm);
      csv << "truth,predicted,count,row_fraction\n";
      for (int t = 0; t < cm.num_classes(); ++t) {
        for (int p = 0; p < cm.num_classes(); ++p) {
          csv << taxonomy.classes()[static_cast<std::size_t>(t)] << ','
              << taxonomy.classes()[static_cast<std::size_t>(p)] << ',' << cm.at(t, p) << ','
              << fmt::format("{:.9g}", norm[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]) << '\n';
        }
      }
      artifacts.push_back(std::move(artifact));
    }
  }
  return artifacts;
}

std::vector<PlotArtifact> plot_distributions(const SweepResult& result, const fs::path& output_dir,
                                             const PlotOptions& options) {
  const ClassTaxonomy taxonomy = make_taxonomy(result.taxonomy);
  std::vector<PlotArtifact> artifacts;
  for (const auto& set : eval_sets_of(result, options)) {
    const ConfusionMatrix* cm = nullptr;
    for (const CellResult* cell : result.successful()) {
      if (const auto it = cell->reports.find(set); it != cell->reports.end()) {
        cm = &it->second.confusion;
        break;
      }
    }
    if (cm == nullptr || cm->total() == 0) continue;
    const int n = cm->num_classes();
    const double total = static_cast<double>(cm->total());
    std::vector<double> share(static_cast<std::size_t>(n));
    double peak = 0.0;
    for (int c = 0; c < n; ++c) {
      share[static_cast<std::size_t>(c)] = static_cast<double>(cm->row_sum(c)) / total;
      peak = std::max(peak, share[static_cast<std::size_t>(c)]);
    }
    cv::Mat img(options.height, options.width, CV_8UC3, kWhite);
    const int left = 60;
    const int right = options.width - 20;
    const int top = 40;
    const int bottom = options.height - 60;
    const int slot = (right - left) / n;
    cv::rectangle(img, {left, top}, {right, bottom}, kBlack, 1);
    text(img, "class pixel share on " + set, {left, top - 14}, 0.55);
    for (int c = 0; c < n; ++c) {
      const double s = share[static_cast<std::size_t>(c)];
      const int h = static_cast<int>(std::lround(s / std::max(peak, 1e-12) * (bottom - top - 20)));
      const int x0 = left + c * slot + slot / 6;
      const int x1 = left + (c + 1) * slot - slot / 6;
      cv::rectangle(img, {x0, bottom - h}, {x1, bottom}, kPalette[static_cast<std::size_t>(c) % kPalette.size()],
                    cv::FILLED);
      text(img, fmt::format("{:.1f}%", 100.0 * s), {x0, bottom - h - 5}, 0.4);
      text(img, taxonomy.display_name(c), {x0, bottom + 20}, 0.4);
    }
    PlotArtifact artifact;
    artifact.eval_set = set;
    artifact.image = output_dir / ("class_distribution_" + slug(set) + ".png");
    artifact.data = output_dir / ("class_distribution_" + slug(set) + ".csv");
    write_image(artifact.image, img);
    auto csv = open_csv(artifact.data);
    csv << "class,pixels,share\n";
    for (int c = 0; c < n; ++c) {
      csv << taxonomy.classes()[static_cast<std::size_t>(c)] << ',' << cm->row_sum(c) << ','
          << fmt::format("{:.9g}", share[static_cast<std::size_t>(c)]) << '\n';
    }
    artifacts.push_back(std::move(artifact));
  }
  return artifacts;
}

}  // namespace

std::string_view to_string(PlotKind kind) {
  switch (kind) {
    case PlotKind::kProportionCurve:
      return "proportion_curve";
    case PlotKind::kLabelFractionCurve:
      return "label_fraction_curve";
    case PlotKind::kConfusionHeatmap:
      return "confusion_heatmap";
    case PlotKind::kClassDistribution:
      return "class_distribution";
    case PlotKind::kModelSizeCurve:
      return "model_size_curve";
  }
  return "proportion_curve";
}

std::optional<PlotKind> parse_plot_kind(std::string_view text) {
  for (auto kind : {PlotKind::kProportionCurve, PlotKind::kLabelFractionCurve, PlotKind::kConfusionHeatmap,
                    PlotKind::kClassDistribution, PlotKind::kModelSizeCurve}) {
    const std::string_view name = to_string(kind);
    if (text == name) return kind;
    std::string upper(name);
    for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (text == upper) return kind;
  }
  return std::nullopt;
}

HeatmapLayout heatmap_layout(int num_classes, int size) {
  HeatmapLayout layout;
  layout.left = 110;
  layout.top = 50;
  layout.cell = std::max(8, (size - layout.left - 20) / std::max(1, num_classes));
  return layout;
}

void render_confusion_heatmap(const ConfusionMatrix& cm, const ClassTaxonomy& taxonomy, const std::string& title,
                              const fs::path& image, int size) {
  const int n = cm.num_classes();
  const HeatmapLayout layout = heatmap_layout(n, size);
  const int width = layout.left + n * layout.cell + 20;
  const int height = layout.top + n * layout.cell + 40;
  cv::Mat img(height, width, CV_8UC3, kWhite);
  const auto norm = row_normalized(cm);
  for (int t = 0; t < n; ++t) {
    for (int p = 0; p < n; ++p) {
      const double v = norm[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
      const int fade = static_cast<int>(std::lround(255.0 * (1.0 - v)));
      const cv::Rect cell(layout.left + p * layout.cell, layout.top + t * layout.cell, layout.cell, layout.cell);
      cv::rectangle(img, cell, cv::Scalar(255, fade, fade), cv::FILLED);
      cv::rectangle(img, cell, kGrid, 1);
      const std::string label = fmt::format("{:.2f}", v);
      const int w = cv::getTextSize(label, cv::FONT_HERSHEY_SIMPLEX, 0.4, 1, nullptr).width;
      text(img, label, {cell.x + (cell.width - w) / 2, cell.y + cell.height / 2 + 4}, 0.4, v > 0.5 ? kWhite : kBlack);
    }
    text(img, taxonomy.display_name(t), {6, layout.top + t * layout.cell + layout.cell / 2 + 4}, 0.4);
    const std::string column = taxonomy.display_name(t);
    text(img, column.substr(0, 10), {layout.left + t * layout.cell + 2, layout.top + n * layout.cell + 18}, 0.35);
  }
  text(img, title, {6, 20}, 0.5);
  text(img, "rows: truth, columns: predicted", {6, 38}, 0.38);
  write_image(image, img);
}

std::vector<PlotArtifact> plot_sweep(const SweepResult& result, PlotKind kind, const fs::path& output_dir,
                                     const PlotOptions& options) {
  if (result.successful().empty()) {
    throw Error(ErrorCode::kMissingAxis, "sweep '" + result.name + "' holds no successful cell to plot");
  }
  const std::string x_axis = x_axis_of(kind);
  if (!x_axis.empty() &&
      std::find(result.axis_names.begin(), result.axis_names.end(), x_axis) == result.axis_names.end()) {
    throw Error(ErrorCode::kMissingAxis,
                "sweep '" + result.name + "' has no axis " + x_axis + " for " + std::string(to_string(kind)));
  }
  switch (kind) {
    case PlotKind::kConfusionHeatmap:
      return plot_heatmaps(result, output_dir, options);
    case PlotKind::kClassDistribution:
      return plot_distributions(result, output_dir, options);
    default:
      return plot_curves(result, kind, output_dir, options);
  }
}

}  // namespace terrainseg
