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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "terrainseg/composition.hpp"
#include "terrainseg/error.hpp"
#include "terrainseg/experiment.hpp"
#include "terrainseg/ingest.hpp"
#include "terrainseg/manifest.hpp"
#include "terrainseg/plot.hpp"
#include "terrainseg/synthetic.hpp"
#include "terrainseg/table.hpp"
#include "terrainseg/train.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using terrainseg::Error;
using terrainseg::ErrorCode;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string out;
  std::string data_root;
  bool verbose = false;
};

template <typename T, typename Parse>
T parse_or_throw(const std::string& text, Parse parse, const char* what) {
  const auto v = parse(text);
  if (!v) throw Error(ErrorCode::kConfigError, std::string("unknown ") + what + " '" + text + "'");
  return *v;
}

std::string require_out(const Globals& g, const char* what) {
  if (g.out.empty()) throw Error(ErrorCode::kConfigError, std::string("--out is required for ") + what);
  return g.out;
}

void print_counts(const terrainseg::DatasetManifest& m) {
  std::cout << "entries: " << m.size() << " (msl " << m.count(terrainseg::Domain::kMsl) << ", m2020 "
            << m.count(terrainseg::Domain::kM2020) << ")\n"
            << "content_hash: " << m.content_hash() << '\n';
}

terrainseg::ExperimentGrid load_grid(const Globals& g) {
  if (g.config.empty()) throw Error(ErrorCode::kConfigError, "--config is required");
  auto grid = terrainseg::ExperimentGrid::load(g.config);
  if (g.seed) grid.base["train"]["seed"] = *g.seed;
  if (!g.out.empty()) grid.output_dir = g.out;
  return grid;
}

terrainseg::RunOptions run_options(const Globals& g) {
  terrainseg::RunOptions options;
  options.workers = g.workers;
  if (!g.data_root.empty()) options.data_root = g.data_root;
  return options;
}

int report_sweep(const terrainseg::SweepResult& result) {
  std::size_t done = 0;
  std::size_t cached = 0;
  for (const auto& c : result.cells) {
    if (c.status == terrainseg::CellStatus::kCompleted) ++done;
    if (c.status == terrainseg::CellStatus::kCached) ++cached;
  }
  std::cout << "cells: " << result.cells.size() << " completed: " << done << " cached: " << cached
            << " failed: " << result.failed_cells.size() << '\n';
  for (const auto& d : result.failed_cells) std::cout << "FAILED_CELL " << d << '\n';
  return result.failed_cells.empty() ? kExitOk : kExitPartial;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"terrainseg: terrain segmentation experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Experiment config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed override");
  app.add_option("--workers", g.workers, "Parallel sweep cells")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output path");
  app.add_option("--data-root", g.data_root, "Data root")->envname("TERRAINSEG_DATA_ROOT");
  app.add_flag("-v,--verbose", g.verbose, "Log progress");

  auto* ingest = app.add_subcommand("ingest", "Scan a dataset tree into a manifest");
  std::string root;
  std::string domain = "msl";
  std::string split = "train";
  std::string taxonomy = "four_class";
  std::string dataset_id;
  std::string sol_pattern;
  std::string image_subdir = "images";
  std::string mask_subdir = "labels";
  std::vector<std::string> mask_suffixes = {"_merged"};
  bool probe = false;
  ingest->add_option("--root", root, "Dataset root")->required()->check(CLI::ExistingDirectory);
  ingest->add_option("--domain", domain, "msl or m2020");
  ingest->add_option("--split", split, "train or test");
  ingest->add_option("--taxonomy", taxonomy, "four_class or six_class");
  ingest->add_option("--dataset-id", dataset_id, "Manifest dataset id");
  ingest->add_option("--sol-pattern", sol_pattern, "Regex with one capture group for the sol");
  ingest->add_option("--image-dir", image_subdir, "Image subdirectory");
  ingest->add_option("--mask-dir", mask_subdir, "Mask subdirectory");
  ingest->add_option("--mask-suffix", mask_suffixes, "Mask stem suffixes");
  ingest->add_flag("--probe-channels", probe, "Read each image to detect channels");

  auto* compose = app.add_subcommand("compose", "Build a mixed-domain training manifest");
  std::size_t cap = 0;
  double proportion = 0.0;
  std::string msl_path;
  std::string m2020_path;
  compose->add_option("--cap", cap, "Total size")->required();
  compose->add_option("--m2020-prop", proportion, "M2020 share in [0, 1]")->required();
  compose->add_option("--msl", msl_path, "MSL manifest")->required()->check(CLI::ExistingFile);
  compose->add_option("--m2020", m2020_path, "M2020 manifest")->required()->check(CLI::ExistingFile);

  auto* subsample = app.add_subcommand("subsample", "Stratified label-fraction subset");
  double fraction = 1.0;
  subsample->add_option("--fraction", fraction, "Fraction in (0, 1]")->required();
  subsample->add_option("--msl", msl_path, "MSL manifest")->check(CLI::ExistingFile);
  subsample->add_option("--m2020", m2020_path, "M2020 manifest")->check(CLI::ExistingFile);

  auto* train = app.add_subcommand("train", "Finetune one configuration");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a test manifest");
  std::string checkpoint;
  std::string test_path;
  int eval_batch = 4;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--test", test_path, "Test manifest")->required()->check(CLI::ExistingFile);
  eval->add_option("--batch-size", eval_batch, "Batch size")->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep", "Run an experiment grid");
  auto* validate = app.add_subcommand("validate", "Check experiment configs without running them");
  std::vector<std::string> validate_paths;
  validate->add_option("configs", validate_paths, "Config files")->check(CLI::ExistingFile);

  auto* plot = app.add_subcommand("plot", "Render sweep figures");
  std::string sweep_dir;
  std::string kind = "proportion_curve";
  std::vector<std::string> metrics = {"accuracy", "f1_macro"};
  std::vector<std::string> eval_sets;
  std::vector<std::string> references;
  plot->add_option("--sweep", sweep_dir, "Sweep output directory")->required()->check(CLI::ExistingDirectory);
  plot->add_option("--kind", kind, "proportion_curve, label_fraction_curve, confusion_heatmap, "
                                   "class_distribution or model_size_curve");
  plot->add_option("--metric", metrics, "Metrics to plot");
  plot->add_option("--eval-set", eval_sets, "Eval sets to plot");
  plot->add_option("--reference", references, "Dashed line, [set/]metric=value");

  auto* table = app.add_subcommand("table", "Emit a results table");
  std::string format = "markdown";
  std::string recall_class = "big_rock";
  std::string filter = "{}";
  table->add_option("--sweep", sweep_dir, "Sweep output directory")->required()->check(CLI::ExistingDirectory);
  table->add_option("--format", format, "markdown, csv or latex");
  table->add_option("--recall-class", recall_class, "Class for the recall column");
  table->add_option("--eval-set", eval_sets, "Eval sets to include");
  table->add_option("--filter", filter, "JSON object of axis values to keep");

  auto* synth = app.add_subcommand("synth", "Write a synthetic labelled dataset");
  terrainseg::SyntheticSpec spec;
  std::string layout = "quadrants";
  std::string channels;
  synth->add_option("--count", spec.count, "Images");
  synth->add_option("--height", spec.height, "Height");
  synth->add_option("--width", spec.width, "Width");
  synth->add_option("--layout", layout, "quadrants or patches");
  synth->add_option("--domain", domain, "msl or m2020");
  synth->add_option("--split", split, "train or test");
  synth->add_option("--taxonomy", taxonomy, "four_class or six_class");
  synth->add_option("--channels", channels, "gray or color");
  synth->add_option("--noise", spec.noise_stddev, "Noise stddev in gray levels");
  synth->add_option("--ignore-rows", spec.ignore_rows, "Top rows labelled ignore");
  synth->add_option("--minority-class", spec.minority_class, "Minority class for the patches layout");
  synth->add_option("--minority-fraction", spec.minority_fraction, "Minority pixel share");
  synth->add_option("--dataset-id", spec.dataset_id, "Dataset id and file prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  spdlog::set_level(g.verbose ? spdlog::level::info : spdlog::level::warn);

  try {
    if (*ingest) {
      terrainseg::ScanOptions options;
      options.image_subdir = image_subdir;
      options.mask_subdir = mask_subdir;
      options.mask_stem_suffixes = mask_suffixes;
      options.probe_channels = probe;
      options.dataset_id = dataset_id;
      if (!sol_pattern.empty()) options.sol_pattern = sol_pattern;
      options.taxonomy_variant = parse_or_throw<terrainseg::TaxonomyVariant>(
          taxonomy, terrainseg::parse_taxonomy_variant, "taxonomy");
      const auto d = parse_or_throw<terrainseg::Domain>(domain, terrainseg::parse_domain, "domain");
      const auto s = parse_or_throw<terrainseg::Split>(split, terrainseg::parse_split, "split");
      const auto result = terrainseg::scan_dataset(root, d, s, options);
      terrainseg::write_manifest(result.manifest, require_out(g, "ingest"));
      print_counts(result.manifest);
      std::cout << "missing_masks: " << result.missing_masks.size()
                << " missing_images: " << result.missing_images.size() << '\n';
      if (result.expected_count && *result.expected_count != result.manifest.size()) {
        std::cout << "note: published size for this split is " << *result.expected_count << '\n';
      }
      return kExitOk;
    }
    if (*compose) {
      terrainseg::CompositionSpec c;
      c.cap = cap;
      c.m2020_proportion = proportion;
      c.seed = g.seed.value_or(0);
      const auto m = terrainseg::compose_mixed(c, terrainseg::read_manifest(msl_path),
                                               terrainseg::read_manifest(m2020_path));
      terrainseg::write_manifest(m, require_out(g, "compose"));
      print_counts(m);
      return kExitOk;
    }
    if (*subsample) {
      if (msl_path.empty() && m2020_path.empty()) {
        throw Error(ErrorCode::kConfigError, "subsample needs --msl and/or --m2020");
      }
      terrainseg::DatasetManifest msl;
      terrainseg::DatasetManifest m2020;
      if (!msl_path.empty()) msl = terrainseg::read_manifest(msl_path);
      if (!m2020_path.empty()) m2020 = terrainseg::read_manifest(m2020_path);
      if (msl_path.empty()) msl.taxonomy_variant = m2020.taxonomy_variant;
      if (m2020_path.empty()) m2020.taxonomy_variant = msl.taxonomy_variant;
      const auto m = terrainseg::sample_label_fraction({fraction, g.seed.value_or(0)}, msl, m2020);
      terrainseg::write_manifest(m, require_out(g, "subsample"));
      print_counts(m);
      return kExitOk;
    }
    if (*train) {
      auto grid = load_grid(g);
      if (!grid.axes.empty()) throw Error(ErrorCode::kConfigError, "config declares a grid; use sweep");
      const auto cells = terrainseg::expand_grid(grid);
      terrainseg::validate_cell_config(cells.front().config);
      const auto options = run_options(g);
      const auto cell = terrainseg::run_cell(cells.front(), grid.output_dir, terrainseg::resolve_data_root(grid, options));
      if (cell.status == terrainseg::CellStatus::kFailed) {
        std::cerr << "training failed: " << cell.error.value_or("") << '\n';
        return kExitFailure;
      }
      for (const auto& [name, report] : cell.reports) {
        std::cout << name << ": accuracy " << report.accuracy << " f1_macro " << report.f1_macro << " miou "
                  << report.miou << '\n';
      }
      std::cout << "output: " << grid.output_dir.string() << '\n';
      return kExitOk;
    }
    if (*eval) {
      auto loaded = terrainseg::load_checkpoint(checkpoint);
      const auto tax = terrainseg::make_taxonomy(loaded.config.taxonomy);
      const auto report = terrainseg::evaluate(*loaded.model, terrainseg::read_manifest(test_path), tax,
                                               loaded.config.preprocess, eval_batch);
      json j = terrainseg::to_json(report, tax);
      j["checkpoint"] = checkpoint;
      j["test_manifest"] = test_path;
      if (!g.out.empty()) {
        std::ofstream out(g.out);
        if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + g.out);
        out << j.dump(2) << '\n';
      }
      std::cout << "accuracy " << report.accuracy << " f1_macro " << report.f1_macro << " miou " << report.miou
                << '\n';
      return kExitOk;
    }
    if (*sweep) {
      auto grid = load_grid(g);
      std::cout << "grid " << grid.name << ": " << terrainseg::validate_grid(grid) << " cells -> "
                << grid.output_dir.string() << '\n';
      auto options = run_options(g);
      options.on_cell = [](const terrainseg::CellResult& c) {
        std::cout << c.digest.substr(0, 16) << ' ' << terrainseg::to_string(c.status) << ' ' << c.axes.dump()
                  << '\n';
      };
      return report_sweep(terrainseg::run_grid(grid, options));
    }
    if (*validate) {
      std::vector<std::string> paths = validate_paths;
      if (!g.config.empty()) paths.insert(paths.begin(), g.config);
      if (paths.empty()) throw Error(ErrorCode::kConfigError, "validate needs at least one config");
      int status = kExitOk;
      for (const auto& p : paths) {
        try {
          const auto grid = terrainseg::ExperimentGrid::load(p);
          std::cout << "OK " << p << ": " << terrainseg::validate_grid(grid) << " cells\n";
        } catch (const Error& e) {
          std::cout << "INVALID " << p << ": " << e.what() << '\n';
          status = kExitConfig;
        }
      }
      return status;
    }
    if (*plot) {
      terrainseg::PlotOptions options;
      options.metrics = metrics;
      options.eval_sets = eval_sets;
      for (const auto& r : references) {
        const auto eq = r.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::kConfigError, "bad --reference " + r);
        options.reference_lines[r.substr(0, eq)] = std::stod(r.substr(eq + 1));
      }
      const auto k = parse_or_throw<terrainseg::PlotKind>(kind, terrainseg::parse_plot_kind, "plot kind");
      const fs::path out = g.out.empty() ? fs::path(sweep_dir) / "plots" : fs::path(g.out);
      for (const auto& a : terrainseg::plot_sweep(terrainseg::load_sweep(sweep_dir), k, out, options)) {
        std::cout << a.image.string() << '\n';
      }
      return kExitOk;
    }
    if (*table) {
      terrainseg::TableOptions options;
      options.recall_class = recall_class;
      options.eval_sets = eval_sets;
      try {
        options.filter = json::parse(filter);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::kConfigError, std::string("bad --filter: ") + e.what());
      }
      const auto f = parse_or_throw<terrainseg::TableFormat>(format, terrainseg::parse_table_format, "format");
      const std::string text = terrainseg::emit_table(terrainseg::load_sweep(sweep_dir), f, options);
      if (g.out.empty()) {
        std::cout << text;
      } else {
        std::ofstream(g.out) << text;
      }
      return kExitOk;
    }
    if (*synth) {
      spec.layout = parse_or_throw<terrainseg::SyntheticLayout>(layout, terrainseg::parse_synthetic_layout, "layout");
      spec.domain = parse_or_throw<terrainseg::Domain>(domain, terrainseg::parse_domain, "domain");
      spec.split = parse_or_throw<terrainseg::Split>(split, terrainseg::parse_split, "split");
      spec.taxonomy =
          parse_or_throw<terrainseg::TaxonomyVariant>(taxonomy, terrainseg::parse_taxonomy_variant, "taxonomy");
      spec.channels = channels.empty() ? terrainseg::default_channels(spec.domain, spec.split)
                                       : parse_or_throw<terrainseg::Channels>(channels, terrainseg::parse_channels,
                                                                              "channels");
      spec.seed = g.seed.value_or(0);
      const auto m = terrainseg::generate_synthetic(spec, require_out(g, "synth"));
      print_counts(m);
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return e.code() == ErrorCode::kConfigError ? kExitConfig : kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}
