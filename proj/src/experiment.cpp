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

#include "terrainseg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <boost/math/distributions/students_t.hpp>
#include <spdlog/spdlog.h>

#include "terrainseg/composition.hpp"
#include "terrainseg/digest.hpp"
#include "terrainseg/error.hpp"

namespace terrainseg {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

const std::map<std::string, json::json_pointer>& axis_targets() {
  static const std::map<std::string, json::json_pointer> targets = {
      {"m2020_proportion", json::json_pointer("/composition/m2020_proportion")},
      {"label_fraction", json::json_pointer("/composition/label_fraction")},
      {"training_set", json::json_pointer("/composition/training_set")},
      {"seed", json::json_pointer("/train/seed")},
      {"loss_kind", json::json_pointer("/loss/kind")},
      {"backbone_family", json::json_pointer("/backbone/family")},
      {"pretrain_source", json::json_pointer("/backbone/pretrain_source")},
  };
  return targets;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + tmp.string());
    out << j.dump(2) << '\n';
  }
  fs::rename(tmp, path);
}

[[noreturn]] void config_error(const std::string& message) { throw Error(ErrorCode::kConfigError, message); }

const json& section(const json& config, const char* name) {
  if (!config.contains(name) || !config.at(name).is_object()) config_error(std::string("missing section ") + name);
  return config.at(name);
}

std::string training_set_of(const json& composition) { return composition.value("training_set", std::string("mixed")); }

std::string weights_key(const nn::BackboneSpec& spec) {
  return std::string(nn::to_string(spec.family)) + "/" + std::string(nn::to_string(spec.pretrain_source));
}

TrainConfig train_config_of(const json& config) {
  json t = section(config, "train");
  t["loss"] = section(config, "loss");
  return TrainConfig::from_json(t);
}

fs::path cell_dir(const fs::path& output_dir, const std::string& digest) {
  return output_dir / "cells" / digest.substr(0, 16);
}

std::vector<std::string> eval_set_names(const json& config) {
  const json& eval = section(config, "eval");
  if (!eval.contains("sets") || !eval.at("sets").is_array() || eval.at("sets").empty()) {
    config_error("eval.sets must list at least one manifest key");
  }
  return eval.at("sets").get<std::vector<std::string>>();
}

DatasetManifest rebase(DatasetManifest manifest, const fs::path& root) {
  for (auto& e : manifest.entries) {
    if (fs::path(e.image_ref).is_relative()) e.image_ref = (root / e.image_ref).lexically_normal().generic_string();
    if (fs::path(e.mask_ref).is_relative()) e.mask_ref = (root / e.mask_ref).lexically_normal().generic_string();
  }
  return manifest;
}

DatasetManifest load_named_manifest(const json& config, const std::string& key, const fs::path& data_root) {
  const json& manifests = section(section(config, "data"), "manifests");
  if (!manifests.contains(key)) config_error("data.manifests has no entry " + key);
  fs::path path = manifests.at(key).get<std::string>();
  if (path.is_relative()) path = data_root / path;
  return rebase(read_manifest(path), data_root);
}

std::string report_file(const std::string& eval_set) { return "report_" + eval_set + ".json"; }

bool reports_present(const fs::path& dir, const std::vector<std::string>& sets) {
  return std::all_of(sets.begin(), sets.end(), [&](const std::string& s) { return fs::exists(dir / report_file(s)); });
}

json summarize(const EvalReport& report, const ClassTaxonomy& tax) {
  json recall = json::object();
  for (int c = 0; c < tax.num_classes(); ++c) {
    const auto& r = report.per_class[static_cast<std::size_t>(c)].recall;
    recall[tax.classes()[static_cast<std::size_t>(c)]] = r ? json(*r) : json(nullptr);
  }
  return json{{"accuracy", report.accuracy}, {"f1_macro", report.f1_macro}, {"miou", report.miou}, {"recall", recall}};
}

void check_inputs(const json& config, const fs::path& data_root) {
  auto resolve = [&](const std::string& ref) {
    const fs::path path = ref;
    return path.is_relative() ? data_root / path : path;
  };
  const json& manifests = config.at("data").at("manifests");
  std::vector<std::string> keys = eval_set_names(config);
  const std::string training_set = training_set_of(config.at("composition"));
  if (training_set != "m2020") keys.emplace_back("msl_train");
  if (training_set != "msl") keys.emplace_back("m2020_train");
  for (const auto& key : keys) {
    const fs::path path = resolve(manifests.at(key).get<std::string>());
    if (!fs::exists(path)) config_error("manifest " + key + " not found at " + path.string());
  }
  const json& backbone = config.at("backbone");
  const nn::BackboneSpec spec = nn::BackboneSpec::from_json(backbone);
  if (spec.pretrain_source != nn::PretrainSource::kRandom) {
    const fs::path path = resolve(backbone.at("weights").at(weights_key(spec)).get<std::string>());
    if (!fs::exists(path)) throw Error(ErrorCode::kWeightsNotFound, "weights not found at " + path.string());
  }
}

}  // namespace

CellResult run_cell(const GridCell& cell, const fs::path& dir, const fs::path& data_root) {
  CellResult result;
  result.digest = cell.digest;
  result.axes = cell.axes;
  try {
    const auto sets = eval_set_names(cell.config);
    TrainConfig train = train_config_of(cell.config);
    const ClassTaxonomy tax = make_taxonomy(train.taxonomy);
    if (reports_present(dir, sets)) {
      for (const auto& s : sets) result.reports[s] = report_from_json(read_json(dir / report_file(s)));
      result.status = CellStatus::kCached;
      return result;
    }
    fs::create_directories(dir);
    fs::remove(dir / "error.txt");
    write_json(dir / "cell.json", json{{"digest", cell.digest}, {"axes", cell.axes}, {"config", cell.config}});

    const DatasetManifest train_manifest = build_training_manifest(cell.config, data_root);
    write_manifest(train_manifest, dir / "train_manifest.tsv");

    nn::BackboneSpec backbone = nn::BackboneSpec::from_json(section(cell.config, "backbone"));
    if (backbone.pretrain_source != nn::PretrainSource::kRandom) {
      fs::path weights = section(cell.config, "backbone").at("weights").at(weights_key(backbone)).get<std::string>();
      backbone.weights_path = weights.is_relative() ? data_root / weights : weights;
    }
    auto model = nn::build_model(backbone, tax, train.seed);

    std::vector<EvalSet> eval_sets;
    for (const auto& s : sets) eval_sets.push_back({s, load_named_manifest(cell.config, s, data_root)});

    train.checkpoint_dir = dir / "checkpoints";
    FinetuneOptions options;
    if (section(cell.config, "eval").value("per_epoch", false)) options.eval_sets = eval_sets;
    const fs::path last = train.checkpoint_dir / "last.tsck";
    if (fs::exists(last)) {
      try {
        if (load_checkpoint(last).config.digest() == train.digest()) options.resume_from = last;
      } catch (const Error& e) {
        spdlog::warn("ignoring unreadable checkpoint {}: {}", last.string(), e.what());
      }
    }
    const FinetuneResult fit = finetune(*model, train_manifest, train, options);
    json history = json::array();
    for (const auto& r : fit.history) history.push_back(to_json(r));
    write_json(dir / "history.json", history);

    const int batch = section(cell.config, "eval").value("batch_size", 4);
    for (const auto& set : eval_sets) {
      EvalReport report = evaluate(*model, set.manifest, tax, train.preprocess, batch);
      json j = to_json(report, tax);
      j["eval_set"] = set.name;
      j["cell_digest"] = cell.digest;
      write_json(dir / report_file(set.name), j);
      result.reports[set.name] = std::move(report);
    }
    result.status = CellStatus::kCompleted;
  } catch (const std::exception& e) {
    result.status = CellStatus::kFailed;
    result.error = e.what();
    result.reports.clear();
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream(dir / "error.txt") << e.what() << '\n';
    spdlog::error("cell {} failed: {}", cell.digest.substr(0, 16), e.what());
  }
  return result;
}

const std::vector<std::string>& known_axes() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, ptr] : axis_targets()) out.push_back(name);
    return out;
  }();
  return names;
}

ExperimentGrid ExperimentGrid::from_json(const json& j, const fs::path& config_dir) {
  if (!j.is_object()) config_error("experiment config must be a JSON object");
  static const std::set<std::string> allowed = {"name",  "description", "data",   "composition", "backbone", "loss",
                                                "train", "eval",        "output", "grid",        "exclude"};
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) config_error("unknown top-level key " + key);
  }
  ExperimentGrid grid;
  grid.name = j.value("name", std::string("sweep"));
  grid.config_dir = config_dir;
  grid.base = json::object();
  for (const char* s : {"data", "composition", "backbone", "loss", "train", "eval", "output"}) {
    grid.base[s] = j.contains(s) ? j.at(s) : json::object();
    if (!grid.base[s].is_object()) config_error(std::string("section ") + s + " must be an object");
  }
  if (j.contains("grid")) {
    if (!j.at("grid").is_object()) config_error("grid must map axis names to value lists");
    for (const auto& [name, values] : j.at("grid").items()) {
      if (!axis_targets().count(name)) config_error("unknown grid axis " + name);
      if (!values.is_array() || values.empty()) config_error("axis " + name + " needs a non-empty list");
      std::set<std::string> seen;
      for (const auto& v : values) {
        if (!v.is_primitive() || v.is_null()) config_error("axis " + name + " values must be scalars");
        if (!seen.insert(v.dump()).second) config_error("axis " + name + " repeats value " + v.dump());
      }
      grid.axes.push_back({name, values.get<std::vector<json>>()});
    }
  }
  if (j.contains("exclude")) {
    for (const auto& e : j.at("exclude")) {
      if (!e.is_object()) config_error("exclude entries must be objects");
      for (const auto& [name, v] : e.items()) {
        if (!axis_targets().count(name)) config_error("exclude names unknown axis " + name);
      }
      grid.exclude.push_back(e);
    }
  }
  const json& output = grid.base.at("output");
  fs::path dir = output.value("dir", std::string("runs/") + grid.name);
  grid.output_dir = dir.is_relative() && !config_dir.empty() ? config_dir / dir : dir;
  return grid;
}

ExperimentGrid ExperimentGrid::load(const fs::path& path) {
  json j;
  try {
    j = read_json(path);
  } catch (const Error& e) {
    config_error(e.what());
  }
  return from_json(j, path.parent_path());
}

std::string cell_digest(const json& config) {
  json copy = config;
  copy.erase("output");
  return sha256_hex(copy.dump());
}

std::vector<GridCell> expand_grid(const ExperimentGrid& grid) {
  std::vector<GridCell> cells;
  std::vector<std::size_t> index(grid.axes.size(), 0);
  while (true) {
    GridCell cell;
    cell.axes = json::object();
    cell.config = grid.base;
    for (std::size_t a = 0; a < grid.axes.size(); ++a) {
      const auto& axis = grid.axes[a];
      const json& value = axis.values[index[a]];
      cell.axes[axis.name] = value;
      cell.config[axis_targets().at(axis.name)] = value;
    }
    const bool excluded = std::any_of(grid.exclude.begin(), grid.exclude.end(), [&](const json& e) {
      for (const auto& [name, v] : e.items()) {
        if (!cell.axes.contains(name) || cell.axes.at(name) != v) return false;
      }
      return true;
    });
    if (!excluded) {
      cell.digest = cell_digest(cell.config);
      cells.push_back(std::move(cell));
    }
    std::size_t a = grid.axes.size();
    while (a > 0) {
      --a;
      if (++index[a] < grid.axes[a].values.size()) break;
      index[a] = 0;
      if (a == 0) return cells;
    }
    if (grid.axes.empty()) return cells;
  }
}

void validate_cell_config(const json& config) {
  try {
    const json& data = section(config, "data");
    const json& manifests = section(data, "manifests");
    const json& composition = section(config, "composition");
    const std::string strategy = composition.value("strategy", std::string("full"));
    const std::string training_set = training_set_of(composition);
    if (training_set != "mixed" && training_set != "msl" && training_set != "m2020") {
      config_error("composition.training_set must be msl, m2020 or mixed");
    }
    if (training_set != "m2020" && !manifests.contains("msl_train")) config_error("data.manifests lacks msl_train");
    if (training_set != "msl" && !manifests.contains("m2020_train")) config_error("data.manifests lacks m2020_train");
    if (strategy == "mixed") {
      if (training_set != "mixed") config_error("mixed composition needs training_set mixed");
      const auto cap = composition.value("cap", 0);
      const double p = composition.value("m2020_proportion", -1.0);
      if (cap <= 0) config_error("composition.cap must be positive");
      if (!(p >= 0.0 && p <= 1.0)) config_error("composition.m2020_proportion must lie in [0, 1]");
    } else if (strategy == "label_fraction") {
      const double f = composition.value("label_fraction", -1.0);
      if (!(f > 0.0 && f <= 1.0)) config_error("composition.label_fraction must lie in (0, 1]");
    } else if (strategy != "full") {
      config_error("composition.strategy must be mixed, label_fraction or full");
    }

    const json& backbone_json = section(config, "backbone");
    const nn::BackboneSpec backbone = nn::BackboneSpec::from_json(backbone_json);
    backbone.validate();
    if (backbone.pretrain_source != nn::PretrainSource::kRandom) {
      const std::string key = weights_key(backbone);
      if (!backbone_json.contains("weights") || !backbone_json.at("weights").contains(key)) {
        config_error("backbone.weights has no entry " + key);
      }
    }
    train_config_of(config);
    for (const auto& s : eval_set_names(config)) {
      if (!manifests.contains(s)) config_error("eval set " + s + " is not in data.manifests");
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfigError) throw;
    config_error(e.what());
  } catch (const json::exception& e) {
    config_error(e.what());
  }
}

std::size_t validate_grid(const ExperimentGrid& grid) {
  const auto cells = expand_grid(grid);
  if (cells.empty()) config_error("grid " + grid.name + " expands to no cells");
  std::set<std::string> digests;
  for (const auto& cell : cells) {
    try {
      validate_cell_config(cell.config);
    } catch (const Error& e) {
      config_error("cell " + cell.axes.dump() + ": " + e.what());
    }
    if (!digests.insert(cell.digest).second) config_error("duplicate cell digest for " + cell.axes.dump());
  }
  return cells.size();
}

std::string_view to_string(CellStatus status) {
  switch (status) {
    case CellStatus::kCompleted:
      return "completed";
    case CellStatus::kCached:
      return "cached";
    case CellStatus::kFailed:
      return "failed";
  }
  return "unknown";
}

std::vector<const CellResult*> SweepResult::successful() const {
  std::vector<const CellResult*> out;
  for (const auto& c : cells) {
    if (c.status != CellStatus::kFailed) out.push_back(&c);
  }
  return out;
}

StudentInterval student_t_interval(const std::vector<double>& values, double confidence) {
  StudentInterval out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / n;
  if (values.size() < 2) return out;
  double sq = 0.0;
  for (double v : values) sq += (v - out.mean) * (v - out.mean);
  const double sem = std::sqrt(sq / (n - 1.0)) / std::sqrt(n);
  const boost::math::students_t dist(n - 1.0);
  const double t = boost::math::quantile(boost::math::complement(dist, (1.0 - confidence) / 2.0));
  out.low = out.mean - t * sem;
  out.high = out.mean + t * sem;
  return out;
}

std::vector<AggregateRow> aggregate(const SweepResult& result) {
  const ClassTaxonomy tax = make_taxonomy(result.taxonomy);
  std::vector<AggregateRow> rows;
  std::map<std::string, std::size_t> index;
  for (const CellResult* cell : result.successful()) {
    json setting = cell->axes;
    setting.erase("seed");
    for (const auto& [set, report] : cell->reports) {
      std::vector<std::pair<std::string, std::optional<double>>> metrics = {
          {"accuracy", report.accuracy}, {"f1_macro", report.f1_macro}, {"miou", report.miou}};
      for (int c = 0; c < tax.num_classes() && c < static_cast<int>(report.per_class.size()); ++c) {
        metrics.emplace_back("recall_" + tax.classes()[static_cast<std::size_t>(c)],
                             report.per_class[static_cast<std::size_t>(c)].recall);
      }
      for (const auto& [metric, value] : metrics) {
        if (!value) continue;
        const std::string key = setting.dump() + '\n' + set + '\n' + metric;
        auto it = index.find(key);
        if (it == index.end()) {
          it = index.emplace(key, rows.size()).first;
          AggregateRow row;
          row.setting = setting;
          row.eval_set = set;
          row.metric = metric;
          rows.push_back(std::move(row));
        }
        rows[it->second].values.push_back(*value);
      }
    }
  }
  for (auto& row : rows) {
    const auto interval = student_t_interval(row.values);
    row.mean = interval.mean;
    row.ci_low = interval.low;
    row.ci_high = interval.high;
  }
  return rows;
}

fs::path resolve_data_root(const ExperimentGrid& grid, const RunOptions& options) {
  if (options.data_root) return *options.data_root;
  if (const char* env = std::getenv("TERRAINSEG_DATA_ROOT"); env != nullptr && *env != '\0') return env;
  const json& data = grid.base.at("data");
  if (data.contains("root")) {
    fs::path root = data.at("root").get<std::string>();
    return root.is_relative() && !grid.config_dir.empty() ? grid.config_dir / root : root;
  }
  return grid.config_dir.empty() ? fs::current_path() : grid.config_dir;
}

DatasetManifest build_training_manifest(const json& config, const fs::path& data_root) {
  validate_cell_config(config);
  const json& composition = config.at("composition");
  const std::string strategy = composition.value("strategy", std::string("full"));
  const std::string training_set = training_set_of(composition);
  const TrainConfig train = train_config_of(config);
  DatasetManifest msl;
  DatasetManifest m2020;
  msl.taxonomy_variant = m2020.taxonomy_variant = train.taxonomy;
  if (training_set != "m2020") msl = load_named_manifest(config, "msl_train", data_root);
  if (training_set != "msl") m2020 = load_named_manifest(config, "m2020_train", data_root);
  if (strategy == "mixed") {
    CompositionSpec spec;
    spec.cap = composition.at("cap").get<std::size_t>();
    spec.m2020_proportion = composition.at("m2020_proportion").get<double>();
    spec.seed = train.seed;
    return compose_mixed(spec, msl, m2020);
  }
  LabelFractionSpec spec;
  spec.fraction = strategy == "label_fraction" ? composition.at("label_fraction").get<double>() : 1.0;
  spec.seed = train.seed;
  return sample_label_fraction(spec, msl, m2020);
}

SweepResult run_grid(const ExperimentGrid& grid, const RunOptions& options) {
  const auto cells = expand_grid(grid);
  if (cells.empty()) config_error("grid " + grid.name + " expands to no cells");
  for (const auto& cell : cells) validate_cell_config(cell.config);
  const fs::path data_root = resolve_data_root(grid, options);
  for (const auto& cell : cells) check_inputs(cell.config, data_root);

  SweepResult result;
  result.name = grid.name;
  for (const auto& a : grid.axes) result.axis_names.push_back(a.name);
  result.taxonomy = train_config_of(cells.front().config).taxonomy;
  result.cells.resize(cells.size());

  fs::create_directories(grid.output_dir);
  json order = json::array();
  for (const auto& c : cells) order.push_back(c.digest);
  write_json(grid.output_dir / "sweep.json", json{{"name", grid.name},
                                                  {"axes", result.axis_names},
                                                  {"taxonomy", to_string(result.taxonomy)},
                                                  {"cells", order}});

  std::atomic<std::size_t> next{0};
  std::mutex callback_mutex;
  auto worker = [&]() {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      result.cells[i] = run_cell(cells[i], cell_dir(grid.output_dir, cells[i].digest), data_root);
      if (options.on_cell) {
        std::lock_guard lock(callback_mutex);
        options.on_cell(result.cells[i]);
      }
    }
  };
  const int workers = std::max(1, std::min<int>(options.workers, static_cast<int>(cells.size())));
  std::vector<std::thread> threads;
  for (int w = 1; w < workers; ++w) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  for (const auto& c : result.cells) {
    if (c.status == CellStatus::kFailed) result.failed_cells.push_back(c.digest);
  }
  result.aggregates = aggregate(result);
  write_sweep_summary(result, grid.output_dir);
  return result;
}

json to_json(const AggregateRow& row) {
  json j{{"setting", row.setting}, {"eval_set", row.eval_set}, {"metric", row.metric},
         {"n", row.values.size()},  {"values", row.values},     {"mean", row.mean}};
  j["ci_low"] = row.ci_low ? json(*row.ci_low) : json(nullptr);
  j["ci_high"] = row.ci_high ? json(*row.ci_high) : json(nullptr);
  return j;
}

void write_sweep_summary(const SweepResult& result, const fs::path& output_dir) {
  const ClassTaxonomy tax = make_taxonomy(result.taxonomy);
  fs::create_directories(output_dir);
  {
    std::ofstream out(output_dir / "summary.jsonl");
    if (!out) throw Error(ErrorCode::kIoFailure, "cannot write summary under " + output_dir.string());
    for (const auto& cell : result.cells) {
      json reports = json::object();
      for (const auto& [set, report] : cell.reports) reports[set] = summarize(report, tax);
      json record{{"digest", cell.digest}, {"axes", cell.axes}, {"status", to_string(cell.status)},
                  {"reports", reports}};
      record["error"] = cell.error ? json(*cell.error) : json(nullptr);
      out << record.dump() << '\n';
    }
  }
  json rows = json::array();
  for (const auto& row : result.aggregates) rows.push_back(to_json(row));
  write_json(output_dir / "aggregates.json",
             json{{"name", result.name}, {"failed_cells", result.failed_cells}, {"aggregates", rows}});
}

SweepResult load_sweep(const fs::path& output_dir) {
  const json sweep = read_json(output_dir / "sweep.json");
  SweepResult result;
  result.name = sweep.at("name").get<std::string>();
  result.axis_names = sweep.at("axes").get<std::vector<std::string>>();
  const auto variant = parse_taxonomy_variant(sweep.at("taxonomy").get<std::string>());
  if (!variant) throw Error(ErrorCode::kParseError, "bad taxonomy in sweep.json");
  result.taxonomy = *variant;
  for (const auto& digest_json : sweep.at("cells")) {
    const auto digest = digest_json.get<std::string>();
    const fs::path dir = cell_dir(output_dir, digest);
    CellResult cell;
    cell.digest = digest;
    if (!fs::exists(dir / "cell.json")) {
      cell.status = CellStatus::kFailed;
      cell.error = "cell never ran";
      result.cells.push_back(std::move(cell));
      continue;
    }
    const json meta = read_json(dir / "cell.json");
    cell.axes = meta.at("axes");
    const auto sets = eval_set_names(meta.at("config"));
    if (reports_present(dir, sets)) {
      for (const auto& s : sets) cell.reports[s] = report_from_json(read_json(dir / report_file(s)));
      cell.status = CellStatus::kCached;
    } else {
      cell.status = CellStatus::kFailed;
      std::ifstream err(dir / "error.txt");
      std::string line;
      cell.error = std::getline(err, line) ? line : std::string("reports missing");
    }
    result.cells.push_back(std::move(cell));
  }
  for (const auto& c : result.cells) {
    if (c.status == CellStatus::kFailed) result.failed_cells.push_back(c.digest);
  }
  result.aggregates = aggregate(result);
  return result;
}

}  // namespace terrainseg
