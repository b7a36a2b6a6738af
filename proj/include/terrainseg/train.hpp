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

#ifndef TERRAINSEG_TRAIN_HPP_
#define TERRAINSEG_TRAIN_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "terrainseg/ingest.hpp"
#include "terrainseg/losses.hpp"
#include "terrainseg/manifest.hpp"
#include "terrainseg/metrics.hpp"
#include "terrainseg/nn/model.hpp"
#include "terrainseg/nn/optim.hpp"

namespace terrainseg {

enum class LrSchedule { kConstant, kCosine };
std::string_view to_string(LrSchedule schedule);
std::optional<LrSchedule> parse_lr_schedule(std::string_view text);

struct TrainConfig {
  int epochs = 50;
  int batch_size = 16;
  double learning_rate = 1e-5;
  // kCosine anneals per epoch from learning_rate towards 0 over `epochs`.
  LrSchedule lr_schedule = LrSchedule::kConstant;
  nn::OptimizerKind optimizer = nn::OptimizerKind::kAdam;
  double momentum = 0.9;
  double weight_decay = 0.0;
  TaxonomyVariant taxonomy = TaxonomyVariant::kFourClass;
  LossConfig loss;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint_dir;  // empty disables checkpoints
  PreprocessSpec preprocess;
  bool freeze_encoder = false;
  std::size_t cache_limit_bytes = std::size_t{1} << 30;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  // Covers everything that shapes the trajectory. Paths are left out, and so
  // are epochs under a constant schedule, so such a run can be extended by
  // resuming.
  std::string digest() const;
};

nlohmann::json to_json(const LossConfig& config);
LossConfig loss_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PreprocessSpec& spec);
PreprocessSpec preprocess_from_json(const nlohmann::json& j);

struct EvalSet {
  std::string name;
  DatasetManifest manifest;
};

struct EvalSummary {
  double accuracy = 0.0;
  double f1_macro = 0.0;
  double miou = 0.0;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;  // running, from train-mode predictions
  std::map<std::string, EvalSummary> eval;
};

nlohmann::json to_json(const EpochRecord& record);
EpochRecord epoch_record_from_json(const nlohmann::json& j);

struct FinetuneOptions {
  std::vector<EvalSet> eval_sets;
  std::optional<std::filesystem::path> resume_from;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct FinetuneResult {
  std::vector<EpochRecord> history;
  std::optional<std::filesystem::path> best_checkpoint;
  std::optional<std::filesystem::path> last_checkpoint;
  double final_train_loss = 0.0;  // NaN when no epoch ran
};

// Learning rate used during 1-based epoch e.
double epoch_learning_rate(const TrainConfig& config, int epoch);

// Epoch e's visiting order; a pure function of (seed, manifest hash, e).
std::vector<std::size_t> epoch_order(std::uint64_t seed, const std::string& manifest_hash, int epoch, std::size_t n);

FinetuneResult finetune(nn::SegmentationModel& model, const DatasetManifest& train, const TrainConfig& config,
                        const FinetuneOptions& options = {});

// Rejects manifests holding TRAIN entries with SPLIT_VIOLATION.
EvalReport evaluate(nn::SegmentationModel& model, const DatasetManifest& test, const ClassTaxonomy& taxonomy,
                    const PreprocessSpec& preprocess, int batch_size = 4);
// Same pass without the split check, for measuring fit on training data.
EvalReport score(nn::SegmentationModel& model, const DatasetManifest& manifest, const ClassTaxonomy& taxonomy,
                 const PreprocessSpec& preprocess, int batch_size = 4);

struct LoadedCheckpoint {
  std::unique_ptr<nn::SegmentationModel> model;
  TrainConfig config;
  nn::BackboneSpec backbone;
  int epoch = 0;
  std::vector<EpochRecord> history;
  nn::Archive archive;
};

void save_checkpoint(const std::filesystem::path& path, nn::SegmentationModel& model, const nn::Optimizer& optimizer,
                     const TrainConfig& config, int epoch, const std::vector<EpochRecord>& history,
                     std::optional<double> best_metric);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace terrainseg

#endif  // TERRAINSEG_TRAIN_HPP_
