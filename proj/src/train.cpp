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

#include "terrainseg/train.hpp"

#include <cmath>
#include <numbers>
#include <limits>

#include <spdlog/spdlog.h>

#include "terrainseg/digest.hpp"
#include "terrainseg/error.hpp"
#include "terrainseg/nn/archive.hpp"
#include "terrainseg/rng.hpp"

namespace terrainseg {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr char kCheckpointKind[] = "terrainseg-checkpoint";

// Preprocessed samples, kept in memory while they fit the configured budget.
class SampleSource {
 public:
  SampleSource(const DatasetManifest& manifest, const PreprocessSpec& spec, const ClassTaxonomy& taxonomy,
               std::size_t cache_limit_bytes)
      : manifest_(manifest), spec_(spec), taxonomy_(taxonomy), cache_(manifest.size()) {
    const std::size_t per_sample = static_cast<std::size_t>(spec.output_channels()) * spec.height * spec.width *
                                       sizeof(float) +
                                   static_cast<std::size_t>(spec.height) * spec.width;
    caching_ = per_sample * manifest.size() <= cache_limit_bytes;
  }

  const PreparedSample& get(std::size_t i) {
    if (cache_[i]) return *cache_[i];
    PreparedSample prepared = preprocess_sample(manifest_.entries[i], spec_, taxonomy_);
    if (caching_) {
      cache_[i] = std::move(prepared);
      return *cache_[i];
    }
    scratch_ = std::move(prepared);
    return scratch_;
  }

 private:
  const DatasetManifest& manifest_;
  PreprocessSpec spec_;
  ClassTaxonomy taxonomy_;
  std::vector<std::optional<PreparedSample>> cache_;
  PreparedSample scratch_;
  bool caching_ = false;
};

struct Batch {
  nn::Tensor images;
  std::vector<std::uint8_t> target;
};

Batch assemble(SampleSource& source, std::span<const std::size_t> indices, const PreprocessSpec& spec) {
  Batch batch;
  const int n = static_cast<int>(indices.size());
  batch.images = nn::Tensor(n, spec.output_channels(), spec.height, spec.width);
  batch.target.resize(static_cast<std::size_t>(n) * spec.height * spec.width);
  for (int b = 0; b < n; ++b) {
    const PreparedSample& s = source.get(indices[static_cast<std::size_t>(b)]);
    std::copy(s.image.data.begin(), s.image.data.end(), batch.images.sample(b));
    std::copy(s.mask.values.begin(), s.mask.values.end(),
              batch.target.begin() + static_cast<std::ptrdiff_t>(b) * spec.height * spec.width);
  }
  return batch;
}

LogitField to_logit_field(const nn::Tensor& t) {
  LogitField field(t.n, t.c, t.h, t.w);
  std::copy(t.data.begin(), t.data.end(), field.values.begin());
  return field;
}

std::vector<std::uint8_t> argmax_labels(const nn::Tensor& logits) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(logits.n) * logits.plane());
  for (int b = 0; b < logits.n; ++b) {
    for (std::size_t i = 0; i < logits.plane(); ++i) {
      int best = 0;
      float best_value = logits.channel(b, 0)[i];
      for (int c = 1; c < logits.c; ++c) {
        const float v = logits.channel(b, c)[i];
        if (v > best_value) {
          best_value = v;
          best = c;
        }
      }
      out[static_cast<std::size_t>(b) * logits.plane() + i] = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

EvalReport run_inference(nn::SegmentationModel& model, const DatasetManifest& manifest,
                         const ClassTaxonomy& taxonomy, const PreprocessSpec& preprocess, int batch_size) {
  if (manifest.empty()) throw Error(ErrorCode::kEmptyDataset, "nothing to evaluate in " + manifest.dataset_id);
  if (batch_size <= 0) throw Error(ErrorCode::kInvalidArgument, "batch_size must be positive");
  if (model.num_classes() != taxonomy.num_classes()) {
    throw Error(ErrorCode::kShapeMismatch, "model head and taxonomy disagree on the class count");
  }
  SampleSource source(manifest, preprocess, taxonomy, 0);
  ConfusionMatrix cm(taxonomy.num_classes());
  std::vector<std::size_t> indices(manifest.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  for (std::size_t start = 0; start < indices.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t count = std::min(indices.size() - start, static_cast<std::size_t>(batch_size));
    Batch batch = assemble(source, std::span(indices).subspan(start, count), preprocess);
    const nn::Tensor logits = model.forward(batch.images, nn::Mode::kEval);
    cm.add(argmax_labels(logits), batch.target, taxonomy.ignore_value());
  }
  return derive_metrics(cm);
}

std::vector<std::uint64_t> corpus_counts(SampleSource& source, std::size_t n, int classes) {
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(classes), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = class_counts(source.get(i).mask.values, classes, kIgnoreValue);
    for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += c[k];
  }
  return counts;
}

double selection_metric(const EpochRecord& record, const std::vector<EvalSet>& eval_sets) {
  if (!eval_sets.empty()) return record.eval.at(eval_sets.front().name).accuracy;
  return record.train_accuracy;
}

}  // namespace

// ----------------------------------------------------------------- config

void TrainConfig::validate() const {
  if (epochs < 0) throw Error(ErrorCode::kConfigError, "epochs must be non-negative");
  if (batch_size <= 0) throw Error(ErrorCode::kConfigError, "batch_size must be positive");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::kConfigError, "learning_rate must be positive");
  if (momentum < 0.0 || weight_decay < 0.0) throw Error(ErrorCode::kConfigError, "momentum and weight_decay must be >= 0");
  preprocess.validate();
  if (loss.frequency_scope != FrequencyScope::kCorpus || !loss.corpus_counts.empty()) {
    loss.validate(make_taxonomy(taxonomy).num_classes());
  } else if (!(loss.epsilon > 0.0)) {
    throw Error(ErrorCode::kConfigError, "loss epsilon must be positive");
  }
}

json to_json(const LossConfig& config) {
  json j{{"kind", to_string(config.kind)},
         {"normalization", "sum_to_c"},
         {"frequency_scope", to_string(config.frequency_scope)},
         {"recall_scope", to_string(config.recall_scope)},
         {"epsilon", config.epsilon},
         {"ignore_value", config.ignore_value}};
  if (!config.corpus_counts.empty()) j["corpus_counts"] = config.corpus_counts;
  return j;
}

LossConfig loss_config_from_json(const json& j) {
  LossConfig config;
  if (j.contains("kind")) {
    const auto kind = parse_loss_kind(j.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::kConfigError, "unknown loss kind " + j.at("kind").dump());
    config.kind = *kind;
  }
  if (j.contains("normalization") && j.at("normalization").get<std::string>() != "sum_to_c") {
    throw Error(ErrorCode::kConfigError, "only sum_to_c weight normalization is supported");
  }
  if (j.contains("frequency_scope")) {
    const auto scope = parse_frequency_scope(j.at("frequency_scope").get<std::string>());
    if (!scope) throw Error(ErrorCode::kConfigError, "unknown frequency_scope " + j.at("frequency_scope").dump());
    config.frequency_scope = *scope;
  }
  if (j.contains("recall_scope")) {
    const auto scope = parse_recall_scope(j.at("recall_scope").get<std::string>());
    if (!scope) throw Error(ErrorCode::kConfigError, "unknown recall_scope " + j.at("recall_scope").dump());
    config.recall_scope = *scope;
  }
  config.epsilon = j.value("epsilon", config.epsilon);
  config.ignore_value = j.value("ignore_value", config.ignore_value);
  if (j.contains("corpus_counts")) config.corpus_counts = j.at("corpus_counts").get<std::vector<std::uint64_t>>();
  return config;
}

json to_json(const PreprocessSpec& spec) {
  return json{{"height", spec.height},
              {"width", spec.width},
              {"to_grayscale", spec.to_grayscale},
              {"replicate_channels", spec.replicate_channels},
              {"normalization", spec.normalization == InputNormalization::kImagenet ? "imagenet" : "unit"}};
}

PreprocessSpec preprocess_from_json(const json& j) {
  PreprocessSpec spec;
  spec.height = j.value("height", spec.height);
  spec.width = j.value("width", spec.width);
  spec.to_grayscale = j.value("to_grayscale", spec.to_grayscale);
  spec.replicate_channels = j.value("replicate_channels", spec.replicate_channels);
  if (j.contains("normalization")) {
    const auto text = j.at("normalization").get<std::string>();
    if (text == "imagenet") {
      spec.normalization = InputNormalization::kImagenet;
    } else if (text == "unit") {
      spec.normalization = InputNormalization::kUnit;
    } else {
      throw Error(ErrorCode::kConfigError, "unknown normalization " + text);
    }
  }
  try {
    spec.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfigError, e.what());
  }
  return spec;
}

std::string_view to_string(LrSchedule schedule) {
  return schedule == LrSchedule::kConstant ? "constant" : "cosine";
}

std::optional<LrSchedule> parse_lr_schedule(std::string_view text) {
  if (text == "constant") return LrSchedule::kConstant;
  if (text == "cosine") return LrSchedule::kCosine;
  return std::nullopt;
}

double epoch_learning_rate(const TrainConfig& config, int epoch) {
  if (config.lr_schedule == LrSchedule::kConstant || config.epochs <= 0) return config.learning_rate;
  const double t = static_cast<double>(epoch - 1) / static_cast<double>(config.epochs);
  return config.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

json TrainConfig::to_json() const {
  return json{{"epochs", epochs},
              {"batch_size", batch_size},
              {"learning_rate", learning_rate},
              {"lr_schedule", to_string(lr_schedule)},
              {"optimizer", nn::to_string(optimizer)},
              {"momentum", momentum},
              {"weight_decay", weight_decay},
              {"taxonomy", to_string(taxonomy)},
              {"loss", terrainseg::to_json(loss)},
              {"seed", seed},
              {"checkpoint_dir", checkpoint_dir.generic_string()},
              {"preprocess", terrainseg::to_json(preprocess)},
              {"freeze_encoder", freeze_encoder}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig config;
  try {
    config.epochs = j.value("epochs", config.epochs);
    config.batch_size = j.value("batch_size", config.batch_size);
    config.learning_rate = j.value("learning_rate", config.learning_rate);
    if (j.contains("lr_schedule")) {
      const auto schedule = parse_lr_schedule(j.at("lr_schedule").get<std::string>());
      if (!schedule) throw Error(ErrorCode::kConfigError, "unknown lr_schedule " + j.at("lr_schedule").dump());
      config.lr_schedule = *schedule;
    }
    if (j.contains("optimizer")) {
      const auto kind = nn::parse_optimizer_kind(j.at("optimizer").get<std::string>());
      if (!kind) throw Error(ErrorCode::kConfigError, "unknown optimizer " + j.at("optimizer").dump());
      config.optimizer = *kind;
    }
    config.momentum = j.value("momentum", config.momentum);
    config.weight_decay = j.value("weight_decay", config.weight_decay);
    if (j.contains("taxonomy")) {
      const auto variant = parse_taxonomy_variant(j.at("taxonomy").get<std::string>());
      if (!variant) throw Error(ErrorCode::kConfigError, "unknown taxonomy " + j.at("taxonomy").dump());
      config.taxonomy = *variant;
    }
    if (j.contains("loss")) config.loss = loss_config_from_json(j.at("loss"));
    config.seed = j.value("seed", config.seed);
    config.checkpoint_dir = j.value("checkpoint_dir", std::string());
    if (j.contains("preprocess")) config.preprocess = preprocess_from_json(j.at("preprocess"));
    config.freeze_encoder = j.value("freeze_encoder", config.freeze_encoder);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("train config: ") + e.what());
  }
  config.validate();
  return config;
}

std::string TrainConfig::digest() const {
  json j = to_json();
  if (lr_schedule == LrSchedule::kConstant) j.erase("epochs");
  j.erase("checkpoint_dir");
  return sha256_hex(j.dump());
}

json to_json(const EpochRecord& record) {
  json eval = json::object();
  for (const auto& [name, s] : record.eval) {
    eval[name] = {{"accuracy", s.accuracy}, {"f1_macro", s.f1_macro}, {"miou", s.miou}};
  }
  return json{{"epoch", record.epoch},
              {"train_loss", record.train_loss},
              {"train_accuracy", record.train_accuracy},
              {"eval", eval}};
}

EpochRecord epoch_record_from_json(const json& j) {
  EpochRecord record;
  record.epoch = j.at("epoch").get<int>();
  record.train_loss = j.at("train_loss").get<double>();
  record.train_accuracy = j.at("train_accuracy").get<double>();
  for (const auto& [name, s] : j.at("eval").items()) {
    record.eval[name] = {s.at("accuracy").get<double>(), s.at("f1_macro").get<double>(), s.at("miou").get<double>()};
  }
  return record;
}

// ------------------------------------------------------------ checkpoints

void save_checkpoint(const fs::path& path, nn::SegmentationModel& model, const nn::Optimizer& optimizer,
                     const TrainConfig& config, int epoch, const std::vector<EpochRecord>& history,
                     std::optional<double> best_metric) {
  nn::Archive archive;
  json hist = json::array();
  for (const auto& r : history) hist.push_back(to_json(r));
  archive.meta = {{"kind", kCheckpointKind},
                  {"epoch", epoch},
                  {"config", config.to_json()},
                  {"config_digest", config.digest()},
                  {"seed", config.seed},
                  {"init_seed", model.init_seed()},
                  {"backbone", model.backbone().to_json()},
                  {"taxonomy", to_string(model.taxonomy_variant())},
                  {"history", hist}};
  archive.meta["best_metric"] = best_metric ? json(*best_metric) : json(nullptr);
  for (nn::Parameter* p : model.parameters()) archive.add(p->name, p->shape, p->value);
  optimizer.save(archive);
  nn::write_archive(archive, path);
}

LoadedCheckpoint load_checkpoint(const fs::path& path) {
  LoadedCheckpoint out;
  out.archive = nn::read_archive(path);
  const json& meta = out.archive.meta;
  if (meta.value("kind", std::string()) != kCheckpointKind) {
    throw Error(ErrorCode::kCorruptFile, path.string() + " is not a checkpoint");
  }
  out.config = TrainConfig::from_json(meta.at("config"));
  if (meta.at("config_digest").get<std::string>() != out.config.digest()) {
    throw Error(ErrorCode::kCorruptFile, path.string() + ": config digest does not match its config");
  }
  out.backbone = nn::BackboneSpec::from_json(meta.at("backbone"));
  out.epoch = meta.at("epoch").get<int>();
  for (const auto& r : meta.at("history")) out.history.push_back(epoch_record_from_json(r));
  const auto variant = parse_taxonomy_variant(meta.at("taxonomy").get<std::string>());
  if (!variant) throw Error(ErrorCode::kCorruptFile, path.string() + ": bad taxonomy");
  out.model = std::make_unique<nn::SegmentationModel>(out.backbone, make_taxonomy(*variant),
                                                      meta.at("init_seed").get<std::uint64_t>());
  for (nn::Parameter* p : out.model->parameters()) {
    const nn::NamedTensor* t = out.archive.find(p->name);
    if (t == nullptr) throw Error(ErrorCode::kCorruptFile, path.string() + " lacks " + p->name);
    if (t->shape != p->shape) throw Error(ErrorCode::kShapeMismatch, path.string() + ": shape of " + p->name);
    p->value = t->data;
  }
  out.model->set_encoder_frozen(out.config.freeze_encoder);
  return out;
}

// --------------------------------------------------------------- training

std::vector<std::size_t> epoch_order(std::uint64_t seed, const std::string& manifest_hash, int epoch, std::size_t n) {
  Rng rng = Rng(seed).split("epoch-order").split(manifest_hash).split(static_cast<std::uint64_t>(epoch));
  return rng.permutation(n);
}

FinetuneResult finetune(nn::SegmentationModel& model, const DatasetManifest& train, const TrainConfig& config,
                        const FinetuneOptions& options) {
  config.validate();
  if (train.empty()) throw Error(ErrorCode::kEmptyDataset, "training manifest " + train.dataset_id + " is empty");
  for (const auto& e : train.entries) {
    if (e.split != Split::kTrain) throw Error(ErrorCode::kSplitViolation, "TEST sample in training set: " + e.image_ref);
  }
  const ClassTaxonomy taxonomy = make_taxonomy(config.taxonomy);
  if (model.num_classes() != taxonomy.num_classes() || model.taxonomy_variant() != taxonomy.variant()) {
    spdlog::info("rebuilding classifier for {} classes", taxonomy.num_classes());
    model.rebuild_head(taxonomy);
  }
  model.set_encoder_frozen(config.freeze_encoder);

  SampleSource source(train, config.preprocess, taxonomy, config.cache_limit_bytes);
  LossConfig loss_config = config.loss;
  if (loss_config.frequency_scope == FrequencyScope::kCorpus && loss_config.corpus_counts.empty()) {
    loss_config.corpus_counts = corpus_counts(source, train.size(), taxonomy.num_classes());
  }
  loss_config.validate(taxonomy.num_classes());

  nn::OptimizerConfig opt_config;
  opt_config.kind = config.optimizer;
  opt_config.learning_rate = config.learning_rate;
  opt_config.momentum = config.momentum;
  opt_config.weight_decay = config.weight_decay;
  nn::Optimizer optimizer(opt_config);

  FinetuneResult result;
  std::optional<double> best_metric;
  int start_epoch = 1;
  if (options.resume_from) {
    LoadedCheckpoint ck = load_checkpoint(*options.resume_from);
    if (ck.config.digest() != config.digest()) {
      throw Error(ErrorCode::kConfigError, "checkpoint " + options.resume_from->string() +
                                               " was produced by a different training config");
    }
    if (ck.backbone.family != model.backbone().family) {
      throw Error(ErrorCode::kConfigError, "checkpoint backbone differs from the model");
    }
    for (nn::Parameter* p : model.parameters()) {
      const nn::NamedTensor* t = ck.archive.find(p->name);
      if (t == nullptr || t->shape != p->shape) {
        throw Error(ErrorCode::kShapeMismatch, "checkpoint does not fit parameter " + p->name);
      }
      p->value = t->data;
    }
    optimizer.load(ck.archive);
    result.history = ck.history;
    if (!ck.archive.meta.at("best_metric").is_null()) best_metric = ck.archive.meta.at("best_metric").get<double>();
    start_epoch = ck.epoch + 1;
    spdlog::info("resuming from {} at epoch {}", options.resume_from->string(), start_epoch);
  }

  const bool checkpointing = !config.checkpoint_dir.empty();
  const fs::path last_path = config.checkpoint_dir / "last.tsck";
  const fs::path best_path = config.checkpoint_dir / "best.tsck";
  if (checkpointing && start_epoch > config.epochs) {
    save_checkpoint(last_path, model, optimizer, config, start_epoch - 1, result.history, best_metric);
    result.last_checkpoint = last_path;
  }

  const std::string manifest_hash = train.content_hash();
  const auto params = model.parameters();
  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  for (int epoch = start_epoch; epoch <= config.epochs; ++epoch) {
    const auto order = epoch_order(config.seed, manifest_hash, epoch, train.size());
    optimizer.set_learning_rate(epoch_learning_rate(config, epoch));
    double loss_sum = 0.0;
    std::size_t loss_batches = 0;
    std::uint64_t correct = 0;
    std::uint64_t counted = 0;
    BatchClassStats running(taxonomy.num_classes());
    for (std::size_t start = 0, batch_id = 0; start < order.size(); start += batch_size, ++batch_id) {
      const std::size_t count = std::min(order.size() - start, batch_size);
      Batch batch = assemble(source, std::span(order).subspan(start, count), config.preprocess);
      const nn::Tensor logits = model.forward(batch.images, nn::Mode::kTrain);
      const LogitField field = to_logit_field(logits);
      const BatchClassStats stats = BatchClassStats::from_logits(field, batch.target, loss_config.ignore_value);
      for (int c = 0; c < taxonomy.num_classes(); ++c) {
        correct += stats.true_positives[static_cast<std::size_t>(c)];
        counted += stats.pixels[static_cast<std::size_t>(c)];
      }
      running += stats;
      const BatchClassStats* recall_stats = loss_config.recall_scope == RecallScope::kRunning ? &running : &stats;
      LossResult loss;
      try {
        loss = compute_loss(field, batch.target, loss_config, recall_stats);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kAllPixelsIgnored) throw;
        spdlog::warn("epoch {} batch {}: every pixel ignored, skipped", epoch, batch_id);
        continue;
      }
      if (!std::isfinite(loss.value)) {
        throw Error(ErrorCode::kDiverged, "non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                                              std::to_string(batch_id));
      }
      nn::Tensor grad(logits.n, logits.c, logits.h, logits.w);
      for (std::size_t i = 0; i < grad.data.size(); ++i) grad.data[i] = static_cast<float>(loss.gradient[i]);
      for (nn::Parameter* p : params) p->zero_grad();
      model.backward(grad);
      optimizer.step(params);
      loss_sum += loss.value;
      ++loss_batches;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_batches > 0 ? loss_sum / static_cast<double>(loss_batches)
                                         : std::numeric_limits<double>::quiet_NaN();
    record.train_accuracy = counted > 0 ? static_cast<double>(correct) / static_cast<double>(counted) : 0.0;
    for (const auto& set : options.eval_sets) {
      const EvalReport report = evaluate(model, set.manifest, taxonomy, config.preprocess, config.batch_size);
      record.eval[set.name] = {report.accuracy, report.f1_macro, report.miou};
    }
    spdlog::info("epoch {}/{} loss {:.6f} train acc {:.4f}", epoch, config.epochs, record.train_loss,
                 record.train_accuracy);
    result.history.push_back(record);
    if (options.on_epoch) options.on_epoch(record);

    const double metric = selection_metric(record, options.eval_sets);
    const bool improved = !best_metric || metric > *best_metric;
    if (improved) best_metric = metric;
    if (checkpointing) {
      save_checkpoint(last_path, model, optimizer, config, epoch, result.history, best_metric);
      result.last_checkpoint = last_path;
      if (improved) fs::copy_file(last_path, best_path, fs::copy_options::overwrite_existing);
    }
  }
  if (checkpointing && fs::exists(best_path)) result.best_checkpoint = best_path;
  result.final_train_loss =
      result.history.empty() ? std::numeric_limits<double>::quiet_NaN() : result.history.back().train_loss;
  return result;
}

EvalReport evaluate(nn::SegmentationModel& model, const DatasetManifest& test, const ClassTaxonomy& taxonomy,
                    const PreprocessSpec& preprocess, int batch_size) {
  for (const auto& e : test.entries) {
    if (e.split == Split::kTrain) {
      throw Error(ErrorCode::kSplitViolation, "TRAIN sample in evaluation set: " + e.image_ref);
    }
  }
  return run_inference(model, test, taxonomy, preprocess, batch_size);
}

EvalReport score(nn::SegmentationModel& model, const DatasetManifest& manifest, const ClassTaxonomy& taxonomy,
                 const PreprocessSpec& preprocess, int batch_size) {
  return run_inference(model, manifest, taxonomy, preprocess, batch_size);
}

}  // namespace terrainseg
