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

#include "terrainseg/losses.hpp"

#include <algorithm>
#include <cmath>

#include "terrainseg/error.hpp"

namespace terrainseg {

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kCrossEntropy: return "ce";
    case LossKind::kInverseFrequency: return "inv_freq";
    case LossKind::kRecall: return "recall";
    case LossKind::kInverseFrequencyPlusRecall: return "inv_freq_recall";
  }
  return "ce";
}

std::string_view to_string(FrequencyScope scope) { return scope == FrequencyScope::kBatch ? "batch" : "corpus"; }
std::string_view to_string(RecallScope scope) { return scope == RecallScope::kBatch ? "batch" : "running"; }

std::optional<LossKind> parse_loss_kind(std::string_view text) {
  for (LossKind k : {LossKind::kCrossEntropy, LossKind::kInverseFrequency, LossKind::kRecall,
                     LossKind::kInverseFrequencyPlusRecall}) {
    if (text == to_string(k)) return k;
  }
  if (text == "CE") return LossKind::kCrossEntropy;
  if (text == "INV_FREQ") return LossKind::kInverseFrequency;
  if (text == "RECALL") return LossKind::kRecall;
  if (text == "INV_FREQ_PLUS_RECALL") return LossKind::kInverseFrequencyPlusRecall;
  return std::nullopt;
}

std::optional<FrequencyScope> parse_frequency_scope(std::string_view text) {
  if (text == "batch") return FrequencyScope::kBatch;
  if (text == "corpus") return FrequencyScope::kCorpus;
  return std::nullopt;
}

std::optional<RecallScope> parse_recall_scope(std::string_view text) {
  if (text == "batch") return RecallScope::kBatch;
  if (text == "running") return RecallScope::kRunning;
  return std::nullopt;
}

std::string_view display_name(LossKind kind) {
  switch (kind) {
    case LossKind::kCrossEntropy: return "Cross Entropy";
    case LossKind::kInverseFrequency: return "Inverse Frequency";
    case LossKind::kRecall: return "Recall CE";
    case LossKind::kInverseFrequencyPlusRecall: return "Inverse Frequency + Recall CE";
  }
  return "";
}

void LossConfig::validate(int num_classes) const {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::kConfigError, "loss epsilon must be positive");
  const bool uses_frequency = kind == LossKind::kInverseFrequency || kind == LossKind::kInverseFrequencyPlusRecall;
  if (uses_frequency && frequency_scope == FrequencyScope::kCorpus &&
      corpus_counts.size() != static_cast<std::size_t>(num_classes)) {
    throw Error(ErrorCode::kConfigError, "corpus frequency scope needs one count per class");
  }
}

BatchClassStats::BatchClassStats(int num_classes)
    : pixels(static_cast<std::size_t>(num_classes), 0),
      true_positives(static_cast<std::size_t>(num_classes), 0),
      false_negatives(static_cast<std::size_t>(num_classes), 0) {}

std::optional<double> BatchClassStats::recall(int c) const {
  const auto i = static_cast<std::size_t>(c);
  const std::uint64_t denom = true_positives[i] + false_negatives[i];
  if (denom == 0) return std::nullopt;
  return static_cast<double>(true_positives[i]) / static_cast<double>(denom);
}

BatchClassStats& BatchClassStats::operator+=(const BatchClassStats& other) {
  if (other.num_classes() != num_classes()) throw Error(ErrorCode::kDimensionMismatch, "class count differs");
  for (std::size_t c = 0; c < pixels.size(); ++c) {
    pixels[c] += other.pixels[c];
    true_positives[c] += other.true_positives[c];
    false_negatives[c] += other.false_negatives[c];
  }
  return *this;
}

namespace {

void check_shapes(const LogitField& logits, std::span<const std::uint8_t> target) {
  if (logits.values.size() != logits.pixels() * static_cast<std::size_t>(logits.classes) ||
      target.size() != logits.pixels()) {
    throw Error(ErrorCode::kShapeMismatch, "logits and target disagree in size");
  }
}

}  // namespace

BatchClassStats BatchClassStats::from_logits(const LogitField& logits, std::span<const std::uint8_t> target,
                                             std::uint8_t ignore_value) {
  check_shapes(logits, target);
  BatchClassStats stats(logits.classes);
  const std::size_t plane = static_cast<std::size_t>(logits.height) * logits.width;
  for (int b = 0; b < logits.batch; ++b) {
    const double* base = logits.values.data() + static_cast<std::size_t>(b) * logits.classes * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      const std::uint8_t y = target[static_cast<std::size_t>(b) * plane + p];
      if (y == ignore_value) continue;
      if (y >= logits.classes) throw Error(ErrorCode::kInvalidLabelValue, "target value " + std::to_string(y));
      int best = 0;
      for (int c = 1; c < logits.classes; ++c) {
        if (base[c * plane + p] > base[best * plane + p]) best = c;
      }
      ++stats.pixels[y];
      if (best == y) {
        ++stats.true_positives[y];
      } else {
        ++stats.false_negatives[y];
      }
    }
  }
  return stats;
}

std::vector<double> inverse_frequency_weights(std::span<const std::uint64_t> counts, double epsilon) {
  std::uint64_t total = 0;
  std::size_t present = 0;
  for (auto n : counts) {
    total += n;
    present += n > 0 ? 1 : 0;
  }
  std::vector<double> weights(counts.size(), 0.0);
  if (present == 0) return weights;
  double sum = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) continue;
    const double freq = static_cast<double>(counts[c]) / static_cast<double>(total);
    weights[c] = 1.0 / std::max(freq, epsilon);
    sum += weights[c];
  }
  const double scale = static_cast<double>(present) / sum;
  for (auto& w : weights) w *= scale;
  return weights;
}

std::vector<double> recall_weights(const BatchClassStats& stats) {
  std::vector<double> weights(static_cast<std::size_t>(stats.num_classes()), 1.0);
  for (int c = 0; c < stats.num_classes(); ++c) {
    if (auto r = stats.recall(c)) weights[static_cast<std::size_t>(c)] = 1.0 - *r;
  }
  return weights;
}

std::vector<std::uint64_t> class_counts(std::span<const std::uint8_t> target, int num_classes,
                                        std::uint8_t ignore_value) {
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (std::uint8_t y : target) {
    if (y == ignore_value) continue;
    if (y >= num_classes) throw Error(ErrorCode::kInvalidLabelValue, "target value " + std::to_string(y));
    ++counts[y];
  }
  return counts;
}

LossResult weighted_cross_entropy(const LogitField& logits, std::span<const std::uint8_t> target,
                                  std::span<const double> class_weights, std::uint8_t ignore_value) {
  check_shapes(logits, target);
  if (class_weights.size() != static_cast<std::size_t>(logits.classes)) {
    throw Error(ErrorCode::kShapeMismatch, "one weight per class required");
  }
  LossResult result;
  result.class_weights.assign(class_weights.begin(), class_weights.end());
  result.gradient.assign(logits.values.size(), 0.0);

  for (std::uint8_t y : target) {
    if (y == ignore_value) continue;
    if (y >= logits.classes) throw Error(ErrorCode::kInvalidLabelValue, "target value " + std::to_string(y));
    ++result.counted_pixels;
  }
  if (result.counted_pixels == 0) throw Error(ErrorCode::kAllPixelsIgnored, "no labelled pixel in batch");
  const double inv_n = 1.0 / static_cast<double>(result.counted_pixels);

  const std::size_t plane = static_cast<std::size_t>(logits.height) * logits.width;
  const auto classes = static_cast<std::size_t>(logits.classes);
  std::vector<double> prob(classes);
  double total = 0.0;
  for (int b = 0; b < logits.batch; ++b) {
    const std::size_t offset = static_cast<std::size_t>(b) * classes * plane;
    const double* z = logits.values.data() + offset;
    double* g = result.gradient.data() + offset;
    for (std::size_t p = 0; p < plane; ++p) {
      const std::uint8_t y = target[static_cast<std::size_t>(b) * plane + p];
      if (y == ignore_value) continue;
      const double w = class_weights[y];
      double zmax = z[p];
      for (std::size_t c = 1; c < classes; ++c) zmax = std::max(zmax, z[c * plane + p]);
      double denom = 0.0;
      for (std::size_t c = 0; c < classes; ++c) {
        prob[c] = std::exp(z[c * plane + p] - zmax);
        denom += prob[c];
      }
      const double log_denom = std::log(denom);
      // -log softmax_y = log(sum exp(z - zmax)) - (z_y - zmax)
      total += w * (log_denom - (z[y * plane + p] - zmax));
      if (w == 0.0) continue;
      const double scale = w * inv_n;
      for (std::size_t c = 0; c < classes; ++c) {
        g[c * plane + p] = scale * (prob[c] / denom - (c == y ? 1.0 : 0.0));
      }
    }
  }
  result.value = total * inv_n;
  return result;
}

LossResult cross_entropy(const LogitField& logits, std::span<const std::uint8_t> target, std::uint8_t ignore_value) {
  const std::vector<double> ones(static_cast<std::size_t>(logits.classes), 1.0);
  return weighted_cross_entropy(logits, target, ones, ignore_value);
}

namespace {

std::vector<double> frequency_factor(const LogitField& logits, std::span<const std::uint8_t> target,
                                     const LossConfig& config) {
  if (config.frequency_scope == FrequencyScope::kCorpus) {
    return inverse_frequency_weights(config.corpus_counts, config.epsilon);
  }
  const auto counts = class_counts(target, logits.classes, config.ignore_value);
  return inverse_frequency_weights(counts, config.epsilon);
}

}  // namespace

LossResult inverse_frequency_ce(const LogitField& logits, std::span<const std::uint8_t> target,
                                const LossConfig& config) {
  check_shapes(logits, target);
  return weighted_cross_entropy(logits, target, frequency_factor(logits, target, config), config.ignore_value);
}

LossResult recall_ce(const LogitField& logits, std::span<const std::uint8_t> target, const LossConfig& config,
                     const BatchClassStats& stats) {
  check_shapes(logits, target);
  if (stats.num_classes() != logits.classes) throw Error(ErrorCode::kDimensionMismatch, "stats class count");
  return weighted_cross_entropy(logits, target, recall_weights(stats), config.ignore_value);
}

LossResult combined_loss(const LogitField& logits, std::span<const std::uint8_t> target, const LossConfig& config,
                         const BatchClassStats& stats) {
  check_shapes(logits, target);
  if (stats.num_classes() != logits.classes) throw Error(ErrorCode::kDimensionMismatch, "stats class count");
  std::vector<double> weights = frequency_factor(logits, target, config);
  const std::vector<double> recall = recall_weights(stats);
  for (std::size_t c = 0; c < weights.size(); ++c) weights[c] *= recall[c];
  return weighted_cross_entropy(logits, target, weights, config.ignore_value);
}

LossResult compute_loss(const LogitField& logits, std::span<const std::uint8_t> target, const LossConfig& config,
                        const BatchClassStats* stats) {
  switch (config.kind) {
    case LossKind::kCrossEntropy:
      return cross_entropy(logits, target, config.ignore_value);
    case LossKind::kInverseFrequency:
      return inverse_frequency_ce(logits, target, config);
    case LossKind::kRecall:
    case LossKind::kInverseFrequencyPlusRecall: {
      BatchClassStats local;
      if (stats == nullptr) {
        local = BatchClassStats::from_logits(logits, target, config.ignore_value);
        stats = &local;
      }
      return config.kind == LossKind::kRecall ? recall_ce(logits, target, config, *stats)
                                              : combined_loss(logits, target, config, *stats);
    }
  }
  throw Error(ErrorCode::kConfigError, "unknown loss kind");
}

}  // namespace terrainseg
