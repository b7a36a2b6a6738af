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

#ifndef TERRAINSEG_LOSSES_HPP_
#define TERRAINSEG_LOSSES_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "terrainseg/taxonomy.hpp"

namespace terrainseg {

enum class LossKind { kCrossEntropy, kInverseFrequency, kRecall, kInverseFrequencyPlusRecall };
enum class WeightNormalization { kSumToC };
// Where class frequencies for inverse-frequency weights come from.
enum class FrequencyScope { kBatch, kCorpus };
// kBatch: recall from the current batch only. kRunning: TP/FN accumulated
// over the epoch so far (including the current batch).
enum class RecallScope { kBatch, kRunning };

std::string_view to_string(LossKind kind);
std::string_view to_string(FrequencyScope scope);
std::string_view to_string(RecallScope scope);
std::optional<LossKind> parse_loss_kind(std::string_view text);
std::optional<FrequencyScope> parse_frequency_scope(std::string_view text);
std::optional<RecallScope> parse_recall_scope(std::string_view text);
// "Cross Entropy", "Inverse Frequency", "Recall CE", "Inverse Frequency + Recall CE"
std::string_view display_name(LossKind kind);

struct LossConfig {
  LossKind kind = LossKind::kCrossEntropy;
  WeightNormalization normalization = WeightNormalization::kSumToC;
  FrequencyScope frequency_scope = FrequencyScope::kBatch;
  RecallScope recall_scope = RecallScope::kBatch;
  double epsilon = 1e-8;
  // Per-class pixel counts, used when frequency_scope == kCorpus.
  std::vector<std::uint64_t> corpus_counts;
  std::uint8_t ignore_value = kIgnoreValue;

  // Throws CONFIG_ERROR.
  void validate(int num_classes) const;
};

// Per-pixel class scores, NCHW.
struct LogitField {
  int batch = 0;
  int classes = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;

  LogitField() = default;
  LogitField(int b, int c, int h, int w)
      : batch(b), classes(c), height(h), width(w), values(static_cast<std::size_t>(b) * c * h * w, 0.0) {}

  std::size_t pixels() const { return static_cast<std::size_t>(batch) * height * width; }
  std::size_t index(int b, int c, int y, int x) const {
    return ((static_cast<std::size_t>(b) * classes + c) * height + y) * width + x;
  }
  double& at(int b, int c, int y, int x) { return values[index(b, c, y, x)]; }
  double at(int b, int c, int y, int x) const { return values[index(b, c, y, x)]; }
};

// Per-class confusion counts of argmax(logits) against the target, ignore
// pixels excluded. pixels[c] == true_positives[c] + false_negatives[c].
struct BatchClassStats {
  std::vector<std::uint64_t> pixels;
  std::vector<std::uint64_t> true_positives;
  std::vector<std::uint64_t> false_negatives;

  explicit BatchClassStats(int num_classes = 0);
  int num_classes() const { return static_cast<int>(pixels.size()); }
  // TP / (TP + FN); nullopt when the class has no pixels.
  std::optional<double> recall(int c) const;
  BatchClassStats& operator+=(const BatchClassStats& other);

  static BatchClassStats from_logits(const LogitField& logits, std::span<const std::uint8_t> target,
                                     std::uint8_t ignore_value = kIgnoreValue);
};

struct LossResult {
  double value = 0.0;
  std::vector<double> gradient;       // d value / d logits, same layout as LogitField
  std::vector<double> class_weights;  // weight applied to pixels of each true class
  std::size_t counted_pixels = 0;     // non-ignored pixels (N)
};

// Inverse-frequency class weights, w_c proportional to N / N_c, rescaled so the
// weights of classes with N_c > 0 sum to the number of such classes. Classes
// with N_c == 0 get weight 0.
std::vector<double> inverse_frequency_weights(std::span<const std::uint64_t> counts, double epsilon);
// 1 - R_c; classes without pixels get 1.
std::vector<double> recall_weights(const BatchClassStats& stats);
// Per-class pixel counts of the target, ignore pixels excluded.
std::vector<std::uint64_t> class_counts(std::span<const std::uint8_t> target, int num_classes,
                                        std::uint8_t ignore_value);

// (1/N) * sum over non-ignored pixels of w[y] * -log softmax(logits)[y], with
// its exact gradient. Ignore pixels contribute nothing to value or gradient.
// Throws ALL_PIXELS_IGNORED, SHAPE_MISMATCH, INVALID_LABEL_VALUE.
LossResult weighted_cross_entropy(const LogitField& logits, std::span<const std::uint8_t> target,
                                  std::span<const double> class_weights, std::uint8_t ignore_value);

LossResult cross_entropy(const LogitField& logits, std::span<const std::uint8_t> target,
                         std::uint8_t ignore_value = kIgnoreValue);
LossResult inverse_frequency_ce(const LogitField& logits, std::span<const std::uint8_t> target,
                                const LossConfig& config);
// Recall weights are constants: no gradient flows through the stats.
LossResult recall_ce(const LogitField& logits, std::span<const std::uint8_t> target, const LossConfig& config,
                     const BatchClassStats& stats);
// Weight = normalized inverse frequency * (1 - recall).
LossResult combined_loss(const LogitField& logits, std::span<const std::uint8_t> target, const LossConfig& config,
                         const BatchClassStats& stats);

// Dispatch on config.kind. stats may be null for kinds that do not need it,
// in which case batch stats are derived from the logits.
LossResult compute_loss(const LogitField& logits, std::span<const std::uint8_t> target, const LossConfig& config,
                        const BatchClassStats* stats = nullptr);

}  // namespace terrainseg

#endif  // TERRAINSEG_LOSSES_HPP_
