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

#ifndef TERRAINSEG_METRICS_HPP_
#define TERRAINSEG_METRICS_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "terrainseg/taxonomy.hpp"

namespace terrainseg {

// Rows are ground truth, columns are predictions. Ignore pixels never enter.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int num_classes);

  int num_classes() const { return classes_; }
  std::uint64_t at(int truth, int predicted) const { return counts_[index(truth, predicted)]; }
  std::uint64_t& at(int truth, int predicted) { return counts_[index(truth, predicted)]; }

  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(int truth) const;
  std::uint64_t col_sum(int predicted) const;

  // Adds one count per pixel whose target is not ignore_value. Throws
  // SHAPE_MISMATCH on unequal lengths and INVALID_LABEL_VALUE for
  // out-of-range labels.
  void add(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> target,
           std::uint8_t ignore_value = kIgnoreValue);

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;

  const std::vector<std::uint64_t>& raw() const { return counts_; }

 private:
  std::size_t index(int truth, int predicted) const {
    return static_cast<std::size_t>(truth) * static_cast<std::size_t>(classes_) + static_cast<std::size_t>(predicted);
  }
  int classes_ = 0;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix accumulate(ConfusionMatrix cm, const LabelMask& predicted, const LabelMask& target,
                           std::uint8_t ignore_value = kIgnoreValue);
// Entrywise sum; DIMENSION_MISMATCH when class counts differ.
ConfusionMatrix merge(const ConfusionMatrix& a, const ConfusionMatrix& b);

// A metric whose denominator is zero is nullopt ("undefined"), never 0.
struct ClassMetrics {
  std::uint64_t support = 0;    // TP + FN
  std::uint64_t predicted = 0;  // TP + FP
  std::optional<double> recall;
  std::optional<double> precision;
  std::optional<double> f1;   // 2TP / (2TP + FP + FN)
  std::optional<double> iou;  // TP / (TP + FP + FN)
};

struct EvalReport {
  ConfusionMatrix confusion;
  double accuracy = 0.0;  // pixel-pooled
  double f1_macro = 0.0;  // mean over classes with support
  double miou = 0.0;      // mean over classes with support
  std::vector<ClassMetrics> per_class;
  std::vector<int> excluded_classes;  // zero support, left out of the macro means
};

// Throws EMPTY_MATRIX when no pixel was counted.
EvalReport derive_metrics(const ConfusionMatrix& cm);

// Rows divided by their sums (all-zero rows stay zero).
std::vector<std::vector<double>> row_normalized(const ConfusionMatrix& cm);

nlohmann::json to_json(const ConfusionMatrix& cm);
ConfusionMatrix confusion_from_json(const nlohmann::json& j);
// Raw counts plus every derived metric; class names keyed from the taxonomy.
nlohmann::json to_json(const EvalReport& report, const ClassTaxonomy& taxonomy);
// Rebuilds a report from its persisted counts.
EvalReport report_from_json(const nlohmann::json& j);

}  // namespace terrainseg

#endif  // TERRAINSEG_METRICS_HPP_
