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

#include "terrainseg/metrics.hpp"

#include "terrainseg/error.hpp"

namespace terrainseg {

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : classes_(num_classes), counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {
  if (num_classes <= 0) throw Error(ErrorCode::kInvalidArgument, "confusion matrix needs at least one class");
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t sum = 0;
  for (auto v : counts_) sum += v;
  return sum;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t sum = 0;
  for (int c = 0; c < classes_; ++c) sum += at(c, c);
  return sum;
}

std::uint64_t ConfusionMatrix::row_sum(int truth) const {
  std::uint64_t sum = 0;
  for (int p = 0; p < classes_; ++p) sum += at(truth, p);
  return sum;
}

std::uint64_t ConfusionMatrix::col_sum(int predicted) const {
  std::uint64_t sum = 0;
  for (int t = 0; t < classes_; ++t) sum += at(t, predicted);
  return sum;
}

void ConfusionMatrix::add(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> target,
                          std::uint8_t ignore_value) {
  if (predicted.size() != target.size()) throw Error(ErrorCode::kShapeMismatch, "prediction and target sizes differ");
  for (std::size_t i = 0; i < target.size(); ++i) {
    const std::uint8_t t = target[i];
    if (t == ignore_value) continue;
    const std::uint8_t p = predicted[i];
    if (t >= classes_ || p >= classes_) {
      throw Error(ErrorCode::kInvalidLabelValue, "label " + std::to_string(t >= classes_ ? t : p) + " out of range");
    }
    ++counts_[index(t, p)];
  }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw Error(ErrorCode::kDimensionMismatch, "confusion matrices differ in size");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

ConfusionMatrix accumulate(ConfusionMatrix cm, const LabelMask& predicted, const LabelMask& target,
                           std::uint8_t ignore_value) {
  if (predicted.height != target.height || predicted.width != target.width) {
    throw Error(ErrorCode::kShapeMismatch, "prediction and target masks differ in shape");
  }
  cm.add(predicted.values, target.values, ignore_value);
  return cm;
}

ConfusionMatrix merge(const ConfusionMatrix& a, const ConfusionMatrix& b) {
  ConfusionMatrix out = a;
  out += b;
  return out;
}

EvalReport derive_metrics(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw Error(ErrorCode::kEmptyMatrix, "no evaluated pixels");
  EvalReport report;
  report.confusion = cm;
  report.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);

  double f1_sum = 0.0;
  double iou_sum = 0.0;
  int supported = 0;
  for (int c = 0; c < cm.num_classes(); ++c) {
    ClassMetrics m;
    const double tp = static_cast<double>(cm.at(c, c));
    m.support = cm.row_sum(c);
    m.predicted = cm.col_sum(c);
    const double fn = static_cast<double>(m.support) - tp;
    const double fp = static_cast<double>(m.predicted) - tp;
    if (m.support > 0) m.recall = tp / static_cast<double>(m.support);
    if (m.predicted > 0) m.precision = tp / static_cast<double>(m.predicted);
    if (m.support > 0 || m.predicted > 0) {
      m.f1 = 2.0 * tp / (2.0 * tp + fp + fn);
      m.iou = tp / (tp + fp + fn);
    }
    if (m.support > 0) {
      f1_sum += *m.f1;
      iou_sum += *m.iou;
      ++supported;
    } else {
      report.excluded_classes.push_back(c);
    }
    report.per_class.push_back(m);
  }
  report.f1_macro = f1_sum / supported;
  report.miou = iou_sum / supported;
  return report;
}

std::vector<std::vector<double>> row_normalized(const ConfusionMatrix& cm) {
  const int n = cm.num_classes();
  std::vector<std::vector<double>> out(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 0.0));
  for (int t = 0; t < n; ++t) {
    const std::uint64_t row = cm.row_sum(t);
    if (row == 0) continue;
    for (int p = 0; p < n; ++p) {
      out[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)] =
          static_cast<double>(cm.at(t, p)) / static_cast<double>(row);
    }
  }
  return out;
}

nlohmann::json to_json(const ConfusionMatrix& cm) {
  nlohmann::json rows = nlohmann::json::array();
  for (int t = 0; t < cm.num_classes(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (int p = 0; p < cm.num_classes(); ++p) row.push_back(cm.at(t, p));
    rows.push_back(std::move(row));
  }
  return rows;
}

ConfusionMatrix confusion_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw Error(ErrorCode::kParseError, "confusion matrix must be a non-empty array");
  const int n = static_cast<int>(j.size());
  ConfusionMatrix cm(n);
  for (int t = 0; t < n; ++t) {
    const auto& row = j[static_cast<std::size_t>(t)];
    if (!row.is_array() || static_cast<int>(row.size()) != n) {
      throw Error(ErrorCode::kParseError, "confusion matrix must be square");
    }
    for (int p = 0; p < n; ++p) cm.at(t, p) = row[static_cast<std::size_t>(p)].get<std::uint64_t>();
  }
  return cm;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace

nlohmann::json to_json(const EvalReport& report, const ClassTaxonomy& taxonomy) {
  nlohmann::json j;
  j["taxonomy"] = std::string(to_string(taxonomy.variant()));
  j["confusion"] = to_json(report.confusion);
  j["total_pixels"] = report.confusion.total();
  j["accuracy"] = report.accuracy;
  j["f1_macro"] = report.f1_macro;
  j["miou"] = report.miou;
  nlohmann::json per_class = nlohmann::json::object();
  for (int c = 0; c < static_cast<int>(report.per_class.size()); ++c) {
    const auto& m = report.per_class[static_cast<std::size_t>(c)];
    per_class[taxonomy.classes().at(static_cast<std::size_t>(c))] = {
        {"index", c},
        {"support", m.support},
        {"predicted", m.predicted},
        {"recall", optional_json(m.recall)},
        {"precision", optional_json(m.precision)},
        {"f1", optional_json(m.f1)},
        {"iou", optional_json(m.iou)},
    };
  }
  j["per_class"] = std::move(per_class);
  nlohmann::json excluded = nlohmann::json::array();
  for (int c : report.excluded_classes) excluded.push_back(taxonomy.classes().at(static_cast<std::size_t>(c)));
  j["excluded_from_macro"] = std::move(excluded);
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  if (!j.contains("confusion")) throw Error(ErrorCode::kParseError, "report lacks confusion counts");
  return derive_metrics(confusion_from_json(j.at("confusion")));
}

}  // namespace terrainseg
