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

#include "terrainseg/nn/optim.hpp"

#include <cmath>

#include "terrainseg/error.hpp"

namespace terrainseg::nn {

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::kAdam ? "adam" : "sgd"; }

std::optional<OptimizerKind> parse_optimizer_kind(std::string_view text) {
  if (text == "adam") return OptimizerKind::kAdam;
  if (text == "sgd") return OptimizerKind::kSgd;
  return std::nullopt;
}

void Optimizer::step(const std::vector<Parameter*>& params) {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(config_.beta1, t);
  const double correction2 = 1.0 - std::pow(config_.beta2, t);
  const auto lr = static_cast<float>(config_.learning_rate);
  const auto b1 = static_cast<float>(config_.beta1);
  const auto b2 = static_cast<float>(config_.beta2);
  const auto wd = static_cast<float>(config_.weight_decay);
  for (Parameter* p : params) {
    if (!p->trainable() || p->grad.size() != p->value.size()) continue;
    auto& m = first_[p->name];
    if (m.size() != p->value.size()) m.assign(p->value.size(), 0.0f);
    if (config_.kind == OptimizerKind::kSgd) {
      const auto mu = static_cast<float>(config_.momentum);
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        const float g = p->grad[i] + wd * p->value[i];
        m[i] = mu * m[i] + g;
        p->value[i] -= lr * m[i];
      }
      continue;
    }
    auto& v = second_[p->name];
    if (v.size() != p->value.size()) v.assign(p->value.size(), 0.0f);
    const auto step_size = static_cast<float>(config_.learning_rate / correction1);
    const auto inv_sqrt_c2 = static_cast<float>(1.0 / std::sqrt(correction2));
    const auto eps = static_cast<float>(config_.epsilon);
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const float g = p->grad[i] + wd * p->value[i];
      m[i] = b1 * m[i] + (1.0f - b1) * g;
      v[i] = b2 * v[i] + (1.0f - b2) * g * g;
      p->value[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_c2 + eps);
    }
  }
}

void Optimizer::save(Archive& archive) const {
  archive.meta["optimizer"] = {{"kind", to_string(config_.kind)}, {"steps", steps_}};
  for (const auto& [name, values] : first_) {
    archive.add("optim.m." + name, {static_cast<std::int64_t>(values.size())}, values);
  }
  for (const auto& [name, values] : second_) {
    archive.add("optim.v." + name, {static_cast<std::int64_t>(values.size())}, values);
  }
}

void Optimizer::load(const Archive& archive) {
  if (!archive.meta.contains("optimizer")) throw Error(ErrorCode::kCorruptFile, "archive has no optimizer state");
  const auto& meta = archive.meta.at("optimizer");
  if (meta.at("kind").get<std::string>() != to_string(config_.kind)) {
    throw Error(ErrorCode::kConfigError, "checkpoint optimizer kind differs from the configured one");
  }
  steps_ = meta.at("steps").get<std::uint64_t>();
  first_.clear();
  second_.clear();
  for (const auto& t : archive.tensors) {
    if (t.name.rfind("optim.m.", 0) == 0) first_[t.name.substr(8)] = t.data;
    if (t.name.rfind("optim.v.", 0) == 0) second_[t.name.substr(8)] = t.data;
  }
}

}  // namespace terrainseg::nn
