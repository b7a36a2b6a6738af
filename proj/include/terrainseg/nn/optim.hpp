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

#ifndef TERRAINSEG_NN_OPTIM_HPP_
#define TERRAINSEG_NN_OPTIM_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "terrainseg/nn/archive.hpp"
#include "terrainseg/nn/tensor.hpp"

namespace terrainseg::nn {

enum class OptimizerKind { kAdam, kSgd };

std::string_view to_string(OptimizerKind kind);
std::optional<OptimizerKind> parse_optimizer_kind(std::string_view text);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double momentum = 0.9;  // sgd only
  double weight_decay = 0.0;
};

class Optimizer {
 public:
  explicit Optimizer(const OptimizerConfig& config) : config_(config) {}

  // Updates every trainable parameter that holds a gradient.
  void step(const std::vector<Parameter*>& params);
  std::uint64_t steps() const { return steps_; }
  void set_learning_rate(double learning_rate) { config_.learning_rate = learning_rate; }
  const OptimizerConfig& config() const { return config_; }

  // State tensors are stored as optim.m.<name> / optim.v.<name>.
  void save(Archive& archive) const;
  void load(const Archive& archive);

 private:
  OptimizerConfig config_;
  std::uint64_t steps_ = 0;
  std::map<std::string, std::vector<float>> first_;
  std::map<std::string, std::vector<float>> second_;
};

}  // namespace terrainseg::nn

#endif  // TERRAINSEG_NN_OPTIM_HPP_
