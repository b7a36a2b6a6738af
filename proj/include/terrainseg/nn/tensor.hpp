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

#ifndef TERRAINSEG_NN_TENSOR_HPP_
#define TERRAINSEG_NN_TENSOR_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace terrainseg::nn {

// Dense NCHW float tensor.
struct Tensor {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<float> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, float fill = 0.0f)
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }
  float* sample(int b) { return data.data() + static_cast<std::size_t>(b) * sample_size(); }
  const float* sample(int b) const { return data.data() + static_cast<std::size_t>(b) * sample_size(); }
  float* channel(int b, int ch) { return sample(b) + static_cast<std::size_t>(ch) * plane(); }
  const float* channel(int b, int ch) const { return sample(b) + static_cast<std::size_t>(ch) * plane(); }
  bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
  std::string shape_string() const;
};

// Learnable weight or persistent buffer (batch-norm running statistics).
// Gradients are allocated lazily by the first backward pass.
struct Parameter {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> value;
  std::vector<float> grad;
  bool is_buffer = false;
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string name_, std::vector<std::int64_t> shape_, bool buffer = false);

  std::size_t numel() const { return value.size(); }
  bool trainable() const { return !is_buffer && !frozen; }
  float* grad_data();
  void zero_grad();
};

enum class Mode { kTrain, kEval };

}  // namespace terrainseg::nn

#endif  // TERRAINSEG_NN_TENSOR_HPP_
