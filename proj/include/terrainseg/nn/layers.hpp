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

#ifndef TERRAINSEG_NN_LAYERS_HPP_
#define TERRAINSEG_NN_LAYERS_HPP_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "terrainseg/nn/tensor.hpp"

namespace terrainseg::nn {

// Layers cache what they need from forward() and consume it in backward();
// a backward call must follow the forward call it differentiates.
class Module {
 public:
  virtual ~Module() = default;
  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  // Returns d loss / d input and accumulates parameter gradients.
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual void parameters(std::vector<Parameter*>& out) = 0;
};

struct Conv2dOptions {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  int padding = 0;
  int dilation = 1;
  int groups = 1;
  bool bias = false;
};

// Direct im2col + GEMM convolution. Weight layout [out, in/groups, k, k].
class Conv2d : public Module {
 public:
  Conv2d(const std::string& name, const Conv2dOptions& options);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void parameters(std::vector<Parameter*>& out) override;

  const Conv2dOptions& options() const { return options_; }
  Parameter& weight() { return weight_; }

 private:
  bool pointwise() const;
  int out_size(int in) const;
  void im2col(const float* image, int group, int height, int width, float* col) const;
  void col2im(const float* col, int group, int height, int width, float* image) const;

  Conv2dOptions options_;
  Parameter weight_;
  std::optional<Parameter> bias_;
  Tensor input_;
};

class BatchNorm2d : public Module {
 public:
  BatchNorm2d(const std::string& name, int channels, float eps = 1e-5f, float momentum = 0.1f);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void parameters(std::vector<Parameter*>& out) override;

 private:
  int channels_;
  float eps_;
  float momentum_;
  Parameter weight_;
  Parameter bias_;
  Parameter running_mean_;
  Parameter running_var_;
  Tensor normalized_;
  std::vector<float> inv_std_;
  Mode mode_ = Mode::kEval;
};

// max(0, x), optionally clipped above (ReLU6).
class Relu : public Module {
 public:
  explicit Relu(std::optional<float> cap = std::nullopt) : cap_(cap) {}
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void parameters(std::vector<Parameter*>&) override {}

 private:
  std::optional<float> cap_;
  std::vector<bool> pass_;
};

class MaxPool2d : public Module {
 public:
  MaxPool2d(int kernel, int stride, int padding) : kernel_(kernel), stride_(stride), padding_(padding) {}
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void parameters(std::vector<Parameter*>&) override {}

 private:
  int kernel_;
  int stride_;
  int padding_;
  Tensor input_shape_;
  std::vector<std::size_t> argmax_;
};

class Sequential : public Module {
 public:
  Sequential() = default;
  Module& add(std::unique_ptr<Module> module);
  template <typename T, typename... Args>
  T& emplace(Args&&... args) {
    auto owned = std::make_unique<T>(std::forward<Args>(args)...);
    T& ref = *owned;
    add(std::move(owned));
    return ref;
  }
  std::size_t size() const { return modules_.size(); }

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void parameters(std::vector<Parameter*>& out) override;

 private:
  std::vector<std::unique_ptr<Module>> modules_;
};

// Conv -> BN -> ReLU, parameters named <name>.0 (conv) and <name>.1 (bn).
std::unique_ptr<Sequential> conv_bn_relu(const std::string& name, const Conv2dOptions& options,
                                         std::optional<float> relu_cap = std::nullopt);

// ResNet v1.5 bottleneck (stride on the 3x3 conv).
class Bottleneck : public Module {
 public:
  Bottleneck(const std::string& name, int in_channels, int width, int out_channels, int stride, int dilation,
             int first_dilation);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void parameters(std::vector<Parameter*>& out) override;

 private:
  Sequential main_;
  std::unique_ptr<Sequential> shortcut_;
  std::vector<bool> pass_;
};

// MobileNetV2 inverted residual block.
class InvertedResidual : public Module {
 public:
  InvertedResidual(const std::string& name, int in_channels, int out_channels, int stride, int expand_ratio,
                   int dilation);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void parameters(std::vector<Parameter*>& out) override;

 private:
  Sequential body_;
  bool residual_;
};

// Atrous spatial pyramid pooling: a 1x1 branch, one dilated 3x3 branch per
// rate and a global-average-pooling branch, concatenated and projected.
class Aspp : public Module {
 public:
  Aspp(const std::string& name, int in_channels, int out_channels, const std::vector<int>& rates);

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void parameters(std::vector<Parameter*>& out) override;

 private:
  int out_channels_;
  std::vector<std::unique_ptr<Sequential>> branches_;
  Conv2d pool_conv_;
  Relu pool_relu_;
  std::unique_ptr<Sequential> project_;
  int in_h_ = 0;
  int in_w_ = 0;
};

// Bilinear resize with half-pixel centres (align_corners = false).
Tensor upsample_bilinear(const Tensor& x, int height, int width);
// Adjoint of upsample_bilinear: maps a gradient at (height, width) back to
// the source resolution (src_h, src_w).
Tensor upsample_bilinear_backward(const Tensor& grad, int src_h, int src_w);

}  // namespace terrainseg::nn

#endif  // TERRAINSEG_NN_LAYERS_HPP_
