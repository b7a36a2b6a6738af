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

#include "terrainseg/nn/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "terrainseg/error.hpp"

namespace terrainseg::nn {
namespace {

using MatrixRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

void add_into(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

std::string Tensor::shape_string() const {
  std::ostringstream out;
  out << '[' << n << ", " << c << ", " << h << ", " << w << ']';
  return out.str();
}

Parameter::Parameter(std::string name_, std::vector<std::int64_t> shape_, bool buffer)
    : name(std::move(name_)), shape(std::move(shape_)), is_buffer(buffer) {
  std::int64_t count = 1;
  for (auto d : shape) count *= d;
  value.assign(static_cast<std::size_t>(count), 0.0f);
}

float* Parameter::grad_data() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0f);
  return grad.data();
}

void Parameter::zero_grad() {
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0f);
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(const std::string& name, const Conv2dOptions& options)
    : options_(options),
      weight_(name + ".weight", {options.out_channels, options.in_channels / std::max(1, options.groups),
                                 options.kernel, options.kernel}) {
  if (options.in_channels <= 0 || options.out_channels <= 0 || options.groups <= 0 ||
      options.in_channels % options.groups != 0 || options.out_channels % options.groups != 0) {
    throw Error(ErrorCode::kInvalidArgument, "bad conv geometry for " + name);
  }
  if (options.bias) bias_.emplace(name + ".bias", std::vector<std::int64_t>{options.out_channels});
}

bool Conv2d::pointwise() const {
  return options_.kernel == 1 && options_.stride == 1 && options_.padding == 0;
}

int Conv2d::out_size(int in) const {
  return (in + 2 * options_.padding - options_.dilation * (options_.kernel - 1) - 1) / options_.stride + 1;
}

void Conv2d::im2col(const float* image, int group, int height, int width, float* col) const {
  const int cin_g = options_.in_channels / options_.groups;
  const int k = options_.kernel;
  const int ho = out_size(height);
  const int wo = out_size(width);
  for (int ci = 0; ci < cin_g; ++ci) {
    const float* plane = image + static_cast<std::size_t>(group * cin_g + ci) * height * width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* row = col + (static_cast<std::size_t>(ci * k + ky) * k + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * options_.stride - options_.padding + ky * options_.dilation;
          float* out = row + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= height) {
            std::fill(out, out + wo, 0.0f);
            continue;
          }
          const float* in_row = plane + static_cast<std::size_t>(iy) * width;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * options_.stride - options_.padding + kx * options_.dilation;
            out[ox] = (ix >= 0 && ix < width) ? in_row[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void Conv2d::col2im(const float* col, int group, int height, int width, float* image) const {
  const int cin_g = options_.in_channels / options_.groups;
  const int k = options_.kernel;
  const int ho = out_size(height);
  const int wo = out_size(width);
  for (int ci = 0; ci < cin_g; ++ci) {
    float* plane = image + static_cast<std::size_t>(group * cin_g + ci) * height * width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* row = col + (static_cast<std::size_t>(ci * k + ky) * k + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * options_.stride - options_.padding + ky * options_.dilation;
          if (iy < 0 || iy >= height) continue;
          float* in_row = plane + static_cast<std::size_t>(iy) * width;
          const float* src = row + static_cast<std::size_t>(oy) * wo;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * options_.stride - options_.padding + kx * options_.dilation;
            if (ix >= 0 && ix < width) in_row[ix] += src[ox];
          }
        }
      }
    }
  }
}

Tensor Conv2d::forward(const Tensor& x, Mode) {
  if (x.c != options_.in_channels) {
    throw Error(ErrorCode::kShapeMismatch, weight_.name + " expects " + std::to_string(options_.in_channels) +
                                               " input channels, got " + x.shape_string());
  }
  input_ = x;
  const int ho = out_size(x.h);
  const int wo = out_size(x.w);
  const int groups = options_.groups;
  const int cin_g = options_.in_channels / groups;
  const int cout_g = options_.out_channels / groups;
  const int kk = cin_g * options_.kernel * options_.kernel;
  const int spatial = ho * wo;
  Tensor y(x.n, options_.out_channels, ho, wo);
  std::vector<float> col(pointwise() ? 0 : static_cast<std::size_t>(kk) * spatial);
  for (int b = 0; b < x.n; ++b) {
    for (int g = 0; g < groups; ++g) {
      const float* col_ptr;
      if (pointwise()) {
        col_ptr = x.sample(b) + static_cast<std::size_t>(g) * cin_g * spatial;
      } else {
        im2col(x.sample(b), g, x.h, x.w, col.data());
        col_ptr = col.data();
      }
      ConstMapRM weights(weight_.value.data() + static_cast<std::size_t>(g) * cout_g * kk, cout_g, kk);
      ConstMapRM columns(col_ptr, kk, spatial);
      MapRM out(y.channel(b, g * cout_g), cout_g, spatial);
      out.noalias() = weights * columns;
    }
    if (bias_) {
      for (int oc = 0; oc < options_.out_channels; ++oc) {
        float* plane = y.channel(b, oc);
        const float bias = bias_->value[static_cast<std::size_t>(oc)];
        for (int i = 0; i < spatial; ++i) plane[i] += bias;
      }
    }
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  const Tensor& x = input_;
  const int ho = grad_out.h;
  const int wo = grad_out.w;
  const int groups = options_.groups;
  const int cin_g = options_.in_channels / groups;
  const int cout_g = options_.out_channels / groups;
  const int kk = cin_g * options_.kernel * options_.kernel;
  const int spatial = ho * wo;
  Tensor grad_in(x.n, x.c, x.h, x.w);
  std::vector<float> col(pointwise() ? 0 : static_cast<std::size_t>(kk) * spatial);
  std::vector<float> dcol(pointwise() ? 0 : static_cast<std::size_t>(kk) * spatial);
  const bool want_weight_grad = weight_.trainable();
  float* dweight = want_weight_grad ? weight_.grad_data() : nullptr;
  for (int b = 0; b < x.n; ++b) {
    for (int g = 0; g < groups; ++g) {
      ConstMapRM dout(grad_out.channel(b, g * cout_g), cout_g, spatial);
      ConstMapRM weights(weight_.value.data() + static_cast<std::size_t>(g) * cout_g * kk, cout_g, kk);
      if (pointwise()) {
        if (want_weight_grad) {
          ConstMapRM columns(x.sample(b) + static_cast<std::size_t>(g) * cin_g * spatial, kk, spatial);
          MapRM dw(dweight + static_cast<std::size_t>(g) * cout_g * kk, cout_g, kk);
          dw.noalias() += dout * columns.transpose();
        }
        MapRM din(grad_in.sample(b) + static_cast<std::size_t>(g) * cin_g * spatial, kk, spatial);
        din.noalias() += weights.transpose() * dout;
      } else {
        if (want_weight_grad) {
          im2col(x.sample(b), g, x.h, x.w, col.data());
          ConstMapRM columns(col.data(), kk, spatial);
          MapRM dw(dweight + static_cast<std::size_t>(g) * cout_g * kk, cout_g, kk);
          dw.noalias() += dout * columns.transpose();
        }
        MapRM dcolumns(dcol.data(), kk, spatial);
        dcolumns.noalias() = weights.transpose() * dout;
        col2im(dcol.data(), g, x.h, x.w, grad_in.sample(b));
      }
    }
    if (bias_ && bias_->trainable()) {
      float* db = bias_->grad_data();
      for (int oc = 0; oc < options_.out_channels; ++oc) {
        const float* plane = grad_out.channel(b, oc);
        float sum = 0.0f;
        for (int i = 0; i < spatial; ++i) sum += plane[i];
        db[oc] += sum;
      }
    }
  }
  return grad_in;
}

void Conv2d::parameters(std::vector<Parameter*>& out) {
  out.push_back(&weight_);
  if (bias_) out.push_back(&*bias_);
}

// ----------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(const std::string& name, int channels, float eps, float momentum)
    : channels_(channels),
      eps_(eps),
      momentum_(momentum),
      weight_(name + ".weight", {channels}),
      bias_(name + ".bias", {channels}),
      running_mean_(name + ".running_mean", {channels}, true),
      running_var_(name + ".running_var", {channels}, true) {
  std::fill(weight_.value.begin(), weight_.value.end(), 1.0f);
  std::fill(running_var_.value.begin(), running_var_.value.end(), 1.0f);
}

Tensor BatchNorm2d::forward(const Tensor& x, Mode mode) {
  if (x.c != channels_) throw Error(ErrorCode::kShapeMismatch, weight_.name + " channel count");
  mode_ = mode;
  const std::size_t plane = x.plane();
  const std::size_t count = plane * static_cast<std::size_t>(x.n);
  normalized_ = Tensor(x.n, x.c, x.h, x.w);
  inv_std_.assign(static_cast<std::size_t>(channels_), 0.0f);
  Tensor y(x.n, x.c, x.h, x.w);
  for (int ch = 0; ch < channels_; ++ch) {
    float mean;
    float var;
    if (mode == Mode::kTrain) {
      double sum = 0.0;
      for (int b = 0; b < x.n; ++b) {
        const float* p = x.channel(b, ch);
        for (std::size_t i = 0; i < plane; ++i) sum += p[i];
      }
      const double m = sum / static_cast<double>(count);
      double sq = 0.0;
      for (int b = 0; b < x.n; ++b) {
        const float* p = x.channel(b, ch);
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = p[i] - m;
          sq += d * d;
        }
      }
      mean = static_cast<float>(m);
      var = static_cast<float>(sq / static_cast<double>(count));
      const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : 0.0;
      auto& rm = running_mean_.value[static_cast<std::size_t>(ch)];
      auto& rv = running_var_.value[static_cast<std::size_t>(ch)];
      rm = (1.0f - momentum_) * rm + momentum_ * mean;
      rv = (1.0f - momentum_) * rv + momentum_ * static_cast<float>(unbiased);
    } else {
      mean = running_mean_.value[static_cast<std::size_t>(ch)];
      var = running_var_.value[static_cast<std::size_t>(ch)];
    }
    const float inv_std = 1.0f / std::sqrt(var + eps_);
    inv_std_[static_cast<std::size_t>(ch)] = inv_std;
    const float gamma = weight_.value[static_cast<std::size_t>(ch)];
    const float beta = bias_.value[static_cast<std::size_t>(ch)];
    for (int b = 0; b < x.n; ++b) {
      const float* p = x.channel(b, ch);
      float* xn = normalized_.channel(b, ch);
      float* out = y.channel(b, ch);
      for (std::size_t i = 0; i < plane; ++i) {
        xn[i] = (p[i] - mean) * inv_std;
        out[i] = gamma * xn[i] + beta;
      }
    }
  }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
  const std::size_t plane = grad_out.plane();
  const double count = static_cast<double>(plane) * grad_out.n;
  Tensor grad_in(grad_out.n, grad_out.c, grad_out.h, grad_out.w);
  const bool train_params = weight_.trainable();
  float* dgamma = train_params ? weight_.grad_data() : nullptr;
  float* dbeta = train_params ? bias_.grad_data() : nullptr;
  for (int ch = 0; ch < channels_; ++ch) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (int b = 0; b < grad_out.n; ++b) {
      const float* dy = grad_out.channel(b, ch);
      const float* xn = normalized_.channel(b, ch);
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += dy[i];
        sum_dy_xhat += static_cast<double>(dy[i]) * xn[i];
      }
    }
    if (train_params) {
      dgamma[ch] += static_cast<float>(sum_dy_xhat);
      dbeta[ch] += static_cast<float>(sum_dy);
    }
    const float gamma = weight_.value[static_cast<std::size_t>(ch)];
    const float scale = gamma * inv_std_[static_cast<std::size_t>(ch)];
    const auto mean_dy = static_cast<float>(sum_dy / count);
    const auto mean_dy_xhat = static_cast<float>(sum_dy_xhat / count);
    for (int b = 0; b < grad_out.n; ++b) {
      const float* dy = grad_out.channel(b, ch);
      const float* xn = normalized_.channel(b, ch);
      float* dx = grad_in.channel(b, ch);
      if (mode_ == Mode::kTrain) {
        for (std::size_t i = 0; i < plane; ++i) dx[i] = scale * (dy[i] - mean_dy - xn[i] * mean_dy_xhat);
      } else {
        for (std::size_t i = 0; i < plane; ++i) dx[i] = scale * dy[i];
      }
    }
  }
  return grad_in;
}

void BatchNorm2d::parameters(std::vector<Parameter*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
  out.push_back(&running_mean_);
  out.push_back(&running_var_);
}

// ------------------------------------------------------------------ Relu

Tensor Relu::forward(const Tensor& x, Mode) {
  Tensor y = x;
  pass_.assign(x.size(), false);
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    float v = y.data[i];
    const bool live = v > 0.0f && (!cap_ || v < *cap_);
    pass_[i] = live;
    if (v < 0.0f) v = 0.0f;
    if (cap_ && v > *cap_) v = *cap_;
    y.data[i] = v;
  }
  return y;
}

Tensor Relu::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    if (!pass_[i]) g.data[i] = 0.0f;
  }
  return g;
}

// ------------------------------------------------------------- MaxPool2d

Tensor MaxPool2d::forward(const Tensor& x, Mode) {
  const int ho = (x.h + 2 * padding_ - kernel_) / stride_ + 1;
  const int wo = (x.w + 2 * padding_ - kernel_) / stride_ + 1;
  input_shape_ = Tensor(x.n, x.c, x.h, x.w);
  input_shape_.data.clear();
  Tensor y(x.n, x.c, ho, wo);
  argmax_.assign(y.size(), 0);
  std::size_t out_index = 0;
  for (int b = 0; b < x.n; ++b) {
    for (int ch = 0; ch < x.c; ++ch) {
      const float* plane = x.channel(b, ch);
      const std::size_t base = static_cast<std::size_t>(b * x.c + ch) * x.plane();
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox, ++out_index) {
          float best = -std::numeric_limits<float>::infinity();
          std::size_t best_index = base;
          for (int ky = 0; ky < kernel_; ++ky) {
            const int iy = oy * stride_ - padding_ + ky;
            if (iy < 0 || iy >= x.h) continue;
            for (int kx = 0; kx < kernel_; ++kx) {
              const int ix = ox * stride_ - padding_ + kx;
              if (ix < 0 || ix >= x.w) continue;
              const float v = plane[static_cast<std::size_t>(iy) * x.w + ix];
              if (v > best) {
                best = v;
                best_index = base + static_cast<std::size_t>(iy) * x.w + ix;
              }
            }
          }
          y.data[out_index] = best;
          argmax_[out_index] = best_index;
        }
      }
    }
  }
  return y;
}

Tensor MaxPool2d::backward(const Tensor& grad_out) {
  Tensor grad_in(input_shape_.n, input_shape_.c, input_shape_.h, input_shape_.w);
  for (std::size_t i = 0; i < grad_out.data.size(); ++i) grad_in.data[argmax_[i]] += grad_out.data[i];
  return grad_in;
}

// ------------------------------------------------------------ Sequential

Module& Sequential::add(std::unique_ptr<Module> module) {
  modules_.push_back(std::move(module));
  return *modules_.back();
}

Tensor Sequential::forward(const Tensor& x, Mode mode) {
  Tensor current = x;
  for (auto& m : modules_) current = m->forward(current, mode);
  return current;
}

Tensor Sequential::backward(const Tensor& grad_out) {
  Tensor current = grad_out;
  for (auto it = modules_.rbegin(); it != modules_.rend(); ++it) current = (*it)->backward(current);
  return current;
}

void Sequential::parameters(std::vector<Parameter*>& out) {
  for (auto& m : modules_) m->parameters(out);
}

std::unique_ptr<Sequential> conv_bn_relu(const std::string& name, const Conv2dOptions& options,
                                         std::optional<float> relu_cap) {
  auto seq = std::make_unique<Sequential>();
  seq->emplace<Conv2d>(name + ".0", options);
  seq->emplace<BatchNorm2d>(name + ".1", options.out_channels);
  seq->emplace<Relu>(relu_cap);
  return seq;
}

// ------------------------------------------------------------ Bottleneck

Bottleneck::Bottleneck(const std::string& name, int in_channels, int width, int out_channels, int stride,
                       int dilation, int first_dilation) {
  main_.emplace<Conv2d>(name + ".conv1", Conv2dOptions{in_channels, width, 1});
  main_.emplace<BatchNorm2d>(name + ".bn1", width);
  main_.emplace<Relu>();
  main_.emplace<Conv2d>(name + ".conv2", Conv2dOptions{width, width, 3, stride, first_dilation, first_dilation});
  main_.emplace<BatchNorm2d>(name + ".bn2", width);
  main_.emplace<Relu>();
  main_.emplace<Conv2d>(name + ".conv3", Conv2dOptions{width, out_channels, 1});
  main_.emplace<BatchNorm2d>(name + ".bn3", out_channels);
  (void)dilation;
  if (stride != 1 || in_channels != out_channels) {
    shortcut_ = std::make_unique<Sequential>();
    shortcut_->emplace<Conv2d>(name + ".downsample.0", Conv2dOptions{in_channels, out_channels, 1, stride});
    shortcut_->emplace<BatchNorm2d>(name + ".downsample.1", out_channels);
  }
}

Tensor Bottleneck::forward(const Tensor& x, Mode mode) {
  Tensor y = main_.forward(x, mode);
  if (shortcut_) {
    add_into(y, shortcut_->forward(x, mode));
  } else {
    add_into(y, x);
  }
  pass_.assign(y.size(), false);
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    pass_[i] = y.data[i] > 0.0f;
    if (!pass_[i]) y.data[i] = 0.0f;
  }
  return y;
}

Tensor Bottleneck::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    if (!pass_[i]) g.data[i] = 0.0f;
  }
  Tensor grad_in = main_.backward(g);
  if (shortcut_) {
    add_into(grad_in, shortcut_->backward(g));
  } else {
    add_into(grad_in, g);
  }
  return grad_in;
}

void Bottleneck::parameters(std::vector<Parameter*>& out) {
  main_.parameters(out);
  if (shortcut_) shortcut_->parameters(out);
}

// ------------------------------------------------------ InvertedResidual

InvertedResidual::InvertedResidual(const std::string& name, int in_channels, int out_channels, int stride,
                                   int expand_ratio, int dilation)
    : residual_(stride == 1 && in_channels == out_channels) {
  const int hidden = in_channels * expand_ratio;
  int index = 0;
  auto next = [&]() { return name + ".conv." + std::to_string(index++); };
  if (expand_ratio != 1) body_.add(conv_bn_relu(next(), Conv2dOptions{in_channels, hidden, 1}, 6.0f));
  body_.add(conv_bn_relu(next(), Conv2dOptions{hidden, hidden, 3, stride, dilation, dilation, hidden}, 6.0f));
  body_.emplace<Conv2d>(next(), Conv2dOptions{hidden, out_channels, 1});
  body_.emplace<BatchNorm2d>(next(), out_channels);
}

Tensor InvertedResidual::forward(const Tensor& x, Mode mode) {
  Tensor y = body_.forward(x, mode);
  if (residual_) add_into(y, x);
  return y;
}

Tensor InvertedResidual::backward(const Tensor& grad_out) {
  Tensor grad_in = body_.backward(grad_out);
  if (residual_) add_into(grad_in, grad_out);
  return grad_in;
}

void InvertedResidual::parameters(std::vector<Parameter*>& out) { body_.parameters(out); }

// ------------------------------------------------------------------ ASPP

Aspp::Aspp(const std::string& name, int in_channels, int out_channels, const std::vector<int>& rates)
    : out_channels_(out_channels),
      pool_conv_(name + ".convs." + std::to_string(rates.size() + 1) + ".1",
                 Conv2dOptions{in_channels, out_channels, 1, 1, 0, 1, 1, true}) {
  branches_.push_back(conv_bn_relu(name + ".convs.0", Conv2dOptions{in_channels, out_channels, 1}));
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const int r = rates[i];
    branches_.push_back(
        conv_bn_relu(name + ".convs." + std::to_string(i + 1), Conv2dOptions{in_channels, out_channels, 3, 1, r, r}));
  }
  const int concat = out_channels * static_cast<int>(branches_.size() + 1);
  project_ = conv_bn_relu(name + ".project", Conv2dOptions{concat, out_channels, 1});
}

Tensor Aspp::forward(const Tensor& x, Mode mode) {
  in_h_ = x.h;
  in_w_ = x.w;
  const int parts = static_cast<int>(branches_.size()) + 1;
  Tensor cat(x.n, out_channels_ * parts, x.h, x.w);
  const std::size_t chunk = static_cast<std::size_t>(out_channels_) * x.plane();
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    Tensor y = branches_[i]->forward(x, mode);
    for (int b = 0; b < x.n; ++b) {
      std::copy(y.sample(b), y.sample(b) + chunk, cat.sample(b) + i * chunk);
    }
  }
  Tensor pooled(x.n, x.c, 1, 1);
  const float inv_area = 1.0f / static_cast<float>(x.plane());
  for (int b = 0; b < x.n; ++b) {
    for (int ch = 0; ch < x.c; ++ch) {
      const float* p = x.channel(b, ch);
      double sum = 0.0;
      for (std::size_t i = 0; i < x.plane(); ++i) sum += p[i];
      pooled.data[static_cast<std::size_t>(b) * x.c + ch] = static_cast<float>(sum) * inv_area;
    }
  }
  Tensor pooled_out = pool_relu_.forward(pool_conv_.forward(pooled, mode), mode);
  for (int b = 0; b < x.n; ++b) {
    for (int ch = 0; ch < out_channels_; ++ch) {
      float* dst = cat.channel(b, static_cast<int>(branches_.size()) * out_channels_ + ch);
      std::fill(dst, dst + x.plane(), pooled_out.data[static_cast<std::size_t>(b) * out_channels_ + ch]);
    }
  }
  return project_->forward(cat, mode);
}

Tensor Aspp::backward(const Tensor& grad_out) {
  Tensor grad_cat = project_->backward(grad_out);
  const int n = grad_cat.n;
  const std::size_t plane = static_cast<std::size_t>(in_h_) * in_w_;
  const std::size_t chunk = static_cast<std::size_t>(out_channels_) * plane;
  Tensor grad_in;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    Tensor part(n, out_channels_, in_h_, in_w_);
    for (int b = 0; b < n; ++b) {
      std::copy(grad_cat.sample(b) + i * chunk, grad_cat.sample(b) + (i + 1) * chunk, part.sample(b));
    }
    Tensor g = branches_[i]->backward(part);
    if (i == 0) {
      grad_in = std::move(g);
    } else {
      add_into(grad_in, g);
    }
  }
  Tensor pool_grad(n, out_channels_, 1, 1);
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < out_channels_; ++ch) {
      const float* src = grad_cat.channel(b, static_cast<int>(branches_.size()) * out_channels_ + ch);
      double sum = 0.0;
      for (std::size_t i = 0; i < plane; ++i) sum += src[i];
      pool_grad.data[static_cast<std::size_t>(b) * out_channels_ + ch] = static_cast<float>(sum);
    }
  }
  Tensor g_pooled = pool_conv_.backward(pool_relu_.backward(pool_grad));
  const float inv_area = 1.0f / static_cast<float>(plane);
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < grad_in.c; ++ch) {
      const float share = g_pooled.data[static_cast<std::size_t>(b) * grad_in.c + ch] * inv_area;
      float* dst = grad_in.channel(b, ch);
      for (std::size_t i = 0; i < plane; ++i) dst[i] += share;
    }
  }
  return grad_in;
}

void Aspp::parameters(std::vector<Parameter*>& out) {
  for (auto& b : branches_) b->parameters(out);
  pool_conv_.parameters(out);
  project_->parameters(out);
}

// -------------------------------------------------------------- Upsample

namespace {

struct Tap {
  int i0;
  int i1;
  float w1;  // weight of i1; i0 gets 1 - w1
};

std::vector<Tap> taps(int src, int dst) {
  std::vector<Tap> out(static_cast<std::size_t>(dst));
  const float scale = static_cast<float>(src) / static_cast<float>(dst);
  for (int d = 0; d < dst; ++d) {
    float s = (static_cast<float>(d) + 0.5f) * scale - 0.5f;
    if (s < 0.0f) s = 0.0f;
    int i0 = static_cast<int>(s);
    if (i0 > src - 1) i0 = src - 1;
    const int i1 = std::min(i0 + 1, src - 1);
    out[static_cast<std::size_t>(d)] = {i0, i1, s - static_cast<float>(i0)};
  }
  return out;
}

}  // namespace

Tensor upsample_bilinear(const Tensor& x, int height, int width) {
  if (x.h == height && x.w == width) return x;
  const auto ty = taps(x.h, height);
  const auto tx = taps(x.w, width);
  Tensor y(x.n, x.c, height, width);
  for (int b = 0; b < x.n; ++b) {
    for (int ch = 0; ch < x.c; ++ch) {
      const float* src = x.channel(b, ch);
      float* dst = y.channel(b, ch);
      for (int r = 0; r < height; ++r) {
        const Tap& a = ty[static_cast<std::size_t>(r)];
        const float* row0 = src + static_cast<std::size_t>(a.i0) * x.w;
        const float* row1 = src + static_cast<std::size_t>(a.i1) * x.w;
        for (int c = 0; c < width; ++c) {
          const Tap& t = tx[static_cast<std::size_t>(c)];
          const float top = row0[t.i0] * (1.0f - t.w1) + row0[t.i1] * t.w1;
          const float bottom = row1[t.i0] * (1.0f - t.w1) + row1[t.i1] * t.w1;
          dst[static_cast<std::size_t>(r) * width + c] = top * (1.0f - a.w1) + bottom * a.w1;
        }
      }
    }
  }
  return y;
}

Tensor upsample_bilinear_backward(const Tensor& grad, int src_h, int src_w) {
  if (grad.h == src_h && grad.w == src_w) return grad;
  const auto ty = taps(src_h, grad.h);
  const auto tx = taps(src_w, grad.w);
  Tensor out(grad.n, grad.c, src_h, src_w);
  for (int b = 0; b < grad.n; ++b) {
    for (int ch = 0; ch < grad.c; ++ch) {
      const float* g = grad.channel(b, ch);
      float* dst = out.channel(b, ch);
      for (int r = 0; r < grad.h; ++r) {
        const Tap& a = ty[static_cast<std::size_t>(r)];
        for (int c = 0; c < grad.w; ++c) {
          const Tap& t = tx[static_cast<std::size_t>(c)];
          const float v = g[static_cast<std::size_t>(r) * grad.w + c];
          dst[static_cast<std::size_t>(a.i0) * src_w + t.i0] += v * (1.0f - a.w1) * (1.0f - t.w1);
          dst[static_cast<std::size_t>(a.i0) * src_w + t.i1] += v * (1.0f - a.w1) * t.w1;
          dst[static_cast<std::size_t>(a.i1) * src_w + t.i0] += v * a.w1 * (1.0f - t.w1);
          dst[static_cast<std::size_t>(a.i1) * src_w + t.i1] += v * a.w1 * t.w1;
        }
      }
    }
  }
  return out;
}

}  // namespace terrainseg::nn
