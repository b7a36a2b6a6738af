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

#include <doctest.h>

#include <cmath>
#include <functional>

#include "terrainseg/error.hpp"
#include "terrainseg/nn/layers.hpp"
#include "terrainseg/nn/model.hpp"
#include "terrainseg/rng.hpp"

using namespace terrainseg;
using namespace terrainseg::nn;

namespace {

Tensor random_tensor(int n, int c, int h, int w, Rng& rng) {
  Tensor t(n, c, h, w);
  for (auto& v : t.data) v = static_cast<float>(rng.normal());
  return t;
}

// Objective sum(r * f(x)) accumulated in double.
double objective(const Tensor& y, const Tensor& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.data.size(); ++i) s += static_cast<double>(y.data[i]) * r.data[i];
  return s;
}

// Central differences on a handful of coordinates of a float buffer.
void check_gradient(std::vector<float>& values, const std::vector<float>& analytic,
                    const std::function<double()>& eval, Rng& rng, int probes, double h, double tol) {
  REQUIRE(analytic.size() == values.size());
  for (int k = 0; k < probes; ++k) {
    const auto i = static_cast<std::size_t>(rng.uniform(values.size()));
    const float saved = values[i];
    values[i] = saved + static_cast<float>(h);
    const double plus = eval();
    values[i] = saved - static_cast<float>(h);
    const double minus = eval();
    values[i] = saved;
    const double numeric = (plus - minus) / (2.0 * h);
    const double scale = std::max(1.0, std::abs(numeric));
    INFO("index " << i << " numeric " << numeric << " analytic " << analytic[i]);
    CHECK(std::abs(numeric - analytic[i]) / scale < tol);
  }
}

void check_module(Module& m, Tensor x, Mode mode, std::uint64_t seed, double tol = 2e-2) {
  Rng rng(seed);
  Tensor y = m.forward(x, mode);
  Tensor r = random_tensor(y.n, y.c, y.h, y.w, rng);
  std::vector<Parameter*> params;
  m.parameters(params);
  for (auto* p : params) p->zero_grad();
  Tensor gx = m.backward(r);
  auto eval = [&]() { return objective(m.forward(x, mode), r); };
  check_gradient(x.data, gx.data, eval, rng, 20, 1e-2, tol);
  for (auto* p : params) {
    if (!p->trainable()) continue;
    INFO("param " << p->name);
    std::vector<float> analytic(p->grad_data(), p->grad_data() + p->numel());
    check_gradient(p->value, analytic, eval, rng, 8, 1e-2, tol);
  }
}

}  // namespace

TEST_CASE("conv2d matches a direct convolution") {
  Rng rng(3);
  Conv2d conv("c", Conv2dOptions{4, 6, 3, 2, 2, 2, 2, true});
  for (auto& v : conv.weight().value) v = static_cast<float>(rng.normal());
  std::vector<Parameter*> params;
  conv.parameters(params);
  for (auto& v : params[1]->value) v = static_cast<float>(rng.normal());
  Tensor x = random_tensor(2, 4, 9, 7, rng);
  Tensor y = conv.forward(x, Mode::kEval);
  const int ho = (9 + 4 - 2 * 2 - 1) / 2 + 1;
  const int wo = (7 + 4 - 2 * 2 - 1) / 2 + 1;
  REQUIRE(y.h == ho);
  REQUIRE(y.w == wo);
  for (int b = 0; b < 2; ++b) {
    for (int oc = 0; oc < 6; ++oc) {
      const int g = oc / 3;
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          double s = params[1]->value[static_cast<std::size_t>(oc)];
          for (int ci = 0; ci < 2; ++ci) {
            for (int ky = 0; ky < 3; ++ky) {
              for (int kx = 0; kx < 3; ++kx) {
                const int iy = oy * 2 - 2 + ky * 2;
                const int ix = ox * 2 - 2 + kx * 2;
                if (iy < 0 || iy >= 9 || ix < 0 || ix >= 7) continue;
                s += static_cast<double>(conv.weight().value[((oc * 2 + ci) * 3 + ky) * 3 + kx]) *
                     x.channel(b, g * 2 + ci)[iy * 7 + ix];
              }
            }
          }
          CHECK(y.channel(b, oc)[oy * wo + ox] == doctest::Approx(s).epsilon(1e-4));
        }
      }
    }
  }
}

TEST_CASE("layer gradients agree with central differences") {
  Rng rng(11);
  SUBCASE("conv") {
    Conv2d conv("c", Conv2dOptions{3, 4, 3, 1, 2, 2, 1, true});
    for (auto& v : conv.weight().value) v = static_cast<float>(rng.normal() * 0.3);
    check_module(conv, random_tensor(2, 3, 6, 5, rng), Mode::kTrain, 1);
  }
  SUBCASE("pointwise conv") {
    Conv2d conv("c", Conv2dOptions{4, 3, 1});
    for (auto& v : conv.weight().value) v = static_cast<float>(rng.normal() * 0.3);
    check_module(conv, random_tensor(2, 4, 3, 3, rng), Mode::kTrain, 2);
  }
  SUBCASE("depthwise conv") {
    Conv2d conv("c", Conv2dOptions{4, 4, 3, 2, 1, 1, 4});
    for (auto& v : conv.weight().value) v = static_cast<float>(rng.normal() * 0.3);
    check_module(conv, random_tensor(1, 4, 7, 7, rng), Mode::kTrain, 3);
  }
  SUBCASE("batchnorm train") {
    BatchNorm2d bn("bn", 3);
    check_module(bn, random_tensor(2, 3, 4, 4, rng), Mode::kTrain, 4);
  }
  SUBCASE("batchnorm eval") {
    BatchNorm2d bn("bn", 3);
    check_module(bn, random_tensor(2, 3, 4, 4, rng), Mode::kEval, 5);
  }
  SUBCASE("relu and relu6") {
    for (std::optional<float> cap : {std::optional<float>{}, std::optional<float>{6.0f}}) {
      Relu relu(cap);
      Tensor x = random_tensor(1, 2, 4, 4, rng);
      for (auto& v : x.data) v = v * 4.0f + (v > 0 ? 0.5f : -0.5f);
      check_module(relu, x, Mode::kTrain, 7);
    }
  }
  SUBCASE("max pool") {
    MaxPool2d pool(3, 2, 1);
    check_module(pool, random_tensor(1, 2, 7, 6, rng), Mode::kTrain, 8);
  }
  SUBCASE("bottleneck") {
    Bottleneck block("b", 4, 2, 6, 2, 1, 1);
    std::vector<Parameter*> params;
    block.parameters(params);
    for (auto* p : params) {
      if (p->shape.size() == 4) {
        for (auto& v : p->value) v = static_cast<float>(rng.normal() * 0.4);
      } else if (p->name.ends_with(".bias")) {
        for (auto& v : p->value) v = 10.0f;
      }
    }
    check_module(block, random_tensor(2, 4, 6, 6, rng), Mode::kEval, 9);
  }
  SUBCASE("inverted residual") {
    InvertedResidual block("ir", 3, 3, 1, 2, 2);
    std::vector<Parameter*> params;
    block.parameters(params);
    for (auto* p : params) {
      if (p->shape.size() == 4) {
        for (auto& v : p->value) v = static_cast<float>(rng.normal() * 0.1);
      } else if (p->name.ends_with(".bias")) {
        for (auto& v : p->value) v = 3.0f;
      }
    }
    check_module(block, random_tensor(1, 3, 5, 5, rng), Mode::kEval, 10);
  }
  SUBCASE("aspp") {
    Aspp aspp("a", 3, 4, {1, 2});
    std::vector<Parameter*> params;
    aspp.parameters(params);
    // Positive biases keep every ReLU away from its kink.
    for (auto* p : params) {
      if (p->shape.size() == 4) {
        for (auto& v : p->value) v = static_cast<float>(rng.normal() * 0.4);
      } else if (p->name.ends_with(".bias")) {
        for (auto& v : p->value) v = 4.0f;
      }
    }
    check_module(aspp, random_tensor(2, 3, 5, 5, rng), Mode::kEval, 6);
  }
}

TEST_CASE("bilinear upsampling backward is the adjoint of forward") {
  Rng rng(5);
  Tensor x = random_tensor(1, 2, 4, 5, rng);
  Tensor g = random_tensor(1, 2, 13, 11, rng);
  Tensor y = upsample_bilinear(x, 13, 11);
  Tensor gx = upsample_bilinear_backward(g, 4, 5);
  CHECK(objective(y, g) == doctest::Approx(objective(x, gx)).epsilon(1e-5));
}

TEST_CASE("bilinear upsampling reproduces half-pixel sampling") {
  Tensor x(1, 1, 1, 2);
  x.data = {0.0f, 1.0f};
  Tensor y = upsample_bilinear(x, 1, 4);
  // Source coordinates -0.25 (clamped), 0.25, 0.75, 1.25 (clamped index).
  CHECK(y.data[0] == doctest::Approx(0.0));
  CHECK(y.data[1] == doctest::Approx(0.25));
  CHECK(y.data[2] == doctest::Approx(0.75));
  CHECK(y.data[3] == doctest::Approx(1.0));
}

TEST_CASE("toy model output has one channel per class") {
  for (auto variant : {TaxonomyVariant::kFourClass, TaxonomyVariant::kSixClass}) {
    const auto tax = make_taxonomy(variant);
    auto model = build_model(BackboneSpec{}, tax, 1);
    Tensor x(2, 3, 20, 24);
    Tensor y = model->forward(x, Mode::kEval);
    CHECK(y.c == tax.num_classes());
    CHECK(y.h == 20);
    CHECK(y.w == 24);
    CHECK(model->parameter_count() < 1'000'000);
  }
}

TEST_CASE("rebuild_head only replaces the classifier") {
  auto model = build_model(BackboneSpec{}, make_taxonomy(TaxonomyVariant::kFourClass), 9);
  std::vector<std::vector<float>> before;
  for (auto* p : model->parameters()) {
    if (p->name.rfind("classifier", 0) != 0) before.push_back(p->value);
  }
  model->rebuild_head(make_taxonomy(TaxonomyVariant::kSixClass));
  std::vector<std::vector<float>> after;
  for (auto* p : model->parameters()) {
    if (p->name.rfind("classifier", 0) != 0) after.push_back(p->value);
  }
  CHECK(before == after);
  CHECK(model->find("classifier.weight")->shape[0] == 6);
  Tensor y = model->forward(Tensor(1, 3, 16, 16), Mode::kEval);
  CHECK(y.c == 6);
}

TEST_CASE("frozen encoder receives exactly zero gradient") {
  Rng rng(2);
  auto model = build_model(BackboneSpec{}, make_taxonomy(TaxonomyVariant::kFourClass), 4);
  model->set_encoder_frozen(true);
  Tensor x = random_tensor(2, 3, 16, 16, rng);
  Tensor y = model->forward(x, Mode::kTrain);
  model->backward(random_tensor(y.n, y.c, y.h, y.w, rng));
  for (auto* p : model->encoder_parameters()) {
    for (float g : p->grad) CHECK(g == 0.0f);
  }
  bool decoder_moved = false;
  for (auto* p : model->decoder_parameters()) {
    for (float g : p->grad) decoder_moved = decoder_moved || g != 0.0f;
  }
  CHECK(decoder_moved);
}

TEST_CASE("model initialization is a function of the seed") {
  const auto tax = make_taxonomy(TaxonomyVariant::kFourClass);
  auto a = build_model(BackboneSpec{}, tax, 5);
  auto b = build_model(BackboneSpec{}, tax, 5);
  auto c = build_model(BackboneSpec{}, tax, 6);
  CHECK(a->find("encoder.stage2.0.weight")->value == b->find("encoder.stage2.0.weight")->value);
  CHECK(a->find("encoder.stage2.0.weight")->value != c->find("encoder.stage2.0.weight")->value);
}

TEST_CASE("backbone validation") {
  const auto tax = make_taxonomy(TaxonomyVariant::kFourClass);
  BackboneSpec mobile{BackboneFamily::kMobileNetV2, PretrainSource::kContrastiveImagenet, std::nullopt};
  CHECK_THROWS_AS(build_model(mobile, tax), Error);
  try {
    build_model(mobile, tax);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfigError);
  }
  BackboneSpec toy{BackboneFamily::kToy, PretrainSource::kSupervisedImagenet, std::nullopt};
  try {
    build_model(toy, tax);
    FAIL("toy with pretrained weights accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfigError);
  }
  BackboneSpec missing{BackboneFamily::kResNet50, PretrainSource::kSupervisedImagenet, "/nonexistent/weights.tsw"};
  try {
    build_model(missing, tax);
    FAIL("missing weights accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kWeightsNotFound);
  }
}

TEST_CASE("mobilenet and resnet encoders reach output stride 16") {
  const auto tax = make_taxonomy(TaxonomyVariant::kFourClass);
  for (auto family : {BackboneFamily::kMobileNetV2, BackboneFamily::kResNet50}) {
    SegmentationModel model(BackboneSpec{family, PretrainSource::kRandom, std::nullopt}, tax, 0);
    CHECK(model.output_stride() == 16);
    Tensor y = model.forward(Tensor(1, 3, 32, 32, 0.5f), Mode::kEval);
    CHECK(y.c == 4);
    CHECK(y.h == 32);
  }
  SegmentationModel r50(BackboneSpec{BackboneFamily::kResNet50, PretrainSource::kRandom, std::nullopt}, tax, 0);
  CHECK(r50.find("encoder.layer3.5.conv2.weight") != nullptr);
  CHECK(r50.find("encoder.layer4.0.downsample.0.weight")->shape == std::vector<std::int64_t>{2048, 1024, 1, 1});
  SegmentationModel mb(BackboneSpec{BackboneFamily::kMobileNetV2, PretrainSource::kRandom, std::nullopt}, tax, 0);
  CHECK(mb.find("encoder.features.17.conv.2.weight")->shape == std::vector<std::int64_t>{320, 960, 1, 1});
  CHECK(mb.find("encoder.features.1.conv.0.0.weight")->shape == std::vector<std::int64_t>{32, 1, 3, 3});
}
