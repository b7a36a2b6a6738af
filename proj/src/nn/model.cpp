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

#include "terrainseg/nn/model.hpp"

#include <cmath>
#include <map>

#include <spdlog/spdlog.h>

#include "terrainseg/error.hpp"
#include "terrainseg/nn/archive.hpp"
#include "terrainseg/rng.hpp"

namespace terrainseg::nn {
namespace {

constexpr std::string_view kEncoderPrefix = "encoder.";

struct ResNetLayout {
  std::vector<int> blocks;
  int width_multiplier;
};

ResNetLayout resnet_layout(BackboneFamily family) {
  switch (family) {
    case BackboneFamily::kResNet50:
      return {{3, 4, 6, 3}, 1};
    case BackboneFamily::kResNet101:
      return {{3, 4, 23, 3}, 1};
    case BackboneFamily::kResNet101x2:
      return {{3, 4, 23, 3}, 2};
    default:
      throw Error(ErrorCode::kInvalidArgument, "not a resnet family");
  }
}

bool starts_with(std::string_view text, std::string_view prefix) {
  return text.substr(0, prefix.size()) == prefix;
}

bool ends_with(std::string_view text, std::string_view suffix) {
  return text.size() >= suffix.size() && text.substr(text.size() - suffix.size()) == suffix;
}

}  // namespace

std::string_view to_string(BackboneFamily family) {
  switch (family) {
    case BackboneFamily::kMobileNetV2:
      return "mobilenet_v2";
    case BackboneFamily::kResNet50:
      return "resnet_50";
    case BackboneFamily::kResNet101:
      return "resnet_101";
    case BackboneFamily::kResNet101x2:
      return "resnet_101_2x";
    case BackboneFamily::kToy:
      return "toy";
  }
  return "unknown";
}

std::string_view to_string(PretrainSource source) {
  switch (source) {
    case PretrainSource::kSupervisedImagenet:
      return "supervised_imagenet";
    case PretrainSource::kContrastiveImagenet:
      return "contrastive_imagenet";
    case PretrainSource::kRandom:
      return "random";
  }
  return "unknown";
}

std::optional<BackboneFamily> parse_backbone_family(std::string_view text) {
  for (auto f : {BackboneFamily::kMobileNetV2, BackboneFamily::kResNet50, BackboneFamily::kResNet101,
                 BackboneFamily::kResNet101x2, BackboneFamily::kToy}) {
    if (text == to_string(f)) return f;
  }
  if (text == "MOBILENET_V2") return BackboneFamily::kMobileNetV2;
  if (text == "RESNET_50") return BackboneFamily::kResNet50;
  if (text == "RESNET_101") return BackboneFamily::kResNet101;
  if (text == "RESNET_101_2X") return BackboneFamily::kResNet101x2;
  if (text == "TOY") return BackboneFamily::kToy;
  return std::nullopt;
}

std::optional<PretrainSource> parse_pretrain_source(std::string_view text) {
  for (auto s : {PretrainSource::kSupervisedImagenet, PretrainSource::kContrastiveImagenet, PretrainSource::kRandom}) {
    if (text == to_string(s)) return s;
  }
  if (text == "SUPERVISED_IMAGENET" || text == "supervised") return PretrainSource::kSupervisedImagenet;
  if (text == "CONTRASTIVE_IMAGENET" || text == "contrastive") return PretrainSource::kContrastiveImagenet;
  if (text == "RANDOM") return PretrainSource::kRandom;
  return std::nullopt;
}

void BackboneSpec::validate() const {
  if (family == BackboneFamily::kMobileNetV2 && pretrain_source == PretrainSource::kContrastiveImagenet) {
    throw Error(ErrorCode::kConfigError, "contrastive weights are not available for mobilenet_v2");
  }
  if (family == BackboneFamily::kToy && pretrain_source != PretrainSource::kRandom) {
    throw Error(ErrorCode::kConfigError, "the toy backbone only supports random initialization");
  }
}

nlohmann::json BackboneSpec::to_json() const {
  nlohmann::json j{{"family", to_string(family)}, {"pretrain_source", to_string(pretrain_source)}};
  j["weights_path"] = weights_path ? nlohmann::json(weights_path->string()) : nlohmann::json(nullptr);
  return j;
}

BackboneSpec BackboneSpec::from_json(const nlohmann::json& j) {
  BackboneSpec spec;
  const auto family = parse_backbone_family(j.at("family").get<std::string>());
  if (!family) throw Error(ErrorCode::kConfigError, "unknown backbone family " + j.at("family").dump());
  spec.family = *family;
  if (j.contains("pretrain_source")) {
    const auto source = parse_pretrain_source(j.at("pretrain_source").get<std::string>());
    if (!source) throw Error(ErrorCode::kConfigError, "unknown pretrain source " + j.at("pretrain_source").dump());
    spec.pretrain_source = *source;
  }
  if (j.contains("weights_path") && !j.at("weights_path").is_null()) {
    spec.weights_path = j.at("weights_path").get<std::string>();
  }
  return spec;
}

SegmentationModel::SegmentationModel(const BackboneSpec& backbone, const ClassTaxonomy& taxonomy,
                                     std::uint64_t init_seed)
    : backbone_(backbone), variant_(taxonomy.variant()), num_classes_(taxonomy.num_classes()), init_seed_(init_seed) {
  backbone_.validate();
  build_encoder();
  build_decoder();
  init_parameters(parameters());
}

void SegmentationModel::build_encoder() {
  const std::string p(kEncoderPrefix);
  switch (backbone_.family) {
    case BackboneFamily::kToy: {
      encoder_.add(conv_bn_relu(p + "stage1", Conv2dOptions{3, 16, 3, 2, 1}));
      encoder_.add(conv_bn_relu(p + "stage2", Conv2dOptions{16, 32, 3, 2, 1}));
      encoder_.add(conv_bn_relu(p + "stage3", Conv2dOptions{32, 48, 3, 1, 2, 2}));
      encoder_.add(conv_bn_relu(p + "stage4", Conv2dOptions{48, 64, 3, 1, 4, 4}));
      encoder_channels_ = 64;
      decoder_channels_ = 32;
      output_stride_ = 4;
      aspp_rates_ = {2, 4, 6};
      return;
    }
    case BackboneFamily::kMobileNetV2: {
      // t, c, n, s
      const int settings[7][4] = {{1, 16, 1, 1},  {6, 24, 2, 2},  {6, 32, 3, 2}, {6, 64, 4, 2},
                                  {6, 96, 3, 1},  {6, 160, 3, 2}, {6, 320, 1, 1}};
      encoder_.add(conv_bn_relu(p + "features.0", Conv2dOptions{3, 32, 3, 2, 1}, 6.0f));
      int in = 32;
      int index = 1;
      int stride_so_far = 2;
      int dilation = 1;
      for (const auto& s : settings) {
        for (int i = 0; i < s[2]; ++i) {
          int stride = i == 0 ? s[3] : 1;
          int block_dilation = dilation;
          if (stride == 2 && stride_so_far == 16) {
            stride = 1;
            dilation *= 2;
          }
          if (stride == 2) stride_so_far *= 2;
          if (i > 0) block_dilation = dilation;
          encoder_.emplace<InvertedResidual>(p + "features." + std::to_string(index++), in, s[1], stride, s[0],
                                             block_dilation);
          in = s[1];
        }
      }
      encoder_.add(conv_bn_relu(p + "features.18", Conv2dOptions{in, 1280, 1}, 6.0f));
      encoder_channels_ = 1280;
      decoder_channels_ = 256;
      output_stride_ = 16;
      aspp_rates_ = {6, 12, 18};
      return;
    }
    default: {
      const auto layout = resnet_layout(backbone_.family);
      const int m = layout.width_multiplier;
      encoder_.emplace<Conv2d>(p + "conv1", Conv2dOptions{3, 64 * m, 7, 2, 3});
      encoder_.emplace<BatchNorm2d>(p + "bn1", 64 * m);
      encoder_.emplace<Relu>();
      encoder_.emplace<MaxPool2d>(3, 2, 1);
      int in = 64 * m;
      int dilation = 1;
      for (int layer = 0; layer < 4; ++layer) {
        const int width = (64 << layer) * m;
        const int out = width * 4;
        int stride = layer == 0 ? 1 : 2;
        const int previous_dilation = dilation;
        if (layer == 3) {
          dilation *= stride;
          stride = 1;
        }
        for (int b = 0; b < layout.blocks[static_cast<std::size_t>(layer)]; ++b) {
          const std::string name = p + "layer" + std::to_string(layer + 1) + "." + std::to_string(b);
          const int block_stride = b == 0 ? stride : 1;
          const int first = b == 0 ? previous_dilation : dilation;
          encoder_.emplace<Bottleneck>(name, in, width, out, block_stride, dilation, first);
          in = out;
        }
      }
      encoder_channels_ = in;
      decoder_channels_ = 256;
      output_stride_ = 16;
      aspp_rates_ = {6, 12, 18};
      return;
    }
  }
}

void SegmentationModel::build_decoder() {
  aspp_ = std::make_unique<Aspp>("decoder.aspp", encoder_channels_, decoder_channels_, aspp_rates_);
  head_ = conv_bn_relu("decoder.head", Conv2dOptions{decoder_channels_, decoder_channels_, 3, 1, 1});
  classifier_ = std::make_unique<Conv2d>("classifier",
                                         Conv2dOptions{decoder_channels_, num_classes_, 1, 1, 0, 1, 1, true});
}

void SegmentationModel::init_parameters(const std::vector<Parameter*>& params) const {
  const Rng root = Rng(init_seed_).split("init");
  for (Parameter* param : params) {
    if (param->shape.size() != 4) continue;
    // Kaiming normal, fan_out mode.
    const double fan_out = static_cast<double>(param->shape[0] * param->shape[2] * param->shape[3]);
    const double stddev = std::sqrt(2.0 / fan_out);
    Rng rng = root.split(param->name);
    for (float& v : param->value) v = static_cast<float>(rng.normal() * stddev);
  }
}

Tensor SegmentationModel::forward(const Tensor& x, Mode mode) {
  Tensor features = encoder_.forward(x, encoder_frozen_ ? Mode::kEval : mode);
  Tensor logits = classifier_->forward(head_->forward(aspp_->forward(features, mode), mode), mode);
  logits_h_ = logits.h;
  logits_w_ = logits.w;
  return upsample_bilinear(logits, x.h, x.w);
}

void SegmentationModel::backward(const Tensor& grad_logits) {
  Tensor g = upsample_bilinear_backward(grad_logits, logits_h_, logits_w_);
  g = classifier_->backward(g);
  g = head_->backward(g);
  g = aspp_->backward(g);
  if (!encoder_frozen_) encoder_.backward(g);
}

std::vector<Parameter*> SegmentationModel::encoder_parameters() {
  std::vector<Parameter*> out;
  encoder_.parameters(out);
  return out;
}

std::vector<Parameter*> SegmentationModel::decoder_parameters() {
  std::vector<Parameter*> out;
  aspp_->parameters(out);
  head_->parameters(out);
  classifier_->parameters(out);
  return out;
}

std::vector<Parameter*> SegmentationModel::parameters() {
  auto out = encoder_parameters();
  auto dec = decoder_parameters();
  out.insert(out.end(), dec.begin(), dec.end());
  return out;
}

Parameter* SegmentationModel::find(const std::string& name) {
  for (Parameter* p : parameters()) {
    if (p->name == name) return p;
  }
  return nullptr;
}

void SegmentationModel::rebuild_head(const ClassTaxonomy& taxonomy) {
  variant_ = taxonomy.variant();
  num_classes_ = taxonomy.num_classes();
  classifier_ = std::make_unique<Conv2d>("classifier",
                                         Conv2dOptions{decoder_channels_, num_classes_, 1, 1, 0, 1, 1, true});
  std::vector<Parameter*> params;
  classifier_->parameters(params);
  init_parameters(params);
}

void SegmentationModel::set_encoder_frozen(bool frozen) {
  encoder_frozen_ = frozen;
  for (Parameter* p : encoder_parameters()) {
    p->frozen = frozen;
    if (frozen) p->grad.clear();
  }
}

std::size_t SegmentationModel::parameter_count() {
  std::size_t total = 0;
  for (Parameter* p : parameters()) {
    if (!p->is_buffer) total += p->numel();
  }
  return total;
}

std::unique_ptr<SegmentationModel> build_model(const BackboneSpec& backbone, const ClassTaxonomy& taxonomy,
                                               std::uint64_t init_seed) {
  backbone.validate();
  if (backbone.pretrain_source != PretrainSource::kRandom) {
    if (!backbone.weights_path) {
      throw Error(ErrorCode::kWeightsNotFound, std::string("no weights path for ") +
                                                   std::string(to_string(backbone.family)) + " / " +
                                                   std::string(to_string(backbone.pretrain_source)));
    }
    if (!std::filesystem::exists(*backbone.weights_path)) {
      throw Error(ErrorCode::kWeightsNotFound, backbone.weights_path->string());
    }
  }
  auto model = std::make_unique<SegmentationModel>(backbone, taxonomy, init_seed);
  if (backbone.pretrain_source != PretrainSource::kRandom) {
    const auto report = load_pretrained_encoder(*model, *backbone.weights_path);
    spdlog::info("loaded {} encoder tensors ({} values) from {}, ignored {}", report.tensors_loaded,
                 report.values_loaded, backbone.weights_path->string(), report.ignored.size());
  }
  return model;
}

LoadReport load_pretrained_encoder(SegmentationModel& model, const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::kWeightsNotFound, path.string());
  const Archive archive = read_archive(path);

  std::map<std::string, Parameter*> targets;
  std::size_t expected_values = 0;
  for (Parameter* p : model.encoder_parameters()) {
    targets.emplace(p->name, p);
    expected_values += p->numel();
  }

  LoadReport report;
  std::map<std::string, bool> seen;
  for (const auto& tensor : archive.tensors) {
    std::string_view name = tensor.name;
    bool stripped = true;
    while (stripped) {
      stripped = false;
      for (std::string_view prefix : {"module.", "backbone.", "encoder.", "model."}) {
        if (starts_with(name, prefix)) {
          name.remove_prefix(prefix.size());
          stripped = true;
        }
      }
    }
    if (starts_with(name, "fc.") || starts_with(name, "classifier.") || ends_with(name, "num_batches_tracked")) {
      report.ignored.push_back(tensor.name);
      continue;
    }
    const std::string key = std::string(kEncoderPrefix) + std::string(name);
    auto it = targets.find(key);
    if (it == targets.end()) {
      report.ignored.push_back(tensor.name);
      continue;
    }
    Parameter* target = it->second;
    if (tensor.shape != target->shape) {
      std::string want;
      std::string got;
      for (auto d : target->shape) want += std::to_string(d) + " ";
      for (auto d : tensor.shape) got += std::to_string(d) + " ";
      throw Error(ErrorCode::kShapeMismatch, tensor.name + ": expected [ " + want + "] got [ " + got + "]");
    }
    if (seen[key]) throw Error(ErrorCode::kShapeMismatch, "duplicate tensor for " + key);
    seen[key] = true;
    target->value = tensor.data;
    report.tensors_loaded += 1;
    report.values_loaded += tensor.data.size();
  }
  for (const auto& [name, param] : targets) {
    if (!seen[name]) throw Error(ErrorCode::kShapeMismatch, path.string() + " lacks encoder tensor " + name);
  }
  if (report.values_loaded != expected_values) {
    throw Error(ErrorCode::kShapeMismatch, "parameter count mismatch: loaded " +
                                               std::to_string(report.values_loaded) + ", encoder has " +
                                               std::to_string(expected_values));
  }
  return report;
}

}  // namespace terrainseg::nn
