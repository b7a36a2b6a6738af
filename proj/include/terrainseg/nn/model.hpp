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

#ifndef TERRAINSEG_NN_MODEL_HPP_
#define TERRAINSEG_NN_MODEL_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "terrainseg/nn/layers.hpp"
#include "terrainseg/taxonomy.hpp"

namespace terrainseg::nn {

enum class BackboneFamily { kMobileNetV2, kResNet50, kResNet101, kResNet101x2, kToy };
enum class PretrainSource { kSupervisedImagenet, kContrastiveImagenet, kRandom };

std::string_view to_string(BackboneFamily family);
std::string_view to_string(PretrainSource source);
std::optional<BackboneFamily> parse_backbone_family(std::string_view text);
std::optional<PretrainSource> parse_pretrain_source(std::string_view text);

struct BackboneSpec {
  BackboneFamily family = BackboneFamily::kToy;
  PretrainSource pretrain_source = PretrainSource::kRandom;
  std::optional<std::filesystem::path> weights_path;

  // CONFIG_ERROR for combinations that have no published weights.
  void validate() const;
  nlohmann::json to_json() const;
  static BackboneSpec from_json(const nlohmann::json& j);
};

struct LoadReport {
  std::size_t tensors_loaded = 0;
  std::size_t values_loaded = 0;
  std::vector<std::string> ignored;  // source tensors with no encoder counterpart
};

class SegmentationModel {
 public:
  SegmentationModel(const BackboneSpec& backbone, const ClassTaxonomy& taxonomy, std::uint64_t init_seed);

  // Logits at the input resolution, N x C x H x W.
  Tensor forward(const Tensor& x, Mode mode);
  void backward(const Tensor& grad_logits);

  std::vector<Parameter*> parameters();
  std::vector<Parameter*> encoder_parameters();
  std::vector<Parameter*> decoder_parameters();
  Parameter* find(const std::string& name);

  // Swaps the classifier for a freshly initialized one; encoder and ASPP are kept.
  void rebuild_head(const ClassTaxonomy& taxonomy);
  void set_encoder_frozen(bool frozen);
  bool encoder_frozen() const { return encoder_frozen_; }

  int num_classes() const { return num_classes_; }
  TaxonomyVariant taxonomy_variant() const { return variant_; }
  const BackboneSpec& backbone() const { return backbone_; }
  std::uint64_t init_seed() const { return init_seed_; }
  int output_stride() const { return output_stride_; }
  std::size_t parameter_count();

 private:
  void build_encoder();
  void build_decoder();
  void init_parameters(const std::vector<Parameter*>& params) const;

  BackboneSpec backbone_;
  TaxonomyVariant variant_;
  int num_classes_;
  std::uint64_t init_seed_;
  int encoder_channels_ = 0;
  int decoder_channels_ = 0;
  int output_stride_ = 0;
  std::vector<int> aspp_rates_;
  bool encoder_frozen_ = false;

  Sequential encoder_;
  std::unique_ptr<Aspp> aspp_;
  std::unique_ptr<Sequential> head_;
  std::unique_ptr<Conv2d> classifier_;
  int logits_h_ = 0;
  int logits_w_ = 0;
};

// Builds the model; when pretrain_source is not RANDOM the encoder is loaded
// from backbone.weights_path through load_pretrained_encoder.
std::unique_ptr<SegmentationModel> build_model(const BackboneSpec& backbone, const ClassTaxonomy& taxonomy,
                                               std::uint64_t init_seed = 0);

// Maps an external checkpoint onto the encoder. Accepts torchvision-style names
// with or without module./backbone./encoder./model. prefixes and ignores
// classification-head tensors. Every encoder tensor must be present with the
// same shape.
LoadReport load_pretrained_encoder(SegmentationModel& model, const std::filesystem::path& path);

}  // namespace terrainseg::nn

#endif  // TERRAINSEG_NN_MODEL_HPP_
