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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <filesystem>

#include <doctest.h>

#include "terrainseg/error.hpp"
#include "terrainseg/nn/archive.hpp"
#include "terrainseg/nn/model.hpp"
#include "terrainseg/nn/optim.hpp"
#include "terrainseg/raster.hpp"
#include "terrainseg/synthetic.hpp"
#include "terrainseg/train.hpp"
#include "test_util.hpp"

using namespace terrainseg;
namespace fs = std::filesystem;

namespace {

PreprocessSpec small_preprocess(int size = 32) {
  PreprocessSpec p;
  p.height = size;
  p.width = size;
  return p;
}

TrainConfig small_config(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 4;
  c.learning_rate = 5e-4;
  c.seed = 7;
  c.preprocess = small_preprocess();
  return c;
}

DatasetManifest small_set(const fs::path& root, Split split = Split::kTrain, int count = 8, std::uint64_t seed = 1) {
  SyntheticSpec spec;
  spec.count = count;
  spec.height = 32;
  spec.width = 32;
  spec.split = split;
  spec.seed = seed;
  return generate_synthetic(spec, root);
}

std::unique_ptr<nn::SegmentationModel> toy_model(std::uint64_t seed = 3) {
  return nn::build_model(nn::BackboneSpec{}, make_taxonomy(TaxonomyVariant::kFourClass), seed);
}

bool same_parameters(nn::SegmentationModel& a, nn::SegmentationModel& b) {
  auto pa = a.parameters();
  auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->name != pb[i]->name || pa[i]->value != pb[i]->value) return false;
  }
  return true;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("synthetic quadrants are balanced and use the class gray levels") {
  testing::TempDir dir("synth");
  const auto manifest = small_set(dir.path(), Split::kTrain, 8);
  REQUIRE(manifest.size() == 8);
  std::array<std::size_t, 4> counts{};
  for (const auto& e : manifest.entries) {
    const LabelMask mask = read_mask(e.mask_ref);
    REQUIRE(mask.height == 32);
    for (const auto v : mask.values) {
      REQUIRE(v < 4);
      ++counts[v];
    }
  }
  const double total = 8.0 * 32 * 32;
  for (auto c : counts) CHECK(static_cast<double>(c) / total == doctest::Approx(0.25).epsilon(0.15));
  for (int c = 0; c + 1 < 4; ++c) CHECK(synthetic_gray_level(c, 4) != synthetic_gray_level(c + 1, 4));
}

TEST_CASE("synthetic generation is deterministic") {
  testing::TempDir a("synth-a");
  testing::TempDir b("synth-b");
  const auto ma = small_set(a.path());
  const auto mb = small_set(b.path());
  REQUIRE(ma.size() == mb.size());
  for (std::size_t i = 0; i < ma.size(); ++i) {
    CHECK(read_image_u8(ma.entries[i].image_ref).data == read_image_u8(mb.entries[i].image_ref).data);
    CHECK(read_mask(ma.entries[i].mask_ref).values == read_mask(mb.entries[i].mask_ref).values);
  }
}

TEST_CASE("train config round-trips through JSON") {
  TrainConfig c = small_config(12);
  c.optimizer = nn::OptimizerKind::kSgd;
  c.loss.kind = LossKind::kInverseFrequencyPlusRecall;
  c.freeze_encoder = true;
  const TrainConfig back = TrainConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.digest() == c.digest());
}

TEST_CASE("train config digest ignores epochs and paths but not the trajectory") {
  const TrainConfig base = small_config(5);
  TrainConfig longer = base;
  longer.epochs = 50;
  longer.checkpoint_dir = "/somewhere/else";
  CHECK(longer.digest() == base.digest());
  TrainConfig other = base;
  other.seed = 8;
  CHECK(other.digest() != base.digest());
  other = base;
  other.learning_rate = 1e-3;
  CHECK(other.digest() != base.digest());
}

TEST_CASE("invalid train configs are rejected") {
  TrainConfig c = small_config(1);
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config(-1);
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config(1);
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("zero epochs returns the initial weights and an empty history") {
  testing::TempDir dir("zero");
  const auto train = small_set(dir.path());
  auto model = toy_model();
  auto reference = toy_model();
  TrainConfig c = small_config(0);
  c.checkpoint_dir = dir / "ck";
  const auto result = finetune(*model, train, c);
  CHECK(result.history.empty());
  CHECK(std::isnan(result.final_train_loss));
  CHECK(same_parameters(*model, *reference));
  REQUIRE(result.last_checkpoint.has_value());
  auto loaded = load_checkpoint(*result.last_checkpoint);
  CHECK(loaded.epoch == 0);
  CHECK(same_parameters(*loaded.model, *reference));
}

TEST_CASE("fine-tuning is bitwise deterministic") {
  testing::TempDir dir("det");
  const auto train = small_set(dir.path());
  auto a = toy_model();
  auto b = toy_model();
  const auto ra = finetune(*a, train, small_config(2));
  const auto rb = finetune(*b, train, small_config(2));
  CHECK(same_bits(ra.final_train_loss, rb.final_train_loss));
  CHECK(same_parameters(*a, *b));
}

TEST_CASE("resuming reproduces the uninterrupted trajectory") {
  testing::TempDir dir("resume");
  const auto train = small_set(dir.path());
  auto full = toy_model();
  TrainConfig c = small_config(3);
  c.checkpoint_dir = dir / "full";
  const auto rf = finetune(*full, train, c);

  auto part = toy_model();
  c = small_config(1);
  c.checkpoint_dir = dir / "part";
  const auto rp = finetune(*part, train, c);
  REQUIRE(rp.last_checkpoint.has_value());

  auto resumed = toy_model(99);
  c = small_config(3);
  c.checkpoint_dir = dir / "part";
  FinetuneOptions options;
  options.resume_from = rp.last_checkpoint;
  const auto rr = finetune(*resumed, train, c, options);
  REQUIRE(rr.history.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(same_bits(rr.history[i].train_loss, rf.history[i].train_loss));
  CHECK(same_parameters(*resumed, *full));
}

TEST_CASE("resuming under a different config is refused") {
  testing::TempDir dir("resume-bad");
  const auto train = small_set(dir.path());
  auto model = toy_model();
  TrainConfig c = small_config(1);
  c.checkpoint_dir = dir / "ck";
  const auto r = finetune(*model, train, c);
  TrainConfig other = small_config(2);
  other.learning_rate = 1e-2;
  FinetuneOptions options;
  options.resume_from = r.last_checkpoint;
  auto fresh = toy_model();
  CHECK_THROWS_AS(finetune(*fresh, train, other, options), Error);
}

TEST_CASE("a runaway learning rate raises DIVERGED") {
  testing::TempDir dir("diverge");
  const auto train = small_set(dir.path(), Split::kTrain, 16);
  auto model = toy_model();
  TrainConfig c = small_config(20);
  c.optimizer = nn::OptimizerKind::kSgd;
  c.momentum = 0.0;
  c.learning_rate = 1e30;
  try {
    finetune(*model, train, c);
    FAIL("expected DIVERGED");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDiverged);
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("split discipline is enforced") {
  testing::TempDir dir("split");
  const auto train = small_set(dir.path() / "train");
  const auto test = small_set(dir.path() / "test", Split::kTest, 4, 2);
  auto model = toy_model();
  const auto tax = make_taxonomy(TaxonomyVariant::kFourClass);
  try {
    finetune(*model, test, small_config(1));
    FAIL("expected SPLIT_VIOLATION");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSplitViolation);
  }
  try {
    evaluate(*model, train, tax, small_preprocess());
    FAIL("expected SPLIT_VIOLATION");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSplitViolation);
  }
  CHECK_NOTHROW(score(*model, train, tax, small_preprocess()));
  CHECK_NOTHROW(evaluate(*model, test, tax, small_preprocess()));
}

TEST_CASE("an untrained model scores near chance on balanced quadrants") {
  testing::TempDir dir("chance");
  const auto test = small_set(dir.path(), Split::kTest, 8);
  auto model = toy_model();
  const auto report = evaluate(*model, test, make_taxonomy(TaxonomyVariant::kFourClass), small_preprocess());
  CHECK(std::abs(report.accuracy - 0.25) <= 0.1);
}

TEST_CASE("a saved checkpoint evaluates identically after loading") {
  testing::TempDir dir("ckpt");
  const auto train = small_set(dir.path() / "train");
  const auto test = small_set(dir.path() / "test", Split::kTest, 4, 5);
  auto model = toy_model();
  TrainConfig c = small_config(2);
  c.checkpoint_dir = dir / "ck";
  const auto r = finetune(*model, train, c);
  REQUIRE(r.last_checkpoint.has_value());
  REQUIRE(r.best_checkpoint.has_value());
  const auto tax = make_taxonomy(TaxonomyVariant::kFourClass);
  const auto before = evaluate(*model, test, tax, c.preprocess);
  auto loaded = load_checkpoint(*r.last_checkpoint);
  CHECK(loaded.epoch == 2);
  CHECK(loaded.history.size() == 2);
  CHECK(loaded.config.digest() == c.digest());
  const auto after = evaluate(*loaded.model, test, tax, c.preprocess);
  CHECK(after.confusion == before.confusion);
  CHECK(same_bits(after.accuracy, before.accuracy));
  const auto again = evaluate(*loaded.model, test, tax, c.preprocess);
  CHECK(again.confusion == after.confusion);
}

TEST_CASE("epoch order is a seeded permutation") {
  const auto a = epoch_order(1, "abc", 1, 50);
  CHECK(a == epoch_order(1, "abc", 1, 50));
  CHECK(a != epoch_order(1, "abc", 2, 50));
  CHECK(a != epoch_order(2, "abc", 1, 50));
  CHECK(a != epoch_order(1, "abd", 1, 50));
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
}

TEST_CASE("epoch records round-trip through JSON") {
  EpochRecord r;
  r.epoch = 4;
  r.train_loss = 0.125;
  r.train_accuracy = 0.75;
  r.eval["msl_test"] = {0.5, 0.25, 0.125};
  const auto back = epoch_record_from_json(to_json(r));
  CHECK(back.epoch == 4);
  CHECK(back.train_loss == 0.125);
  CHECK(back.train_accuracy == 0.75);
  REQUIRE(back.eval.count("msl_test") == 1);
  CHECK(back.eval.at("msl_test").miou == 0.125);
}

TEST_CASE("pretrained encoder weights load through common name prefixes") {
  testing::TempDir dir("weights");
  auto source = toy_model(11);
  nn::Archive archive;
  for (nn::Parameter* p : source->encoder_parameters()) {
    std::string name = p->name.substr(std::string("encoder.").size());
    archive.add("module." + name, p->shape, p->value);
  }
  archive.add("fc.weight", {10, 4}, std::vector<float>(40, 1.0f));
  archive.add("fc.bias", {10}, std::vector<float>(10, 1.0f));
  const fs::path path = dir / "w.tsnr";
  nn::write_archive(archive, path);

  auto target = toy_model(12);
  const auto report = nn::load_pretrained_encoder(*target, path);
  CHECK(report.tensors_loaded == source->encoder_parameters().size());
  CHECK(report.ignored.size() == 2);
  auto src = source->encoder_parameters();
  auto dst = target->encoder_parameters();
  for (std::size_t i = 0; i < src.size(); ++i) CHECK(src[i]->value == dst[i]->value);
  auto fresh = toy_model(12);
  auto dec_a = target->decoder_parameters();
  auto dec_b = fresh->decoder_parameters();
  for (std::size_t i = 0; i < dec_a.size(); ++i) CHECK(dec_a[i]->value == dec_b[i]->value);
}

TEST_CASE("pretrained loading errors") {
  testing::TempDir dir("weights-bad");
  auto model = toy_model();
  try {
    nn::load_pretrained_encoder(*model, dir / "missing.tsnr");
    FAIL("expected WEIGHTS_NOT_FOUND");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kWeightsNotFound);
  }

  nn::Archive wrong;
  for (nn::Parameter* p : model->encoder_parameters()) {
    auto shape = p->shape;
    shape[0] += 1;
    std::size_t n = 1;
    for (auto d : shape) n *= static_cast<std::size_t>(d);
    wrong.add(p->name, shape, std::vector<float>(n, 0.0f));
  }
  nn::write_archive(wrong, dir / "wrong.tsnr");
  try {
    nn::load_pretrained_encoder(*model, dir / "wrong.tsnr");
    FAIL("expected SHAPE_MISMATCH");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kShapeMismatch);
  }

  nn::Archive partial;
  auto params = model->encoder_parameters();
  partial.add(params[0]->name, params[0]->shape, params[0]->value);
  nn::write_archive(partial, dir / "partial.tsnr");
  CHECK_THROWS_AS(nn::load_pretrained_encoder(*model, dir / "partial.tsnr"), Error);

  nn::BackboneSpec spec;
  spec.family = nn::BackboneFamily::kMobileNetV2;
  spec.pretrain_source = nn::PretrainSource::kSupervisedImagenet;
  spec.weights_path = dir / "absent.tsnr";
  try {
    nn::build_model(spec, make_taxonomy(TaxonomyVariant::kFourClass), 0);
    FAIL("expected WEIGHTS_NOT_FOUND");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kWeightsNotFound);
  }
}

TEST_CASE("optimizer state survives a save and load") {
  nn::OptimizerConfig config;
  config.learning_rate = 0.1;
  nn::Parameter p("w", {3});
  p.value = {1.0f, 2.0f, 3.0f};
  std::vector<nn::Parameter*> params{&p};
  nn::Optimizer a(config);
  for (int step = 0; step < 3; ++step) {
    p.zero_grad();
    for (int i = 0; i < 3; ++i) p.grad_data()[i] = 0.5f * static_cast<float>(i + 1);
    a.step(params);
  }
  nn::Archive archive;
  a.save(archive);
  nn::Optimizer b(config);
  b.load(archive);
  nn::Parameter q = p;
  std::vector<nn::Parameter*> qparams{&q};
  p.zero_grad();
  q.zero_grad();
  for (int i = 0; i < 3; ++i) {
    p.grad_data()[i] = 1.0f;
    q.grad_data()[i] = 1.0f;
  }
  a.step(params);
  b.step(qparams);
  CHECK(p.value == q.value);
}

TEST_CASE("cosine schedule anneals per epoch and pins the horizon in the digest") {
  TrainConfig c = small_config(10);
  for (int e = 1; e <= 10; ++e) CHECK(epoch_learning_rate(c, e) == c.learning_rate);
  c.lr_schedule = LrSchedule::kCosine;
  CHECK(epoch_learning_rate(c, 1) == doctest::Approx(c.learning_rate));
  CHECK(epoch_learning_rate(c, 6) == doctest::Approx(0.5 * c.learning_rate));
  for (int e = 2; e <= 10; ++e) CHECK(epoch_learning_rate(c, e) < epoch_learning_rate(c, e - 1));
  CHECK(epoch_learning_rate(c, 10) > 0.0);
  TrainConfig longer = c;
  longer.epochs = 20;
  CHECK(longer.digest() != c.digest());
  CHECK(TrainConfig::from_json(c.to_json()).lr_schedule == LrSchedule::kCosine);
  nlohmann::json bad = c.to_json();
  bad["lr_schedule"] = "step";
  CHECK_THROWS_AS(TrainConfig::from_json(bad), Error);
}
