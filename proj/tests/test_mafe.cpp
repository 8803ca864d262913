// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "core/error.hpp"
#include "gradcheck.hpp"
#include "mafe/mafe.hpp"

using namespace matsod;
using namespace matsod::testing;
using ad::Matrix;
using ad::Var;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.input_size = 16;
  cfg.patch_size = 2;
  cfg.widths = {4, 8, 12, 16};
  cfg.heads = {1, 2, 3, 4};
  cfg.prompt_tokens = 3;
  return cfg;
}

Image random_image(std::mt19937_64& rng, int side, int channels) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(side, side, channels);
  for (auto& v : img.data) v = u(rng);
  return img;
}

double max_abs_diff(const FeaturePyramid& a, const FeaturePyramid& b, int level) {
  return (a.levels[level].value() - b.levels[level].value()).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("patch embedding is local, affine and zero on a zero image") {
  ModelConfig cfg;
  ad::ParamStore store(3);
  mafe::Backbone bb(cfg, store);
  ad::NoGradGuard guard;
  std::mt19937_64 rng(1);

  const Var zero(Matrix::Zero(64 * 64, 3));
  const Matrix e0 = bb.embed_patches(zero, 64, 64).value();
  CHECK(e0.rows() == 256);
  CHECK(e0.cols() == 16);
  CHECK(e0.cwiseAbs().maxCoeff() == 0.0);  // bias initialised to zero

  const Matrix x = image_to_matrix(random_image(rng, 64, 3));
  const Matrix ex = bb.embed_patches(Var(x), 64, 64).value();
  const Matrix e2x = bb.embed_patches(Var(Matrix(2.0 * x)), 64, 64).value();
  CHECK(((e2x - e0) - 2.0 * (ex - e0)).cwiseAbs().maxCoeff() < 1e-12);

  // Perturbing one pixel of patch (1, 2) only changes token 1*16 + 2.
  Matrix y = x;
  y(static_cast<Eigen::Index>(5) * 64 + 9, 1) += 0.5;
  const Matrix ey = bb.embed_patches(Var(y), 64, 64).value();
  for (Eigen::Index k = 0; k < 256; ++k) {
    const double d = (ey.row(k) - ex.row(k)).cwiseAbs().maxCoeff();
    if (k == 18) {
      CHECK(d > 0.0);
    } else {
      CHECK(d == 0.0);
    }
  }
  try {
    bb.embed_patches(Var(Matrix::Zero(6 * 6, 3)), 6, 6);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("patch_size 4") != std::string::npos);
  }
}

TEST_CASE("extract_features returns the stride 4..32 pyramid") {
  ModelConfig cfg;
  ad::ParamStore store(4);
  mafe::Backbone bb(cfg, store);
  mafe::PromptBank prompts(cfg, store);
  std::mt19937_64 rng(2);
  ad::NoGradGuard guard;
  const auto pyr = mafe::extract_features(bb, random_image(rng, 64, 3), &prompts.at(kRgb));
  const int sides[] = {16, 8, 4, 2};
  const int widths[] = {16, 32, 48, 64};
  for (int l = 0; l < kLevels; ++l) {
    CHECK(pyr.levels[l].rows() == sides[l] * sides[l]);
    CHECK(pyr.levels[l].cols() == widths[l]);
    CHECK(pyr.shapes[l] == LevelShape{sides[l], sides[l], widths[l]});
  }
}

TEST_CASE("different prompts give different pyramids at every level") {
  ModelConfig cfg;
  ad::ParamStore store(5);
  mafe::Backbone bb(cfg, store);
  mafe::PromptBank prompts(cfg, store);
  std::mt19937_64 rng(3);
  ad::NoGradGuard guard;
  const Image img = random_image(rng, 64, 1);
  const auto a = mafe::extract_features(bb, img, &prompts.at(kDepth));
  const auto b = mafe::extract_features(bb, img, &prompts.at(kThermal));
  for (int l = 0; l < kLevels; ++l) CHECK(max_abs_diff(a, b, l) > 1e-8);

  // The prompt reaches every spatial token of the first stage.
  const Matrix diff = (a.levels[0].value() - b.levels[0].value()).cwiseAbs();
  for (Eigen::Index r = 0; r < diff.rows(); ++r) CHECK(diff.row(r).maxCoeff() > 0.0);
}

TEST_CASE("zero prompt with zero carries equals the prompt-free pass") {
  ModelConfig cfg;
  ad::ParamStore store(6);
  mafe::Backbone bb(cfg, store);
  for (const auto& st : bb.stages()) {
    if (!st.prompt_carry) continue;
    Var w = st.prompt_carry->weight;
    Var b = st.prompt_carry->bias;
    w.mutable_value().setZero();
    b.mutable_value().setZero();
  }
  std::mt19937_64 rng(4);
  ad::NoGradGuard guard;
  const Var image = mafe::prepare_image(random_image(rng, 64, 3), 64);
  const Var zero(Matrix::Zero(cfg.prompt_tokens, cfg.prompt_width()));
  const auto with = bb.extract_features(image, &zero);
  const auto without = bb.extract_features(image, nullptr);
  for (int l = 0; l < kLevels; ++l) CHECK(max_abs_diff(with, without, l) <= 1e-6);
}

TEST_CASE("unknown modality is rejected with the known list") {
  ModelConfig cfg;
  ad::ParamStore store(7);
  mafe::PromptBank prompts(cfg, store);
  try {
    prompts.at(ModalityKind{"NIR"});
    FAIL("expected an error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("NIR") != std::string::npos);
    CHECK(msg.find("RGB, D, T") != std::string::npos);
  }
}

TEST_CASE("extract_all yields one pyramid per modality, equal to independent calls") {
  ModelConfig cfg;
  ad::ParamStore store(8);
  mafe::Backbone bb(cfg, store);
  mafe::PromptBank prompts(cfg, store);
  std::mt19937_64 rng(5);
  ad::NoGradGuard guard;
  MultimodalSample s;
  s.images[kRgb] = random_image(rng, 64, 3);
  s.ground_truth = Image(64, 64, 1);
  CHECK(mafe::extract_all(bb, s, prompts).size() == 1);

  s.images[kDepth] = random_image(rng, 64, 1);
  s.images[kThermal] = random_image(rng, 64, 1);
  const auto all = mafe::extract_all(bb, s, prompts);
  REQUIRE(all.size() == 3);
  for (const auto& [kind, pyr] : all) {
    CHECK(pyr.shapes == all.begin()->second.shapes);
    const auto single = mafe::extract_features(bb, s.images.at(kind), &prompts.at(kind));
    for (int l = 0; l < kLevels; ++l) CHECK(pyr.levels[l].value() == single.levels[l].value());
  }
}

TEST_CASE("identical construction and input give bit-identical pyramids") {
  ModelConfig cfg;
  std::mt19937_64 rng(6);
  const Image img = random_image(rng, 64, 3);
  auto run = [&] {
    ad::ParamStore store(9);
    mafe::Backbone bb(cfg, store);
    mafe::PromptBank prompts(cfg, store);
    ad::NoGradGuard guard;
    return mafe::extract_features(bb, img, &prompts.at(kRgb));
  };
  const auto a = run();
  const auto b = run();
  for (int l = 0; l < kLevels; ++l) CHECK(a.levels[l].value() == b.levels[l].value());
}

TEST_CASE("prompt gradients through the backbone match finite differences on 16x16") {
  const ModelConfig cfg = tiny_config();
  ad::ParamStore store(10);
  mafe::Backbone bb(cfg, store);
  mafe::PromptBank prompts(cfg, store);
  std::mt19937_64 rng(7);
  const Var image = mafe::prepare_image(random_image(rng, 16, 3), 16);
  Var tokens = prompts.at(kRgb).tokens;
  auto f = [&] {
    const auto pyr = bb.extract_features(image, &tokens);
    std::vector<Var> terms;
    for (int l = 0; l < kLevels; ++l) terms.push_back(weighted_sum(pyr.levels[l], 100 + l));
    return ad::add_n(terms);
  };
  const auto r = grad_check(f, {tokens});
  CHECK(r.analytic_norm > 0.0);
  CHECK(r.relative_error < 1e-3);
}

TEST_CASE("prompt shape and disabled lane are enforced") {
  ModelConfig cfg = tiny_config();
  ad::ParamStore store(11);
  mafe::Backbone bb(cfg, store);
  const Var image(Matrix::Zero(256, 3));
  const Var wrong(Matrix::Zero(2, cfg.prompt_width()));
  CHECK_THROWS_AS(bb.extract_features(image, &wrong), Error);

  cfg.use_prompts = false;
  ad::ParamStore store2(11);
  mafe::Backbone plain(cfg, store2);
  const Var ok(Matrix::Zero(cfg.prompt_tokens, cfg.prompt_width()));
  CHECK_THROWS_AS(plain.extract_features(image, &ok), Error);
  CHECK_FALSE(store2.contains("backbone.stage2.prompt_carry.weight"));
}
