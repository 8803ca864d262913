// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "core/error.hpp"
#include "fusion/fusion.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace matsod;
using namespace matsod::testing;
using ad::Matrix;
using ad::Var;

namespace {

std::vector<Var> random_features(std::mt19937_64& rng, int n, Eigen::Index rows, Eigen::Index cols,
                                 bool grad = false) {
  std::vector<Var> fs;
  for (int i = 0; i < n; ++i) fs.emplace_back(random_matrix(rng, rows, cols), grad);
  return fs;
}

void set_identity_projections(fusion::FusionParams& p) {
  for (ad::Linear* l : {&p.query, &p.key, &p.value}) {
    Var w = l->weight, b = l->bias;
    w.mutable_value().setIdentity();
    b.mutable_value().setZero();
  }
  for (ad::Linear* l : {&p.ffn_in, &p.ffn_out}) {
    Var w = l->weight, b = l->bias;
    w.mutable_value().setZero();
    b.mutable_value().setZero();
  }
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("modality embeddings place tokens in their slots and round-trip") {
  std::mt19937_64 rng(21);
  const auto fs = random_features(rng, 3, 4, 2);
  const Var sp = fusion::embed_modalities_spatial(fs);
  CHECK(sp.rows() == 12);
  CHECK(sp.cols() == 2);
  CHECK(sp.value().row(3 * 2 + 1) == fs[1].value().row(2));
  const Var ch = fusion::embed_modalities_channel(fs);
  CHECK(ch.rows() == 6);
  CHECK(ch.cols() == 4);
  CHECK(ch.value().row(1 * 3 + 2) == fs[2].value().col(1).transpose());
  for (int m = 0; m < 3; ++m) {
    CHECK(fusion::unembed_spatial(sp, 3, m).value() == fs[m].value());
    CHECK(fusion::unembed_channel(ch, 3, m).value() == fs[m].value());
  }
  std::vector<Var> bad = fs;
  bad.emplace_back(Matrix::Zero(4, 3));
  CHECK_THROWS_AS(fusion::embed_modalities_spatial(bad), Error);
}

TEST_CASE("single-modality fusion reduces to value projection plus FFN") {
  std::mt19937_64 rng(22);
  ad::ParamStore store(22);
  const auto sp = fusion::make_fusion_params(store, "s", 3, 3, 2, 1);
  const auto ch = fusion::make_fusion_params(store, "c", 4, 3, 2, 1);
  const auto fs = random_features(rng, 1, 4, 3);
  const Matrix& f = fs[0].value();
  const Matrix s = fusion::sdfm_fuse(fs, sp).value();
  CHECK(max_abs(s - (affine(sp.value, f) + ffn_oracle(sp, f))) < 1e-12);
  const Matrix c = fusion::cdfm_fuse(fs, ch).value();
  CHECK(max_abs(c - (affine(ch.value, f.transpose()).transpose() + ffn_oracle(ch, f))) < 1e-12);
  // The general path with N=1 agrees with the loop oracle too.
  CHECK(max_abs(s - sdfm_oracle(fs, sp)) < 1e-12);
  CHECK(max_abs(c - cdfm_oracle(fs, ch)) < 1e-12);
}

TEST_CASE("identical inputs with identity projections give uniform weights and return the input") {
  std::mt19937_64 rng(23);
  ad::ParamStore store(23);
  auto sp = fusion::make_fusion_params(store, "s", 3, 3, 2, 1);
  auto ch = fusion::make_fusion_params(store, "c", 4, 3, 2, 1);
  set_identity_projections(sp);
  set_identity_projections(ch);
  const Var f(random_matrix(rng, 4, 3));
  const std::vector<Var> pair{f, f};
  fusion::FusionTrace trace;
  CHECK(max_abs(fusion::sdfm_fuse(pair, sp, &trace).value() - f.value()) < 1e-12);
  CHECK(max_abs(trace.weights.array() - 0.5) < 1e-12);
  CHECK(max_abs(fusion::cdfm_fuse(pair, ch, &trace).value() - f.value()) < 1e-12);
  CHECK(max_abs(trace.weights.array() - 0.5) < 1e-12);
}

TEST_CASE("fusion matches the loop oracle for two to four modalities") {
  std::mt19937_64 rng(24);
  ad::ParamStore store(24);
  const auto sp = fusion::make_fusion_params(store, "s", 2, 2, 2, 1);
  const auto sp2 = fusion::make_fusion_params(store, "s2", 2, 2, 2, 2);
  const auto ch = fusion::make_fusion_params(store, "c", 4, 2, 2, 1);
  const auto ch2 = fusion::make_fusion_params(store, "c2", 4, 2, 2, 2);
  for (int n = 2; n <= 4; ++n) {
    CAPTURE(n);
    const auto fs = random_features(rng, n, 4, 2);  // 2x2 map, C = 2
    CHECK(max_abs(fusion::sdfm_fuse(fs, sp).value() - sdfm_oracle(fs, sp)) < 1e-12);
    CHECK(max_abs(fusion::sdfm_fuse(fs, sp2).value() - sdfm_oracle(fs, sp2)) < 1e-12);
    CHECK(max_abs(fusion::cdfm_fuse(fs, ch).value() - cdfm_oracle(fs, ch)) < 1e-12);
    CHECK(max_abs(fusion::cdfm_fuse(fs, ch2).value() - cdfm_oracle(fs, ch2)) < 1e-12);
  }
}

TEST_CASE("fusion output is permutation invariant and attention rows are distributions") {
  std::mt19937_64 rng(25);
  ad::ParamStore store(25);
  const auto sp = fusion::make_fusion_params(store, "s", 6, 6, 2, 2);
  const auto ch = fusion::make_fusion_params(store, "c", 16, 6, 2, 2);
  const auto fs = random_features(rng, 3, 16, 6);
  const std::vector<Var> perm{fs[2], fs[0], fs[1]};
  fusion::FusionTrace trace;
  const Matrix a = fusion::sdfm_fuse(fs, sp, &trace).value();
  CHECK(trace.weights.rows() == 16 * 2 * 3);
  CHECK(trace.weights.cols() == 3);
  for (Eigen::Index r = 0; r < trace.weights.rows(); ++r) {
    CHECK(std::abs(trace.weights.row(r).sum() - 1.0) < 1e-12);
    CHECK(trace.weights.row(r).minCoeff() >= 0.0);
  }
  CHECK(max_abs(a - fusion::sdfm_fuse(perm, sp).value()) < 1e-12);
  const Matrix b = fusion::cdfm_fuse(fs, ch, &trace).value();
  CHECK(trace.weights.rows() == 6 * 2 * 3);
  CHECK(max_abs(b - fusion::cdfm_fuse(perm, ch).value()) < 1e-12);
  CHECK(a.rows() == 16);
  CHECK(b.cols() == 6);
}

TEST_CASE("fusion gradients match finite differences") {
  std::mt19937_64 rng(26);
  ad::ParamStore store(26);
  const auto sp = fusion::make_fusion_params(store, "s", 2, 2, 2, 1);
  const auto ch = fusion::make_fusion_params(store, "c", 16, 2, 2, 2);
  const auto fs = random_features(rng, 3, 16, 2, true);  // 4x4 map
  for (auto* fn : {&fusion::sdfm_fuse, &fusion::cdfm_fuse}) {
    const auto& p = fn == &fusion::sdfm_fuse ? sp : ch;
    std::vector<Var> leaves = fs;
    leaves.push_back(p.query.weight);
    leaves.push_back(p.value.bias);
    leaves.push_back(p.ffn_in.weight);
    const auto r = grad_check([&] { return weighted_sum((*fn)(fs, p, nullptr), 7); }, leaves);
    CHECK(r.analytic_norm > 0.0);
    CHECK(r.relative_error < 1e-6);
  }
}

TEST_CASE("CSFH routes levels by plan and the additive mode has no parameters") {
  ModelConfig cfg;
  ad::ParamStore store(27);
  fusion::Csfh csfh(cfg, store);
  CHECK(store.contains("fusion.level1.sdfm.query.weight"));
  CHECK(store.contains("fusion.level2.sdfm.query.weight"));
  CHECK(store.contains("fusion.level3.cdfm.query.weight"));
  CHECK(store.contains("fusion.level4.cdfm.query.weight"));
  CHECK(csfh.level_params(3).query.weight.rows() == 4);  // 2x2 tokens

  std::mt19937_64 rng(28);
  const auto shapes = cfg.level_shapes();
  std::map<ModalityKind, FeaturePyramid> pyrs;
  for (const auto& m : {kRgb, kDepth}) {
    FeaturePyramid p;
    p.shapes = shapes;
    for (int l = 0; l < kLevels; ++l) {
      p.levels[l] = Var(random_matrix(rng, shapes[l].height * shapes[l].width, shapes[l].channels));
    }
    pyrs[m] = p;
  }
  const auto fused = csfh.fuse(pyrs);
  for (int l = 0; l < kLevels; ++l) {
    std::vector<Var> feats{pyrs[kDepth].levels[l], pyrs[kRgb].levels[l]};
    const Matrix expect = l < 2 ? sdfm_oracle(feats, csfh.level_params(l)) : cdfm_oracle(feats, csfh.level_params(l));
    CHECK(max_abs(fused[l].value() - expect) < 1e-10);
  }

  cfg.fusion = FusionMode::kAdd;
  ad::ParamStore plain(27);
  fusion::Csfh add(cfg, plain);
  CHECK(plain.total_size() == 0);
  const auto summed = add.fuse(pyrs);
  CHECK(summed[2].value() == (pyrs[kRgb].levels[2].value() + pyrs[kDepth].levels[2].value()));

  pyrs[kDepth].shapes[0].channels = 99;
  CHECK_THROWS_AS(csfh.fuse(pyrs), Error);
}
