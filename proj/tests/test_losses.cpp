// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "autodiff/ops.hpp"
#include "core/error.hpp"
#include "gradcheck.hpp"
#include "losses/losses.hpp"

using namespace matsod;
using namespace matsod::testing;
using ad::Matrix;
using ad::Var;

namespace {

Var column(std::initializer_list<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return Var(m);
}

// Loop Sobel with replicated borders.
Matrix sobel_oracle(const Matrix& map, int h, int w) {
  const double kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  Matrix mag(h * w, 1);
  auto at = [&](int y, int x) {
    y = y < 0 ? 0 : (y >= h ? h - 1 : y);
    x = x < 0 ? 0 : (x >= w ? w - 1 : x);
    return map(y * w + x, 0);
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double gx = 0, gy = 0;
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          gx += kx[i][j] * at(y + i - 1, x + j - 1);
          gy += kx[j][i] * at(y + i - 1, x + j - 1);
        }
      }
      mag(y * w + x, 0) = std::sqrt(gx * gx + gy * gy + 1e-24);
    }
  }
  return mag;
}

FeaturePyramid constant_pyramid(double v) {
  FeaturePyramid p;
  for (int l = 0; l < kLevels; ++l) {
    p.levels[l] = Var(Matrix::Constant(1, 1, v));
    p.shapes[l] = LevelShape{1, 1, 1};
  }
  return p;
}

FeaturePyramid random_pyramid(std::mt19937_64& rng, bool grad) {
  FeaturePyramid p;
  for (int l = 0; l < kLevels; ++l) {
    p.levels[l] = Var(random_matrix(rng, 16, 2, 0.3), grad);  // 4x4x2
    p.shapes[l] = LevelShape{4, 4, 2};
  }
  return p;
}

}  // namespace

TEST_CASE("cross entropy closed forms") {
  const Var ones(Matrix::Ones(4, 1));
  CHECK(losses::cross_entropy_loss(ones, ones).item() < 1e-6);
  const Var half(Matrix::Constant(4, 1, 0.5));
  CHECK(losses::cross_entropy_loss(half, column({1, 0, 0, 1})).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  const double ce = losses::cross_entropy_loss(column({0.9, 0.1, 0.8, 0.2}), column({1, 0, 1, 0})).item();
  CHECK(std::abs(ce - 0.16425203348601) < 1e-10);
  CHECK_THROWS_AS(losses::cross_entropy_loss(half, Var(Matrix::Ones(3, 1))), Error);
}

TEST_CASE("edge loss matches a loop Sobel oracle") {
  const Var a(Matrix::Constant(25, 1, 0.2));
  const Var b(Matrix::Constant(25, 1, 0.9));
  CHECK(losses::edge_loss(a, a, 5, 5).item() == 0.0);
  CHECK(losses::edge_loss(a, b, 5, 5).item() < 1e-20);

  Matrix step = Matrix::Zero(25, 1);
  for (int y = 0; y < 5; ++y) {
    for (int x = 3; x < 5; ++x) step(y * 5 + x, 0) = 1.0;
  }
  const Matrix flat = Matrix::Constant(25, 1, 0.5);
  const double oracle = (sobel_oracle(step, 5, 5) - sobel_oracle(flat, 5, 5)).array().square().mean();
  // Columns 2 and 3 straddle the step, each with |gx| = 4 on every row.
  CHECK(std::abs(oracle - 10.0 * 16.0 / 25.0) < 1e-9);
  CHECK(std::abs(losses::edge_loss(Var(step), Var(flat), 5, 5).item() - oracle) < 1e-12);
  CHECK((losses::sobel_magnitude(Var(step), 5, 5).value() - sobel_oracle(step, 5, 5)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(losses::edge_loss(Var(step), Var(Matrix::Zero(24, 1)), 5, 5), Error);
  CHECK_THROWS_AS(losses::edge_loss(Var(Matrix::Zero(25, 2)), Var(Matrix::Zero(25, 2)), 5, 5), Error);
}

TEST_CASE("saliency loss is the sum of its eight terms") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  SaliencyPrediction p;
  p.height = 4;
  p.width = 4;
  for (auto& m : p.maps) {
    Matrix v(16, 1);
    for (Eigen::Index i = 0; i < 16; ++i) v(i, 0) = u(rng);
    m = Var(v);
  }
  Matrix g = Matrix::Zero(16, 1);
  g.topRows(6).setOnes();
  const Var gt(g);
  double expect = 0.0;
  for (const auto& m : p.maps) {
    expect += losses::cross_entropy_loss(m, gt).item() + losses::edge_loss(m, gt, 4, 4).item();
  }
  CHECK(std::abs(losses::saliency_loss(p, gt).item() - expect) < 1e-12);

  for (auto& m : p.maps) m = gt;
  CHECK(losses::saliency_loss(p, gt).item() < 1e-5);
}

TEST_CASE("MTC closed forms") {
  const auto same = constant_pyramid(0.3);
  CHECK(std::abs(losses::mtc_loss({same, same, same, same}).item() - 4.0) < 1e-12);

  // f1 = g2 = 0 and (f2, g1) chosen so that d_same = 0.1 and d_diff = 0.5.
  const double x = (std::sqrt(0.9) - std::sqrt(0.1)) / 2.0;
  const double y = (std::sqrt(0.9) + std::sqrt(0.1)) / 2.0;
  const losses::MtcBatch batch{constant_pyramid(0.0), constant_pyramid(x), constant_pyramid(y), constant_pyramid(0.0)};
  CHECK(std::abs(losses::mtc_loss(batch).item() - 4.0 * std::exp(-0.4)) < 1e-12);
  CHECK(std::abs(4.0 * std::exp(-0.4) - 2.6812801841) < 1e-9);
}

TEST_CASE("MTC is symmetric, positive and falls as different-prompt distance grows") {
  std::mt19937_64 rng(42);
  const losses::MtcBatch b{random_pyramid(rng, false), random_pyramid(rng, false), random_pyramid(rng, false),
                           random_pyramid(rng, false)};
  const losses::MtcBatch swapped{b.own_second, b.own_first, b.swapped_second, b.swapped_first};
  const double l = losses::mtc_loss(b).item();
  CHECK(l > 0.0);
  CHECK(std::abs(l - losses::mtc_loss(swapped).item()) < 1e-12);

  // Same-prompt pairs coincide (d_same = 0) while d_diff = 2 shift^2 grows.
  double previous = std::numeric_limits<double>::infinity();
  for (double shift : {0.0, 0.5, 1.0, 2.0}) {
    losses::MtcBatch m{constant_pyramid(0.0), constant_pyramid(shift), constant_pyramid(shift), constant_pyramid(0.0)};
    const double v = losses::mtc_loss(m).item();
    CHECK(v < previous);
    previous = v;
  }
}

TEST_CASE("MTC exp-difference form equals the ratio form") {
  std::mt19937_64 rng(43);
  const losses::MtcBatch b{random_pyramid(rng, false), random_pyramid(rng, false), random_pyramid(rng, false),
                           random_pyramid(rng, false)};
  for (auto d : {losses::Distance::kEuclideanMean, losses::Distance::kEuclideanSum}) {
    double ratio = 0.0;
    for (int l = 0; l < kLevels; ++l) {
      auto dist = [&](const FeaturePyramid& p, const FeaturePyramid& q) {
        return losses::feature_distance(p.levels[l], q.levels[l], d).item();
      };
      const double num = dist(b.own_first, b.swapped_second) + dist(b.swapped_first, b.own_second);
      const double den = dist(b.own_first, b.own_second) + dist(b.swapped_first, b.swapped_second);
      ratio += std::exp(num) / std::exp(den);
    }
    CHECK(std::abs(losses::mtc_loss(b, d).item() - ratio) < 1e-9);
  }
  CHECK(losses::parse_distance("euclidean-sum") == losses::Distance::kEuclideanSum);
  CHECK(losses::to_string(losses::Distance::kEuclideanMean) == "euclidean-mean");
  CHECK_THROWS_AS(losses::parse_distance("cosine"), Error);
}

TEST_CASE("all-pairs MTC averages the pairwise losses") {
  std::mt19937_64 rng(44);
  const std::vector<ModalityKind> ms{kRgb, kDepth, kThermal};
  losses::PromptedPyramids feats;
  for (const auto& img : ms) {
    for (const auto& pr : ms) feats[{img, pr}] = random_pyramid(rng, false);
  }
  double expect = 0.0;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    for (std::size_t j = i + 1; j < ms.size(); ++j) {
      const auto& a = ms[i];
      const auto& b = ms[j];
      expect += losses::mtc_loss({feats[{a, a}], feats[{b, b}], feats[{a, b}], feats[{b, a}]}).item();
    }
  }
  CHECK(std::abs(losses::mtc_loss_all_pairs(feats, ms).item() - expect / 3.0) < 1e-12);
}

TEST_CASE("total loss adds and rejects non-finite terms") {
  CHECK(losses::total_loss(Var(Matrix::Zero(1, 1)), Var(Matrix::Constant(1, 1, 4.0))).item() == 4.0);
  CHECK(losses::total_loss(Var(Matrix::Constant(1, 1, 1.5)), Var(Matrix::Constant(1, 1, 2.5))).item() == 4.0);
  const Var nan(Matrix::Constant(1, 1, std::numeric_limits<double>::quiet_NaN()));
  CHECK_THROWS_AS(losses::total_loss(nan, Var(Matrix::Zero(1, 1))), Error);
  const Var inf(Matrix::Constant(1, 1, std::numeric_limits<double>::infinity()));
  CHECK_THROWS_AS(losses::total_loss(Var(Matrix::Zero(1, 1)), inf), Error);

  // Gradients of the two terms add.
  Var x(Matrix::Constant(1, 1, 0.7), true);
  ad::backward(losses::total_loss(ad::square(x), ad::exp(x)));
  CHECK(std::abs(x.grad()(0, 0) - (2 * 0.7 + std::exp(0.7))) < 1e-12);
}

TEST_CASE("MTC and edge gradients match finite differences on 4x4x2 features") {
  std::mt19937_64 rng(45);
  const losses::MtcBatch b{random_pyramid(rng, true), random_pyramid(rng, true), random_pyramid(rng, true),
                           random_pyramid(rng, true)};
  std::vector<Var> leaves;
  for (const auto* p : {&b.own_first, &b.own_second, &b.swapped_first, &b.swapped_second}) {
    leaves.push_back(p->levels[0]);
    leaves.push_back(p->levels[3]);
  }
  const auto r = grad_check([&] { return losses::mtc_loss(b); }, leaves);
  CHECK(r.analytic_norm > 0.0);
  CHECK(r.relative_error < 1e-6);

  std::uniform_real_distribution<double> u(0.1, 0.9);
  Matrix pm(16, 1), gm(16, 1);
  for (Eigen::Index i = 0; i < 16; ++i) {
    pm(i, 0) = u(rng);
    gm(i, 0) = i % 3 == 0 ? 1.0 : 0.0;
  }
  Var pred(pm, true);
  const Var gt(gm);
  const auto e = grad_check([&] { return losses::edge_loss(pred, gt, 4, 4); }, {pred});
  CHECK(e.analytic_norm > 0.0);
  CHECK(e.relative_error < 1e-6);
}
