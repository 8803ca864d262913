// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#include "losses/losses.hpp"

#include <cmath>
#include <limits>

#include "autodiff/ops.hpp"
#include "core/error.hpp"

namespace matsod::losses {

using ad::Var;

namespace {

void check_same(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorKind::kShape, std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
  }
}

void check_batch(const MtcBatch& b) {
  if (b.own_first.shapes != b.own_second.shapes || b.own_first.shapes != b.swapped_first.shapes ||
      b.own_first.shapes != b.swapped_second.shapes) {
    fail(ErrorKind::kShape, "mtc_loss: pyramids are not shape-identical");
  }
}

}  // namespace

Var cross_entropy_loss(const Var& pred, const Var& gt, double eps) {
  check_same(pred, gt, "cross_entropy_loss");
  const Var p = ad::clamp(pred, eps, 1.0 - eps);
  const Var one_minus_gt = ad::add_scalar(ad::scale(gt, -1.0), 1.0);
  const Var log_p = ad::log(p);
  const Var log_q = ad::log(ad::add_scalar(ad::scale(p, -1.0), 1.0));
  const Var likelihood = ad::add(ad::mul(gt, log_p), ad::mul(one_minus_gt, log_q));
  return ad::scale(ad::mean(likelihood), -1.0);
}

Var sobel_magnitude(const Var& map, int height, int width, double eps) {
  const Var gx = ad::sobel(map, height, width, 0);
  const Var gy = ad::sobel(map, height, width, 1);
  return ad::sqrt(ad::add_scalar(ad::add(ad::square(gx), ad::square(gy)), eps * eps));
}

Var edge_loss(const Var& pred, const Var& gt, int height, int width, double eps) {
  check_same(pred, gt, "edge_loss");
  if (pred.cols() != 1 || pred.rows() != static_cast<Eigen::Index>(height) * width) {
    fail(ErrorKind::kShape, "edge_loss: expected a single-channel " + std::to_string(height) + "x" +
                                std::to_string(width) + " map");
  }
  const Var diff = ad::sub(sobel_magnitude(pred, height, width, eps), sobel_magnitude(gt, height, width, eps));
  return ad::mean(ad::square(diff));
}

Var saliency_loss(const SaliencyPrediction& prediction, const Var& gt) {
  std::vector<Var> terms;
  for (const auto& map : prediction.maps) {
    terms.push_back(cross_entropy_loss(map, gt));
    terms.push_back(edge_loss(map, gt, prediction.height, prediction.width));
  }
  return ad::add_n(terms);
}

Distance parse_distance(const std::string& text) {
  if (text == "euclidean-mean") return Distance::kEuclideanMean;
  if (text == "euclidean-sum") return Distance::kEuclideanSum;
  fail(ErrorKind::kInvalidArgument, "unknown distance '" + text + "' (expected euclidean-mean or euclidean-sum)");
}

std::string to_string(Distance d) { return d == Distance::kEuclideanMean ? "euclidean-mean" : "euclidean-sum"; }

Var feature_distance(const Var& a, const Var& b, Distance d) {
  check_same(a, b, "feature_distance");
  const Var sq = ad::square(ad::sub(a, b));
  return d == Distance::kEuclideanMean ? ad::mean(sq) : ad::sum(sq);
}

Var mtc_loss(const MtcBatch& batch, Distance distance) {
  check_batch(batch);
  std::vector<Var> terms;
  for (int l = 0; l < kLevels; ++l) {
    const Var& f1 = batch.own_first.levels[l];
    const Var& f2 = batch.own_second.levels[l];
    const Var& g1 = batch.swapped_first.levels[l];
    const Var& g2 = batch.swapped_second.levels[l];
    // f1 and g2 both carry P_M1; g1 and f2 both carry P_M2.
    const Var same = ad::add(feature_distance(f1, g2, distance), feature_distance(g1, f2, distance));
    const Var diff = ad::add(feature_distance(f1, f2, distance), feature_distance(g1, g2, distance));
    const Var exponent = ad::clamp(ad::sub(same, diff), -std::numeric_limits<double>::infinity(), kMtcExponentCap);
    terms.push_back(ad::exp(exponent));
  }
  return ad::add_n(terms);
}

Var mtc_loss_all_pairs(const PromptedPyramids& features, const std::vector<ModalityKind>& modalities,
                       Distance distance) {
  if (modalities.size() < 2) fail(ErrorKind::kInvalidArgument, "mtc_loss_all_pairs: need at least two modalities");
  auto get = [&](const ModalityKind& image, const ModalityKind& prompt) -> const FeaturePyramid& {
    auto it = features.find({image, prompt});
    if (it == features.end()) {
      fail(ErrorKind::kInvalidArgument, "mtc_loss_all_pairs: missing features for image " + image.tag +
                                            " with prompt " + prompt.tag);
    }
    return it->second;
  };
  std::vector<Var> losses;
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    for (std::size_t j = i + 1; j < modalities.size(); ++j) {
      const auto& a = modalities[i];
      const auto& b = modalities[j];
      losses.push_back(mtc_loss({get(a, a), get(b, b), get(a, b), get(b, a)}, distance));
    }
  }
  return ad::mean_n(losses);
}

Var total_loss(const Var& saliency, const Var& mtc) {
  if (!std::isfinite(saliency.item()) || !std::isfinite(mtc.item())) {
    fail(ErrorKind::kInvalidArgument, "total_loss: non-finite term (saliency " + std::to_string(saliency.item()) +
                                          ", mtc " + std::to_string(mtc.item()) + ")");
  }
  return ad::add(saliency, mtc);
}

}  // namespace matsod::losses
