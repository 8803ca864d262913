// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0
//
// Training objectives. All maps are (h*w) x 1 column matrices.

#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "autodiff/tensor.hpp"
#include "core/types.hpp"

namespace matsod::losses {

inline constexpr double kCeEpsilon = 1e-7;
inline constexpr double kSobelEpsilon = 1e-12;
// Upper clamp on the MTC exponent; an overflow guard only.
inline constexpr double kMtcExponentCap = 30.0;

// Mean binary cross-entropy (negated log-likelihood), predictions clamped to
// [eps, 1 - eps].
ad::Var cross_entropy_loss(const ad::Var& pred, const ad::Var& gt, double eps = kCeEpsilon);

// Sobel gradient magnitude sqrt(gx^2 + gy^2 + eps^2) of a single-channel map.
ad::Var sobel_magnitude(const ad::Var& map, int height, int width, double eps = kSobelEpsilon);

// MSE between Sobel magnitudes of pred and gt.
ad::Var edge_loss(const ad::Var& pred, const ad::Var& gt, int height, int width, double eps = kSobelEpsilon);

// Sum over the four maps of CE + edge, each against the full-resolution gt.
ad::Var saliency_loss(const SaliencyPrediction& prediction, const ad::Var& gt);

enum class Distance {
  kEuclideanMean,  // mean squared difference
  kEuclideanSum,   // summed squared difference
};

Distance parse_distance(const std::string& text);
std::string to_string(Distance d);

ad::Var feature_distance(const ad::Var& a, const ad::Var& b, Distance d);

// Pyramids from one registered pair (M1, M2) under both prompt assignments.
struct MtcBatch {
  FeaturePyramid own_first;     // X_M1 with P_M1
  FeaturePyramid own_second;    // X_M2 with P_M2
  FeaturePyramid swapped_first;   // X_M1 with P_M2
  FeaturePyramid swapped_second;  // X_M2 with P_M1
};

// Sum over levels of exp(d_same - d_diff), where d_same pairs features that
// share a prompt and d_diff pairs features with different prompts.
ad::Var mtc_loss(const MtcBatch& batch, Distance distance = Distance::kEuclideanMean);

// Features keyed by (image modality, prompt modality). Averages mtc_loss over
// every unordered pair of the listed modalities.
using PromptedPyramids = std::map<std::pair<ModalityKind, ModalityKind>, FeaturePyramid>;
ad::Var mtc_loss_all_pairs(const PromptedPyramids& features, const std::vector<ModalityKind>& modalities,
                           Distance distance = Distance::kEuclideanMean);

// saliency + mtc; throws if either is non-finite.
ad::Var total_loss(const ad::Var& saliency, const ad::Var& mtc);

}  // namespace matsod::losses
