// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0
//
// Saliency metrics and the sole / joint evaluation protocol.

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "autodiff/tensor.hpp"
#include "core/types.hpp"

namespace matsod::metrics {

inline constexpr double kOmegaSq = 0.3;
inline constexpr int kThresholds = 255;

enum class FbetaPolicy {
  kSweep,     // mean over thresholds k/256, k = 1..255
  kAdaptive,  // single threshold min(2 * mean(pred), 1)
};

FbetaPolicy parse_fbeta_policy(const std::string& text);
std::string to_string(FbetaPolicy p);

// pred and gt are equally sized maps; gt is binary.
double mae(const ad::Matrix& pred, const ad::Matrix& gt);

// F-measure of pred >= threshold against gt, 0/0 counted as 0.
double f_at_threshold(const ad::Matrix& pred, const ad::Matrix& gt, double threshold, double omega_sq = kOmegaSq);

// Throws if gt has no positive pixel.
double f_beta(const ad::Matrix& pred, const ad::Matrix& gt, double omega_sq = kOmegaSq,
              FbetaPolicy policy = FbetaPolicy::kSweep);

struct SampleScore {
  std::string combo;
  double mae = 0.0;
  double fbeta = 0.0;
};

struct ReportRow {
  std::string subset;
  int count = 0;
  double mae = 0.0;
  double fbeta = 0.0;
};

struct EvalReport {
  std::vector<ReportRow> rows;
  std::optional<ReportRow> joint;

  std::string to_table() const;
  // One line per row: subset<TAB>n<TAB>mae<TAB>fbeta, preceded by a header.
  std::string to_records() const;
};

enum class EvalMode { kSole, kJoint };
EvalMode parse_eval_mode(const std::string& text);

struct LabelledSample {
  std::string combo;
  MultimodalSample sample;
};

// Returns S1 at ground-truth resolution, (h*w) x 1.
using Predictor = std::function<ad::Matrix(const MultimodalSample&)>;

std::vector<SampleScore> score_samples(const std::vector<LabelledSample>& data, const Predictor& predict,
                                       FbetaPolicy policy = FbetaPolicy::kSweep);

// Sole mode keeps the standard subset order; requested subsets must be
// non-empty in the data. Joint mode pools every sample.
EvalReport build_report(const std::vector<SampleScore>& scores, EvalMode mode,
                        const std::vector<std::string>& subsets = {});

EvalReport evaluate(const std::vector<LabelledSample>& data, const Predictor& predict, EvalMode mode,
                    const std::vector<std::string>& subsets = {}, FbetaPolicy policy = FbetaPolicy::kSweep);

}  // namespace matsod::metrics
