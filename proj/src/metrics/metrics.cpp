// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#include "metrics/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "core/error.hpp"

namespace matsod::metrics {

namespace {

void check_pair(const ad::Matrix& pred, const ad::Matrix& gt, const char* op) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
    fail(ErrorKind::kShape, std::string(op) + ": prediction is " + std::to_string(pred.rows()) + "x" +
                                std::to_string(pred.cols()) + ", ground truth is " + std::to_string(gt.rows()) + "x" +
                                std::to_string(gt.cols()));
  }
}

ReportRow summarise(const std::string& label, const std::vector<const SampleScore*>& scores) {
  ReportRow row;
  row.subset = label;
  row.count = static_cast<int>(scores.size());
  for (const auto* s : scores) {
    row.mae += s->mae;
    row.fbeta += s->fbeta;
  }
  row.mae /= row.count;
  row.fbeta /= row.count;
  return row;
}

}  // namespace

FbetaPolicy parse_fbeta_policy(const std::string& text) {
  if (text == "sweep") return FbetaPolicy::kSweep;
  if (text == "adaptive") return FbetaPolicy::kAdaptive;
  fail(ErrorKind::kInvalidArgument, "unknown F-beta policy '" + text + "' (expected sweep or adaptive)");
}

std::string to_string(FbetaPolicy p) { return p == FbetaPolicy::kSweep ? "sweep" : "adaptive"; }

double mae(const ad::Matrix& pred, const ad::Matrix& gt) {
  check_pair(pred, gt, "mae");
  return (pred - gt).cwiseAbs().mean();
}

double f_at_threshold(const ad::Matrix& pred, const ad::Matrix& gt, double threshold, double omega_sq) {
  check_pair(pred, gt, "f_beta");
  double tp = 0, predicted = 0, positives = 0;
  const double* p = pred.data();
  const double* g = gt.data();
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const bool on = p[i] >= threshold;
    const bool truth = g[i] > 0.5;
    predicted += on;
    positives += truth;
    tp += on && truth;
  }
  const double precision = predicted > 0 ? tp / predicted : 0.0;
  const double recall = positives > 0 ? tp / positives : 0.0;
  const double denom = omega_sq * precision + recall;
  return denom > 0 ? (1.0 + omega_sq) * precision * recall / denom : 0.0;
}

double f_beta(const ad::Matrix& pred, const ad::Matrix& gt, double omega_sq, FbetaPolicy policy) {
  check_pair(pred, gt, "f_beta");
  if ((gt.array() > 0.5).count() == 0) fail(ErrorKind::kInvalidArgument, "f_beta: ground truth has no positive pixel");
  if (policy == FbetaPolicy::kAdaptive) {
    return f_at_threshold(pred, gt, std::min(2.0 * pred.mean(), 1.0), omega_sq);
  }
  // Histogram of threshold bins: pixel with value v is >= t_k = k/256 for
  // k <= floor(256 v). Cumulative counts give every threshold in one pass.
  std::vector<double> all(kThresholds + 2, 0.0), hits(kThresholds + 2, 0.0);
  double positives = 0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double v = pred.data()[i];
    int k = 0;
    for (int step = 128; step > 0; step /= 2) {
      if (k + step <= kThresholds && v >= static_cast<double>(k + step) / 256.0) k += step;
    }
    const bool truth = gt.data()[i] > 0.5;
    all[k] += 1;
    if (truth) hits[k] += 1;
    positives += truth;
  }
  double total = 0.0, predicted = 0.0, tp = 0.0;
  for (int k = kThresholds; k >= 1; --k) {
    predicted += all[k];
    tp += hits[k];
    const double precision = predicted > 0 ? tp / predicted : 0.0;
    const double recall = tp / positives;
    const double denom = omega_sq * precision + recall;
    total += denom > 0 ? (1.0 + omega_sq) * precision * recall / denom : 0.0;
  }
  return total / kThresholds;
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-10s %6s %8s %8s\n", "subset", "n", "MAE", "F_beta");
  out << line;
  auto emit = [&](const ReportRow& r) {
    std::snprintf(line, sizeof line, "%-10s %6d %8.4f %8.4f\n", r.subset.c_str(), r.count, r.mae, r.fbeta);
    out << line;
  };
  for (const auto& r : rows) emit(r);
  if (joint) emit(*joint);
  return out.str();
}

std::string EvalReport::to_records() const {
  std::ostringstream out;
  out << "subset\tn\tmae\tfbeta\n";
  auto emit = [&](const ReportRow& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s\t%d\t%.10f\t%.10f\n", r.subset.c_str(), r.count, r.mae, r.fbeta);
    out << buf;
  };
  for (const auto& r : rows) emit(r);
  if (joint) emit(*joint);
  return out.str();
}

EvalMode parse_eval_mode(const std::string& text) {
  if (text == "sole") return EvalMode::kSole;
  if (text == "joint") return EvalMode::kJoint;
  fail(ErrorKind::kInvalidArgument, "unknown mode '" + text + "' (expected sole or joint)");
}

std::vector<SampleScore> score_samples(const std::vector<LabelledSample>& data, const Predictor& predict,
                                       FbetaPolicy policy) {
  std::vector<SampleScore> scores;
  scores.reserve(data.size());
  for (const auto& item : data) {
    const ad::Matrix gt = image_to_matrix(item.sample.ground_truth);
    const ad::Matrix pred = predict(item.sample);
    scores.push_back({item.combo, mae(pred, gt), f_beta(pred, gt, kOmegaSq, policy)});
  }
  return scores;
}

EvalReport build_report(const std::vector<SampleScore>& scores, EvalMode mode, const std::vector<std::string>& subsets) {
  EvalReport report;
  if (mode == EvalMode::kJoint) {
    if (scores.empty()) fail(ErrorKind::kInvalidArgument, "evaluate: no samples");
    std::vector<const SampleScore*> all;
    for (const auto& s : scores) all.push_back(&s);
    report.joint = summarise("joint", all);
    return report;
  }
  std::map<std::string, std::vector<const SampleScore*>> by_combo;
  for (const auto& s : scores) by_combo[s.combo].push_back(&s);
  std::vector<std::string> order;
  if (subsets.empty()) {
    for (const auto& c : standard_combos()) {
      if (by_combo.count(c)) order.push_back(c);
    }
    for (const auto& [c, _] : by_combo) {
      if (std::find(order.begin(), order.end(), c) == order.end()) order.push_back(c);
    }
    if (order.empty()) fail(ErrorKind::kInvalidArgument, "evaluate: no samples");
  } else {
    for (const auto& c : standard_combos()) {
      if (std::find(subsets.begin(), subsets.end(), c) != subsets.end()) order.push_back(c);
    }
    for (const auto& c : subsets) {
      if (std::find(order.begin(), order.end(), c) == order.end()) order.push_back(c);
    }
  }
  for (const auto& c : order) {
    auto it = by_combo.find(c);
    if (it == by_combo.end()) fail(ErrorKind::kInvalidArgument, "evaluate: subset " + c + " has no samples");
    report.rows.push_back(summarise(c, it->second));
  }
  return report;
}

EvalReport evaluate(const std::vector<LabelledSample>& data, const Predictor& predict, EvalMode mode,
                    const std::vector<std::string>& subsets, FbetaPolicy policy) {
  if (mode == EvalMode::kSole && !subsets.empty()) {
    std::vector<LabelledSample> picked;
    for (const auto& item : data) {
      if (std::find(subsets.begin(), subsets.end(), item.combo) != subsets.end()) picked.push_back(item);
    }
    return build_report(score_samples(picked, predict, policy), mode, subsets);
  }
  return build_report(score_samples(data, predict, policy), mode, subsets);
}

}  // namespace matsod::metrics
