// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0
//
// Two-phase training: phase 1 updates every parameter, phase 2 only the
// modality prompts. SGD with Nesterov momentum; gradients of a batch are the
// mean of its per-sample gradients.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "losses/losses.hpp"
#include "metrics/metrics.hpp"
#include "pipeline/model.hpp"

namespace matsod::pipeline {

enum class MtcPairs {
  kRandom,  // one random registered pair per multimodal sample per step
  kAll,     // every unordered pair, averaged
};

struct TrainConfig {
  double learning_rate = 2e-3;
  double weight_decay = 5e-4;
  double momentum = 0.9;
  int phase1_epochs = 20;
  int phase2_epochs = 2;
  int batch_size = 4;
  std::uint64_t seed = 1;
  bool use_mtc = true;
  losses::Distance distance = losses::Distance::kEuclideanMean;
  MtcPairs mtc_pairs = MtcPairs::kRandom;
  bool hflip = true;
  // Phase-2 weight decay on prompts; off by default.
  bool decay_prompts = false;

  void validate() const;
  KeyValues to_key_values() const;
  // Applies every `train.*` key; unknown `train.*` keys are rejected.
  static TrainConfig from_key_values(const KeyValues& kv, TrainConfig base);
  static TrainConfig from_key_values(const KeyValues& kv);
};

struct TrainResult {
  std::vector<double> history;  // mean total loss per optimisation step
  std::vector<double> epoch_means;
  int phase1_steps = 0;
  std::vector<std::string> warnings;
};

struct TrainProgress {
  int epoch = 0;  // 1-based over both phases
  int phase = 1;
  int step = 0;   // 1-based global step
  double loss = 0.0;
};

using ProgressFn = std::function<void(const TrainProgress&)>;

// Nesterov SGD with PyTorch update semantics and per-parameter decay flags.
class Sgd {
 public:
  Sgd(double lr, double momentum, double weight_decay) : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {}
  // Applies one update to every parameter that has requires_grad set and a
  // gradient; `decay` selects which receive weight decay.
  void step(const std::vector<ad::NamedParam>& params, const std::function<bool(const std::string&)>& decay);

 private:
  double lr_, momentum_, weight_decay_;
  std::vector<ad::Matrix> buffers_;
};

// Per-sample objective (saliency + MTC), recorded for backward.
ad::Var sample_loss(const Model& model, const MultimodalSample& prepared, const TrainConfig& cfg,
                    std::uint64_t pair_draw);

TrainResult train(Model& model, const std::vector<metrics::LabelledSample>& data, const TrainConfig& cfg,
                  const ProgressFn& progress = {});

std::string format_history(const std::vector<double>& history);

// Adapts a model to the metrics predictor interface.
metrics::Predictor make_predictor(const Model& model);

}  // namespace matsod::pipeline
