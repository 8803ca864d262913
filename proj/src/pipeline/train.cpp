// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#include "pipeline/train.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "autodiff/ops.hpp"
#include "core/error.hpp"

namespace matsod::pipeline {

using ad::Var;

namespace {

bool is_prompt(const std::string& name) { return name.rfind("prompts.", 0) == 0; }

Image flip_horizontal(const Image& img) {
  Image out = img;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
    }
  }
  return out;
}

MultimodalSample flipped(const MultimodalSample& s) {
  MultimodalSample out;
  out.id = s.id;
  for (const auto& [k, img] : s.images) out.images[k] = flip_horizontal(img);
  out.ground_truth = flip_horizontal(s.ground_truth);
  return out;
}

std::uint64_t draw(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

}  // namespace

void TrainConfig::validate() const {
  auto positive = [](bool ok, const char* key) {
    if (!ok) fail(ErrorKind::kInvalidArgument, std::string(key) + " must be positive");
  };
  positive(learning_rate > 0.0, "train.learning_rate");
  positive(weight_decay >= 0.0, "train.weight_decay");
  if (momentum < 0.0 || momentum >= 1.0) fail(ErrorKind::kInvalidArgument, "train.momentum must be in [0, 1)");
  positive(phase1_epochs >= 0, "train.phase1_epochs");
  positive(phase2_epochs >= 0, "train.phase2_epochs");
  positive(batch_size > 0, "train.batch_size");
}

KeyValues TrainConfig::to_key_values() const {
  KeyValues out;
  out["train.learning_rate"] = kv::from_double(learning_rate);
  out["train.weight_decay"] = kv::from_double(weight_decay);
  out["train.momentum"] = kv::from_double(momentum);
  out["train.phase1_epochs"] = std::to_string(phase1_epochs);
  out["train.phase2_epochs"] = std::to_string(phase2_epochs);
  out["train.batch_size"] = std::to_string(batch_size);
  out["train.seed"] = std::to_string(seed);
  out["train.mtc"] = use_mtc ? "true" : "false";
  out["train.distance"] = losses::to_string(distance);
  out["train.mtc_pairs"] = mtc_pairs == MtcPairs::kRandom ? "random" : "all";
  out["train.hflip"] = hflip ? "true" : "false";
  out["train.decay_prompts"] = decay_prompts ? "true" : "false";
  return out;
}

TrainConfig TrainConfig::from_key_values(const KeyValues& kvs) { return from_key_values(kvs, TrainConfig{}); }

TrainConfig TrainConfig::from_key_values(const KeyValues& kvs, TrainConfig cfg) {
  for (const auto& [key, value] : kvs) {
    if (key.rfind("train.", 0) != 0) continue;
    if (key == "train.learning_rate") cfg.learning_rate = kv::to_double(key, value);
    else if (key == "train.weight_decay") cfg.weight_decay = kv::to_double(key, value);
    else if (key == "train.momentum") cfg.momentum = kv::to_double(key, value);
    else if (key == "train.phase1_epochs") cfg.phase1_epochs = kv::to_int(key, value);
    else if (key == "train.phase2_epochs") cfg.phase2_epochs = kv::to_int(key, value);
    else if (key == "train.batch_size") cfg.batch_size = kv::to_int(key, value);
    else if (key == "train.seed") cfg.seed = kv::to_u64(key, value);
    else if (key == "train.mtc") cfg.use_mtc = kv::to_bool(key, value);
    else if (key == "train.distance") cfg.distance = losses::parse_distance(value);
    else if (key == "train.mtc_pairs") {
      if (value == "random") cfg.mtc_pairs = MtcPairs::kRandom;
      else if (value == "all") cfg.mtc_pairs = MtcPairs::kAll;
      else fail(ErrorKind::kInvalidArgument, "train.mtc_pairs must be random or all, got '" + value + "'");
    } else if (key == "train.hflip") cfg.hflip = kv::to_bool(key, value);
    else if (key == "train.decay_prompts") cfg.decay_prompts = kv::to_bool(key, value);
    else fail(ErrorKind::kInvalidArgument, "unknown config key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

void Sgd::step(const std::vector<ad::NamedParam>& params, const std::function<bool(const std::string&)>& decay) {
  if (buffers_.size() != params.size()) buffers_.assign(params.size(), ad::Matrix());
  for (std::size_t i = 0; i < params.size(); ++i) {
    Var var = params[i].var;
    if (!var.requires_grad() || var.grad().size() == 0) continue;
    ad::Matrix g = var.grad();
    if (weight_decay_ > 0.0 && decay(params[i].name)) g += weight_decay_ * var.value();
    ad::Matrix& buf = buffers_[i];
    if (buf.size() == 0) {
      buf = g;
    } else {
      buf = momentum_ * buf + g;
    }
    var.mutable_value() -= lr_ * (g + momentum_ * buf);
  }
}

Var sample_loss(const Model& model, const MultimodalSample& prepared, const TrainConfig& cfg, std::uint64_t pair_draw) {
  const auto pyramids = model.extract(prepared);
  const SaliencyPrediction pred = model.decoder().decode(model.fusion().fuse(pyramids));
  const Var gt(image_to_matrix(prepared.ground_truth));
  const Var sal = losses::saliency_loss(pred, gt);

  std::vector<ModalityKind> present;
  for (const auto& [k, _] : prepared.images) present.push_back(k);
  if (!cfg.use_mtc || model.prompts().empty() || present.size() < 2) return losses::total_loss(sal, Var(ad::Matrix::Zero(1, 1)));

  const auto& bb = model.backbone();
  auto swapped = [&](const ModalityKind& image, const ModalityKind& prompt) {
    return mafe::extract_features(bb, prepared.images.at(image), &model.prompts().at(prompt));
  };
  Var mtc;
  if (cfg.mtc_pairs == MtcPairs::kRandom) {
    // Unordered pair index -> (i, j), i < j.
    const std::size_t n = present.size();
    std::size_t idx = pair_draw % (n * (n - 1) / 2);
    std::size_t i = 0;
    while (idx >= n - 1 - i) {
      idx -= n - 1 - i;
      ++i;
    }
    const std::size_t j = i + 1 + idx;
    const auto& a = present[i];
    const auto& b = present[j];
    mtc = losses::mtc_loss({pyramids.at(a), pyramids.at(b), swapped(a, b), swapped(b, a)}, cfg.distance);
  } else {
    losses::PromptedPyramids feats;
    for (const auto& a : present) {
      for (const auto& b : present) feats[{a, b}] = a == b ? pyramids.at(a) : swapped(a, b);
    }
    mtc = losses::mtc_loss_all_pairs(feats, present, cfg.distance);
  }
  return losses::total_loss(sal, mtc);
}

TrainResult train(Model& model, const std::vector<metrics::LabelledSample>& data, const TrainConfig& cfg,
                  const ProgressFn& progress) {
  cfg.validate();
  if (data.empty()) fail(ErrorKind::kInvalidArgument, "train: empty dataset");
  TrainResult result;

  std::vector<MultimodalSample> prepared;
  prepared.reserve(data.size());
  bool any_multimodal = false;
  for (const auto& item : data) {
    prepared.push_back(model.prepare(item.sample));
    any_multimodal = any_multimodal || item.sample.images.size() >= 2;
  }
  TrainConfig run = cfg;
  if (run.use_mtc && !any_multimodal) {
    result.warnings.push_back("MTC enabled but no sample has two or more modalities; MTC term skipped");
    run.use_mtc = false;
  }
  if (run.use_mtc && model.prompts().empty()) {
    result.warnings.push_back("MTC needs modality prompts; MTC term skipped");
    run.use_mtc = false;
  }
  int phase2_epochs = run.phase2_epochs;
  if (phase2_epochs > 0 && model.prompts().empty()) {
    result.warnings.push_back("prompts disabled; prompt-only phase skipped");
    phase2_epochs = 0;
  }

  std::mt19937_64 rng(run.seed);
  const auto& params = model.params().entries();
  const std::size_t n = prepared.size();
  const std::size_t batch = static_cast<std::size_t>(run.batch_size);
  std::vector<std::size_t> order(n);
  std::vector<bool> saved_flags;
  for (const auto& p : params) saved_flags.push_back(p.var.requires_grad());

  Sgd phase1_opt(run.learning_rate, run.momentum, run.weight_decay);
  Sgd phase2_opt(run.learning_rate, run.momentum, run.weight_decay);
  int step = 0;
  const int total_epochs = run.phase1_epochs + phase2_epochs;

  for (int epoch = 0; epoch < total_epochs; ++epoch) {
    const int phase = epoch < run.phase1_epochs ? 1 : 2;
    if (phase == 2 && epoch == run.phase1_epochs) {
      for (const auto& p : params) {
        Var v = p.var;
        v.set_requires_grad(is_prompt(p.name));
      }
    }
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[draw(rng, i)]);

    double epoch_total = 0.0;
    int epoch_steps = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      model.params().zero_grad();
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const bool flip = run.hflip && (rng() & 1);
        const std::uint64_t pair_draw = rng();
        const MultimodalSample& s = prepared[order[k]];
        const Var loss = flip ? sample_loss(model, flipped(s), run, pair_draw) : sample_loss(model, s, run, pair_draw);
        batch_loss += loss.item();
        ad::backward(ad::scale(loss, 1.0 / static_cast<double>(end - start)));
      }
      batch_loss /= static_cast<double>(end - start);
      if (phase == 1) {
        phase1_opt.step(params, [](const std::string&) { return true; });
      } else {
        const bool decay_prompts = run.decay_prompts;
        phase2_opt.step(params, [decay_prompts](const std::string&) { return decay_prompts; });
      }
      ++step;
      result.history.push_back(batch_loss);
      epoch_total += batch_loss;
      ++epoch_steps;
      if (progress) progress({epoch + 1, phase, step, batch_loss});
    }
    result.epoch_means.push_back(epoch_total / epoch_steps);
    if (phase == 1) result.phase1_steps = step;
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Var v = params[i].var;
    v.set_requires_grad(saved_flags[i]);
  }
  model.params().zero_grad();
  return result;
}

std::string format_history(const std::vector<double>& history) {
  std::ostringstream out;
  out << "step\tloss\n";
  char buf[64];
  for (std::size_t i = 0; i < history.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\n", i + 1, history[i]);
    out << buf;
  }
  return out.str();
}

metrics::Predictor make_predictor(const Model& model) {
  return [&model](const MultimodalSample& s) { return model.predict(s); };
}

}  // namespace matsod::pipeline
