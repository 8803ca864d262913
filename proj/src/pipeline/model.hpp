// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "autodiff/nn.hpp"
#include "core/config.hpp"
#include "core/types.hpp"
#include "decoder/decoder.hpp"
#include "fusion/fusion.hpp"
#include "mafe/mafe.hpp"

namespace matsod::pipeline {

// Backbone, prompt bank, fusion hybrid and decoder over one parameter store.
// Parameter names are prefixed backbone. / prompts. / fusion. / decoder.
class Model {
 public:
  explicit Model(const ModelConfig& cfg);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ad::ParamStore& params() { return store_; }
  const ad::ParamStore& params() const { return store_; }
  const mafe::Backbone& backbone() const { return backbone_; }
  const mafe::PromptBank& prompts() const { return prompts_; }
  const fusion::Csfh& fusion() const { return csfh_; }
  const decoder::Decoder& decoder() const { return decoder_; }

  // Resizes images (bilinear) and ground truth (bilinear, then > 0.5) to the
  // model's input size. Throws on an invalid sample.
  MultimodalSample prepare(const MultimodalSample& sample) const;

  // Expects a prepared sample.
  std::map<ModalityKind, FeaturePyramid> extract(const MultimodalSample& prepared) const;
  SaliencyPrediction forward(const MultimodalSample& prepared) const;

  // Gradient-free S1 (or auxiliary level) at the sample's own resolution,
  // (h*w) x 1.
  ad::Matrix predict(const MultimodalSample& sample, int level = 0) const;

 private:
  ModelConfig cfg_;
  ad::ParamStore store_;
  mafe::Backbone backbone_;
  mafe::PromptBank prompts_;
  fusion::Csfh csfh_;
  decoder::Decoder decoder_;
};

struct ParameterCounts {
  std::size_t backbone = 0;
  std::size_t prompts = 0;
  std::size_t fusion = 0;
  std::size_t decoder = 0;
  std::size_t total = 0;
};

ParameterCounts count_parameters(const Model& model);
std::vector<std::string> parameter_names(const Model& model);

struct ArityCost {
  int modalities = 0;
  std::uint64_t macs = 0;
  double milliseconds = 0.0;
};

// Forward cost of the first 1..N modalities of `sample`, in that order.
std::vector<ArityCost> measure_arity_cost(const Model& model, const MultimodalSample& sample, int repeats = 3);
std::string format_arity_report(const std::vector<ArityCost>& costs);

}  // namespace matsod::pipeline
