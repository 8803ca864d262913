// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0
//
// Modality-adaptive feature extractor: a four-stage spatial-reduction
// attention pyramid whose token stream carries the input modality's prompt
// tokens alongside the spatial tokens.
//
// Prompt lane, per attention block:
//   * spatial queries attend to the reduced spatial keys, plus a separately
//     normalised read-out over the prompt keys (zero prompts contribute
//     exactly nothing);
//   * prompt queries attend jointly to reduced spatial keys and prompt keys;
//   * prompts skip spatial reduction, the depthwise convolution and patch
//     merging, and are carried to the next stage's width by a linear map.

#pragma once

#include <map>
#include <optional>
#include <vector>

#include "autodiff/nn.hpp"
#include "core/config.hpp"
#include "core/types.hpp"

namespace matsod::mafe {

struct ModalityPrompt {
  ModalityKind modality;
  ad::Var tokens;  // prompt_tokens x widths[0]
};

class PromptBank {
 public:
  PromptBank() = default;
  // Registers one "prompts.<tag>" tensor per modality, N(0, stddev^2) entries.
  PromptBank(const ModelConfig& cfg, ad::ParamStore& store, double stddev = 0.1);

  // Throws Error(kInvalidArgument) listing the known tags.
  const ModalityPrompt& at(const ModalityKind& m) const;
  const std::vector<ModalityPrompt>& prompts() const { return prompts_; }
  bool empty() const { return prompts_.empty(); }

 private:
  std::vector<ModalityPrompt> prompts_;
};

struct AttentionBlock {
  ad::LayerNorm norm1;
  ad::Linear query, key, value;  // bias-free
  ad::Linear proj;
  std::optional<ad::Linear> reduce;  // sr > 1 only
  std::optional<ad::LayerNorm> reduce_norm;
  ad::LayerNorm norm2;
  ad::Linear fc1, fc2;
  ad::Var dw_kernel, dw_bias;
};

struct BackboneStage {
  ad::Linear embed;  // patch embedding (stage 1) or 2x2 patch merge
  ad::LayerNorm embed_norm;
  std::vector<AttentionBlock> blocks;
  ad::LayerNorm out_norm;
  std::optional<ad::Linear> prompt_carry;  // previous width -> this width; stages 2..4
  int side = 0;
  int width = 0;
  int heads = 1;
  int sr = 1;
};

class Backbone {
 public:
  Backbone(const ModelConfig& cfg, ad::ParamStore& store);

  // image: (h*w) x 3. Output row k is the affine image of patch k.
  ad::Var embed_patches(const ad::Var& image, int height, int width) const;

  // prompt == nullptr runs the prompt-free path on the same parameters.
  FeaturePyramid extract_features(const ad::Var& image, const ad::Var* prompt_tokens) const;

  const std::vector<BackboneStage>& stages() const { return stages_; }
  const ModelConfig& config() const { return cfg_; }

 private:
  void run_block(const BackboneStage& stage, const AttentionBlock& block, ad::Var& x, ad::Var* prompt) const;

  ModelConfig cfg_;
  std::vector<BackboneStage> stages_;
};

// Channel-unifies and validates an image for the backbone; returns (h*w) x 3.
ad::Var prepare_image(const Image& image, int input_size);

// Extracts with the prompt of the named modality.
FeaturePyramid extract_features(const Backbone& backbone, const Image& image, const ModalityPrompt* prompt);

// One pyramid per present modality, each with its own prompt. A disabled
// prompt bank (empty) runs every modality prompt-free.
std::map<ModalityKind, FeaturePyramid> extract_all(const Backbone& backbone, const MultimodalSample& sample,
                                                   const PromptBank& prompts);

}  // namespace matsod::mafe
