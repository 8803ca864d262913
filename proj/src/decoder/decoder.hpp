// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0
//
// Coarse-to-fine saliency decoder. Level 4 is decoded alone; each lower level
// concatenates its lateral projection with the 2x-upsampled decoded level
// above. Every level has a one-channel head whose logits are bilinearly
// upsampled to input resolution before the sigmoid.

#pragma once

#include <array>
#include <optional>
#include <vector>

#include "autodiff/nn.hpp"
#include "core/config.hpp"
#include "core/types.hpp"

namespace matsod::decoder {

struct DecoderStage {
  ad::Linear lateral;
  std::optional<ad::Linear> merge;  // absent on level 4
  ad::Var dw_kernel, dw_bias;
  ad::Linear head;
};

class Decoder {
 public:
  Decoder(const ModelConfig& cfg, ad::ParamStore& store);

  SaliencyPrediction decode(const std::array<ad::Var, kLevels>& fused) const;

  // Decoded features per level before the heads (for inspection).
  std::array<ad::Var, kLevels> decode_features(const std::array<ad::Var, kLevels>& fused) const;

  const std::vector<DecoderStage>& stages() const { return stages_; }

 private:
  void check_inputs(const std::array<ad::Var, kLevels>& fused) const;

  std::array<LevelShape, kLevels> shapes_;
  int output_size_;
  std::vector<DecoderStage> stages_;
};

}  // namespace matsod::decoder
