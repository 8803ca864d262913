// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0
//
// Variable-arity cross-modal fusion. Both dynamic modules treat the modality
// set as an attention sequence:
//   SDFM - one sequence of N_M tokens (width C) per spatial position;
//   CDFM - one sequence of N_M tokens (width H*W) per channel.
// Projections are shared across modalities and the interacted tokens are
// averaged over the modality axis, so outputs do not depend on input order.

#pragma once

#include <array>
#include <map>
#include <vector>

#include "autodiff/nn.hpp"
#include "core/config.hpp"
#include "core/types.hpp"

namespace matsod::fusion {

// (h*w*N_M) x C; row p*N_M + n holds modality n at position p.
ad::Var embed_modalities_spatial(const std::vector<ad::Var>& features);
// (C*N_M) x (h*w); row c*N_M + n holds channel c of modality n.
ad::Var embed_modalities_channel(const std::vector<ad::Var>& features);
// Inverses, one modality at a time.
ad::Var unembed_spatial(const ad::Var& embedding, int modality_count, int slot);
ad::Var unembed_channel(const ad::Var& embedding, int modality_count, int slot);

struct FusionParams {
  ad::Linear query, key, value;  // token width -> token width
  ad::Linear ffn_in, ffn_out;    // channel-wise FFN on the map
  int heads = 1;
};

// Token width is C for SDFM and h*w for CDFM.
FusionParams make_fusion_params(ad::ParamStore& store, const std::string& name, int token_width, int channels,
                                int ffn_expansion, int heads);

ad::Var feed_forward(const FusionParams& params, const ad::Var& x);

// Optional per-call diagnostics (attention weights, one row per query).
struct FusionTrace {
  ad::Matrix weights;
};

ad::Var sdfm_fuse(const std::vector<ad::Var>& features, const FusionParams& params, FusionTrace* trace = nullptr);
ad::Var cdfm_fuse(const std::vector<ad::Var>& features, const FusionParams& params, FusionTrace* trace = nullptr);
// Element-wise sum (the no-fusion-module ablation).
ad::Var additive_fuse(const std::vector<ad::Var>& features);

class Csfh {
 public:
  Csfh(const ModelConfig& cfg, ad::ParamStore& store);

  std::array<ad::Var, kLevels> fuse(const std::map<ModalityKind, FeaturePyramid>& pyramids) const;

  FusionMode mode() const { return mode_; }
  const FusionPlan& plan() const { return plan_; }
  const FusionParams& level_params(int level) const { return params_.at(static_cast<std::size_t>(level)); }

 private:
  FusionMode mode_;
  FusionPlan plan_;
  std::vector<FusionParams> params_;
};

}  // namespace matsod::fusion
