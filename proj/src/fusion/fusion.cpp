// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#include "fusion/fusion.hpp"

#include <cmath>

#include "core/error.hpp"

namespace matsod::fusion {

using ad::Var;

namespace {

void check_features(const std::vector<Var>& features, const char* op) {
  if (features.empty()) fail(ErrorKind::kInvalidArgument, std::string(op) + ": empty feature list");
  for (std::size_t i = 1; i < features.size(); ++i) {
    if (features[i].rows() != features[0].rows() || features[i].cols() != features[0].cols()) {
      fail(ErrorKind::kShape, std::string(op) + ": modality " + std::to_string(i) + " has shape " +
                                  std::to_string(features[i].rows()) + "x" + std::to_string(features[i].cols()) +
                                  ", expected " + std::to_string(features[0].rows()) + "x" +
                                  std::to_string(features[0].cols()));
    }
  }
}

// Softmax(Q K^T * scale) per group and head, stacked row-wise.
ad::Matrix attention_weights(const ad::Matrix& q, const ad::Matrix& k, Eigen::Index groups, int heads,
                             double scale) {
  const Eigen::Index tq = q.rows() / groups;
  const Eigen::Index tk = k.rows() / groups;
  const Eigen::Index d = q.cols() / heads;
  ad::Matrix out(groups * heads * tq, tk);
  for (Eigen::Index g = 0; g < groups; ++g) {
    for (int h = 0; h < heads; ++h) {
      ad::Matrix s = scale * q.block(g * tq, h * d, tq, d) * k.block(g * tk, h * d, tk, d).transpose();
      for (Eigen::Index r = 0; r < s.rows(); ++r) {
        auto row = s.row(r);
        row = (row.array() - row.maxCoeff()).exp();
        row /= row.sum();
      }
      out.middleRows((g * heads + h) * tq, tq) = s;
    }
  }
  return out;
}

Var fuse_tokens(const Var& embedding, const FusionParams& params, Eigen::Index groups, int modality_count,
                FusionTrace* trace) {
  const Var q = params.query(embedding);
  const Var k = params.key(embedding);
  const Var v = params.value(embedding);
  const double scale = 1.0 / std::sqrt(static_cast<double>(embedding.cols() / params.heads));
  if (trace) trace->weights = attention_weights(q.value(), k.value(), groups, params.heads, scale);
  const Var interacted = ad::attention(q, k, v, groups, params.heads, scale);
  return ad::group_mean_rows(interacted, modality_count);
}

}  // namespace

Var embed_modalities_spatial(const std::vector<Var>& features) {
  check_features(features, "embed_modalities_spatial");
  return ad::interleave_rows(features);
}

Var embed_modalities_channel(const std::vector<Var>& features) {
  check_features(features, "embed_modalities_channel");
  std::vector<Var> transposed;
  transposed.reserve(features.size());
  for (const auto& f : features) transposed.push_back(ad::transpose(f));
  return ad::interleave_rows(transposed);
}

Var unembed_spatial(const Var& embedding, int modality_count, int slot) {
  return ad::deinterleave_rows(embedding, modality_count, slot);
}

Var unembed_channel(const Var& embedding, int modality_count, int slot) {
  return ad::transpose(ad::deinterleave_rows(embedding, modality_count, slot));
}

FusionParams make_fusion_params(ad::ParamStore& store, const std::string& name, int token_width, int channels,
                                int ffn_expansion, int heads) {
  if (token_width % heads != 0) {
    fail(ErrorKind::kInvalidArgument, name + ": token width " + std::to_string(token_width) +
                                          " not divisible by " + std::to_string(heads) + " heads");
  }
  FusionParams p;
  p.query = ad::make_linear(store, name + ".query", token_width, token_width);
  p.key = ad::make_linear(store, name + ".key", token_width, token_width);
  p.value = ad::make_linear(store, name + ".value", token_width, token_width);
  p.ffn_in = ad::make_linear(store, name + ".ffn_in", channels, channels * ffn_expansion);
  p.ffn_out = ad::make_linear(store, name + ".ffn_out", channels * ffn_expansion, channels);
  p.heads = heads;
  return p;
}

Var feed_forward(const FusionParams& params, const Var& x) { return params.ffn_out(ad::gelu(params.ffn_in(x))); }

Var sdfm_fuse(const std::vector<Var>& features, const FusionParams& params, FusionTrace* trace) {
  check_features(features, "sdfm_fuse");
  if (features.size() == 1) {
    const Var& f = features.front();
    return ad::add(feed_forward(params, f), params.value(f));
  }
  const int n = static_cast<int>(features.size());
  const Var embedding = embed_modalities_spatial(features);
  const Var preliminary = fuse_tokens(embedding, params, features.front().rows(), n, trace);
  return ad::add(feed_forward(params, ad::mean_n(features)), preliminary);
}

Var cdfm_fuse(const std::vector<Var>& features, const FusionParams& params, FusionTrace* trace) {
  check_features(features, "cdfm_fuse");
  if (features.size() == 1) {
    const Var& f = features.front();
    return ad::add(feed_forward(params, f), ad::transpose(params.value(ad::transpose(f))));
  }
  const int n = static_cast<int>(features.size());
  const Var embedding = embed_modalities_channel(features);
  const Var preliminary = fuse_tokens(embedding, params, features.front().cols(), n, trace);
  return ad::add(feed_forward(params, ad::mean_n(features)), ad::transpose(preliminary));
}

Var additive_fuse(const std::vector<Var>& features) {
  check_features(features, "additive_fuse");
  return ad::add_n(features);
}

Csfh::Csfh(const ModelConfig& cfg, ad::ParamStore& store) : mode_(cfg.fusion), plan_(cfg.fusion_plan) {
  if (mode_ != FusionMode::kCsfh) return;
  const auto shapes = cfg.level_shapes();
  for (int l = 0; l < kLevels; ++l) {
    const auto& s = shapes[l];
    const bool spatial = plan_.levels[l] == FusionKind::kSdfm;
    const std::string name = "fusion.level" + std::to_string(l + 1) + (spatial ? ".sdfm" : ".cdfm");
    const int token_width = spatial ? s.channels : s.height * s.width;
    params_.push_back(
        make_fusion_params(store, name, token_width, s.channels, cfg.fusion_ffn_expansion, cfg.fusion_heads));
  }
}

std::array<Var, kLevels> Csfh::fuse(const std::map<ModalityKind, FeaturePyramid>& pyramids) const {
  if (pyramids.empty()) fail(ErrorKind::kInvalidArgument, "csfh_fuse: no pyramids");
  const auto& ref = pyramids.begin()->second.shapes;
  for (const auto& [kind, pyr] : pyramids) {
    if (pyr.shapes != ref) fail(ErrorKind::kShape, "csfh_fuse: pyramid for " + kind.tag + " differs in shape");
  }
  std::array<Var, kLevels> out;
  for (int l = 0; l < kLevels; ++l) {
    std::vector<Var> feats;
    for (const auto& [kind, pyr] : pyramids) feats.push_back(pyr.levels[l]);
    if (mode_ == FusionMode::kAdd) {
      out[l] = additive_fuse(feats);
    } else if (plan_.levels[l] == FusionKind::kSdfm) {
      out[l] = sdfm_fuse(feats, params_[l]);
    } else {
      out[l] = cdfm_fuse(feats, params_[l]);
    }
  }
  return out;
}

}  // namespace matsod::fusion
