// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#include "mafe/mafe.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace matsod::mafe {

using ad::Var;

PromptBank::PromptBank(const ModelConfig& cfg, ad::ParamStore& store, double stddev) {
  for (const auto& m : cfg.modalities) {
    prompts_.push_back({m, store.normal("prompts." + m.tag, cfg.prompt_tokens, cfg.prompt_width(), stddev)});
  }
}

const ModalityPrompt& PromptBank::at(const ModalityKind& m) const {
  for (const auto& p : prompts_) {
    if (p.modality == m) return p;
  }
  std::string known;
  for (const auto& p : prompts_) known += (known.empty() ? "" : ", ") + p.modality.tag;
  fail(ErrorKind::kInvalidArgument, "no prompt for modality '" + m.tag + "'; known modalities: " + known);
}

Backbone::Backbone(const ModelConfig& cfg, ad::ParamStore& store) : cfg_(cfg) {
  cfg_.validate();
  const auto shapes = cfg_.level_shapes();
  for (int l = 0; l < kLevels; ++l) {
    const std::string base = "backbone.stage" + std::to_string(l + 1);
    const int c = cfg_.widths[l];
    BackboneStage st;
    st.side = shapes[l].height;
    st.width = c;
    st.heads = cfg_.heads[l];
    st.sr = cfg_.sr_ratios[l];
    const int in = l == 0 ? cfg_.patch_size * cfg_.patch_size * 3 : 4 * cfg_.widths[l - 1];
    st.embed = ad::make_linear(store, base + ".embed", in, c);
    st.embed_norm = ad::make_layer_norm(store, base + ".embed_norm", c);
    if (l > 0 && cfg_.use_prompts) {
      st.prompt_carry = ad::make_linear(store, base + ".prompt_carry", cfg_.widths[l - 1], c);
    }
    for (int b = 0; b < cfg_.blocks[l]; ++b) {
      const std::string bn = base + ".block" + std::to_string(b);
      AttentionBlock blk;
      blk.norm1 = ad::make_layer_norm(store, bn + ".norm1", c);
      blk.query = ad::make_linear(store, bn + ".query", c, c, false);
      blk.key = ad::make_linear(store, bn + ".key", c, c, false);
      blk.value = ad::make_linear(store, bn + ".value", c, c, false);
      blk.proj = ad::make_linear(store, bn + ".proj", c, c);
      if (st.sr > 1) {
        blk.reduce = ad::make_linear(store, bn + ".reduce", st.sr * st.sr * c, c);
        blk.reduce_norm = ad::make_layer_norm(store, bn + ".reduce_norm", c);
      }
      const int hidden = c * cfg_.ffn_expansion;
      blk.norm2 = ad::make_layer_norm(store, bn + ".norm2", c);
      blk.fc1 = ad::make_linear(store, bn + ".fc1", c, hidden);
      blk.dw_kernel = store.normal(bn + ".dw.kernel", 9, hidden, 1.0 / 3.0);
      blk.dw_bias = store.zeros(bn + ".dw.bias", 1, hidden);
      blk.fc2 = ad::make_linear(store, bn + ".fc2", hidden, c);
      st.blocks.push_back(std::move(blk));
    }
    st.out_norm = ad::make_layer_norm(store, base + ".out_norm", c);
    stages_.push_back(std::move(st));
  }
}

Var Backbone::embed_patches(const Var& image, int height, int width) const {
  const int p = cfg_.patch_size;
  if (height % p != 0 || width % p != 0) {
    fail(ErrorKind::kShape, "embed_patches: image " + std::to_string(height) + "x" + std::to_string(width) +
                                " must be divisible by patch_size " + std::to_string(p));
  }
  if (image.cols() != 3 || image.rows() != static_cast<Eigen::Index>(height) * width) {
    fail(ErrorKind::kShape, "embed_patches: expected a channel-unified (h*w) x 3 image");
  }
  return stages_[0].embed(ad::space_to_depth(image, height, width, p));
}

void Backbone::run_block(const BackboneStage& st, const AttentionBlock& blk, Var& x, Var* prompt) const {
  const double scale = 1.0 / std::sqrt(static_cast<double>(st.width / st.heads));
  Var xn = blk.norm1(x);
  Var q = blk.query(xn);
  Var source = xn;
  if (blk.reduce) {
    source = (*blk.reduce_norm)((*blk.reduce)(ad::space_to_depth(xn, st.side, st.side, st.sr)));
  }
  Var ks = blk.key(source);
  Var vs = blk.value(source);

  Var attended = ad::attention(q, ks, vs, 1, st.heads, scale);
  if (prompt) {
    Var pn = ad::layer_norm(*prompt);
    Var kp = blk.key(pn);
    Var vp = blk.value(pn);
    attended = ad::add(attended, ad::attention(q, kp, vp, 1, st.heads, scale));
    Var prompt_attended = ad::attention(blk.query(pn), ad::concat_rows({ks, kp}), ad::concat_rows({vs, vp}), 1,
                                        st.heads, scale);
    *prompt = ad::add(*prompt, blk.proj(prompt_attended));
  }
  x = ad::add(x, blk.proj(attended));

  Var h = blk.fc1(blk.norm2(x));
  h = ad::gelu(ad::depthwise_conv3x3(h, st.side, st.side, blk.dw_kernel, blk.dw_bias));
  x = ad::add(x, blk.fc2(h));
  if (prompt) {
    *prompt = ad::add(*prompt, blk.fc2(ad::gelu(blk.fc1(blk.norm2(*prompt)))));
  }
}

FeaturePyramid Backbone::extract_features(const Var& image, const Var* prompt_tokens) const {
  const int side = cfg_.input_size;
  if (prompt_tokens) {
    if (!cfg_.use_prompts) fail(ErrorKind::kInvalidArgument, "backbone built without a prompt lane");
    if (prompt_tokens->rows() != cfg_.prompt_tokens || prompt_tokens->cols() != cfg_.prompt_width()) {
      fail(ErrorKind::kShape, "prompt must be " + std::to_string(cfg_.prompt_tokens) + "x" +
                                  std::to_string(cfg_.prompt_width()));
    }
  }
  FeaturePyramid out;
  Var x;
  Var prompt;
  if (prompt_tokens) prompt = *prompt_tokens;
  for (int l = 0; l < kLevels; ++l) {
    const BackboneStage& st = stages_[l];
    if (l == 0) {
      x = st.embed_norm(embed_patches(image, side, side));
    } else {
      const int prev = stages_[l - 1].side;
      x = st.embed_norm(st.embed(ad::space_to_depth(x, prev, prev, 2)));
      if (prompt.defined()) prompt = (*st.prompt_carry)(prompt);
    }
    for (const auto& blk : st.blocks) run_block(st, blk, x, prompt.defined() ? &prompt : nullptr);
    x = st.out_norm(x);
    out.levels[l] = x;
    out.shapes[l] = {st.side, st.side, st.width};
  }
  check_pyramid_chain(out.shapes);
  return out;
}

Var prepare_image(const Image& image, int input_size) {
  if (image.height != input_size || image.width != input_size) {
    fail(ErrorKind::kShape, "backbone input must be " + std::to_string(input_size) + "x" +
                                std::to_string(input_size) + ", got " + std::to_string(image.height) + "x" +
                                std::to_string(image.width));
  }
  return Var(image_to_matrix(unify_channels(image)));
}

FeaturePyramid extract_features(const Backbone& backbone, const Image& image, const ModalityPrompt* prompt) {
  const auto& known = backbone.config().modalities;
  if (prompt && std::find(known.begin(), known.end(), prompt->modality) == known.end()) {
    std::string list;
    for (const auto& m : known) list += (list.empty() ? "" : ", ") + m.tag;
    fail(ErrorKind::kInvalidArgument,
         "unknown modality '" + prompt->modality.tag + "'; known modalities: " + list);
  }
  Var input = prepare_image(image, backbone.config().input_size);
  return backbone.extract_features(input, prompt ? &prompt->tokens : nullptr);
}

std::map<ModalityKind, FeaturePyramid> extract_all(const Backbone& backbone, const MultimodalSample& sample,
                                                   const PromptBank& prompts) {
  std::map<ModalityKind, FeaturePyramid> out;
  for (const auto& [kind, image] : sample.images) {
    const ModalityPrompt* prompt = prompts.empty() ? nullptr : &prompts.at(kind);
    if (prompts.empty()) {
      const auto& known = backbone.config().modalities;
      if (std::find(known.begin(), known.end(), kind) == known.end()) {
        fail(ErrorKind::kInvalidArgument, "unknown modality '" + kind.tag + "'");
      }
    }
    out.emplace(kind, extract_features(backbone, image, prompt));
  }
  return out;
}

}  // namespace matsod::mafe
