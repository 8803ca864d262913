// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#include "decoder/decoder.hpp"

#include "core/error.hpp"

namespace matsod::decoder {

using ad::Var;

Decoder::Decoder(const ModelConfig& cfg, ad::ParamStore& store)
    : shapes_(cfg.level_shapes()), output_size_(cfg.input_size) {
  const int width = cfg.decoder_width;
  for (int l = 0; l < kLevels; ++l) {
    const std::string base = "decoder.level" + std::to_string(l + 1);
    DecoderStage st;
    st.lateral = ad::make_linear(store, base + ".lateral", shapes_[l].channels, width);
    if (l + 1 < kLevels) st.merge = ad::make_linear(store, base + ".merge", 2 * width, width);
    st.dw_kernel = store.normal(base + ".dw.kernel", 9, width, 1.0 / 3.0);
    st.dw_bias = store.zeros(base + ".dw.bias", 1, width);
    st.head = ad::make_linear(store, base + ".head", width, 1);
    stages_.push_back(std::move(st));
  }
}

void Decoder::check_inputs(const std::array<Var, kLevels>& fused) const {
  for (int l = 0; l < kLevels; ++l) {
    const auto& s = shapes_[l];
    if (!fused[l].defined() || fused[l].rows() != static_cast<Eigen::Index>(s.height) * s.width ||
        fused[l].cols() != s.channels) {
      fail(ErrorKind::kShape, "decode: level " + std::to_string(l + 1) + " must be (" + std::to_string(s.height) +
                                  "*" + std::to_string(s.width) + ") x " + std::to_string(s.channels));
    }
  }
}

std::array<Var, kLevels> Decoder::decode_features(const std::array<Var, kLevels>& fused) const {
  check_inputs(fused);
  std::array<Var, kLevels> decoded;
  for (int l = kLevels - 1; l >= 0; --l) {
    const DecoderStage& st = stages_[l];
    const auto& s = shapes_[l];
    Var h = st.lateral(fused[l]);
    if (l + 1 < kLevels) {
      const auto& above = shapes_[l + 1];
      Var up = ad::upsample_bilinear(decoded[l + 1], above.height, above.width, s.height, s.width);
      h = (*st.merge)(ad::concat_cols({h, up}));
    }
    decoded[l] = ad::gelu(ad::depthwise_conv3x3(h, s.height, s.width, st.dw_kernel, st.dw_bias));
  }
  return decoded;
}

SaliencyPrediction Decoder::decode(const std::array<Var, kLevels>& fused) const {
  const auto decoded = decode_features(fused);
  SaliencyPrediction out;
  out.height = output_size_;
  out.width = output_size_;
  for (int l = 0; l < kLevels; ++l) {
    const auto& s = shapes_[l];
    Var logits = stages_[l].head(decoded[l]);
    out.maps[l] = ad::sigmoid(ad::upsample_bilinear(logits, s.height, s.width, output_size_, output_size_));
  }
  return out;
}

}  // namespace matsod::decoder
