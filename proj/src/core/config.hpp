// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat `key = value` configuration. Lines starting with '#' (after optional
// whitespace) and trailing `# ...` comments are ignored. Keys are dotted:
// `model.*` keys belong to ModelConfig, `train.*` keys to TrainConfig.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/types.hpp"

namespace matsod {

using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values_file(const std::string& path);
std::string format_key_values(const KeyValues& kv);

// Typed accessors shared by the config structs.
namespace kv {
int to_int(const std::string& key, const std::string& value);
std::uint64_t to_u64(const std::string& key, const std::string& value);
double to_double(const std::string& key, const std::string& value);
bool to_bool(const std::string& key, const std::string& value);
std::array<int, kLevels> to_int4(const std::string& key, const std::string& value);
std::string from_int4(const std::array<int, kLevels>& v);
std::string from_double(double v);
}  // namespace kv

enum class FusionMode {
  kCsfh,  // SDFM / CDFM per the fusion plan
  kAdd,   // element-wise sum, no fusion parameters
};

struct ModelConfig {
  int input_size = 64;
  int patch_size = 4;
  std::array<int, kLevels> widths{16, 32, 48, 64};
  std::array<int, kLevels> heads{1, 2, 3, 4};
  std::array<int, kLevels> blocks{1, 1, 1, 1};
  std::array<int, kLevels> sr_ratios{8, 4, 2, 1};
  int ffn_expansion = 4;
  int prompt_tokens = 4;
  bool use_prompts = true;
  FusionMode fusion = FusionMode::kCsfh;
  FusionPlan fusion_plan;
  int fusion_heads = 1;
  int fusion_ffn_expansion = 2;
  int decoder_width = 24;
  std::vector<ModalityKind> modalities = default_modalities();
  std::uint64_t init_seed = 7;

  // Throws Error(kInvalidArgument) naming the offending key.
  void validate() const;
  std::array<LevelShape, kLevels> level_shapes() const;
  int prompt_width() const { return widths[0]; }

  KeyValues to_key_values() const;
  // Applies every `model.*` key; unknown `model.*` keys are rejected.
  static ModelConfig from_key_values(const KeyValues& kv, ModelConfig base);
  static ModelConfig from_key_values(const KeyValues& kv);

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace matsod
