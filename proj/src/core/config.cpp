// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#include "core/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "core/error.hpp"

namespace matsod {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& want) {
  fail(ErrorKind::kInvalidArgument, "config key '" + key + "': '" + value + "' is not " + want);
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::kInvalidArgument, "config line " + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(ErrorKind::kInvalidArgument, "config line " + std::to_string(number) + ": empty key");
    if (!out.emplace(key, value).second) {
      fail(ErrorKind::kInvalidArgument, "config line " + std::to_string(number) + ": duplicate key '" + key + "'");
    }
  }
  return out;
}

KeyValues read_key_values_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

namespace kv {

int to_int(const std::string& key, const std::string& value) {
  int v = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end) bad_value(key, value, "an integer");
  return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end) bad_value(key, value, "an unsigned integer");
  return v;
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size() || !std::isfinite(v)) bad_value(key, value, "a finite number");
    return v;
  } catch (const std::logic_error&) {
    bad_value(key, value, "a number");
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  bad_value(key, value, "a boolean");
}

std::array<int, kLevels> to_int4(const std::string& key, const std::string& value) {
  std::array<int, kLevels> out{};
  std::stringstream ss(value);
  std::string item;
  int i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= kLevels) bad_value(key, value, "a list of 4 integers");
    out[i++] = to_int(key, trim(item));
  }
  if (i != kLevels) bad_value(key, value, "a list of 4 integers");
  return out;
}

std::string from_int4(const std::array<int, kLevels>& v) {
  return std::to_string(v[0]) + "," + std::to_string(v[1]) + "," + std::to_string(v[2]) + "," + std::to_string(v[3]);
}

std::string from_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace kv

void ModelConfig::validate() const {
  auto need = [](bool ok, const std::string& key, const std::string& msg) {
    if (!ok) fail(ErrorKind::kInvalidArgument, "config key '" + key + "': " + msg);
  };
  need(patch_size > 0, "model.patch_size", "must be positive");
  need(input_size > 0 && input_size % (patch_size * 8) == 0, "model.input_size",
       "must be divisible by " + std::to_string(patch_size * 8) + " (patch_size * 8)");
  for (int l = 0; l < kLevels; ++l) {
    need(widths[l] > 0, "model.widths", "all widths must be positive");
    need(l == 0 || widths[l] > widths[l - 1], "model.widths", "widths must strictly increase");
    need(heads[l] > 0 && widths[l] % heads[l] == 0, "model.heads", "each stage width must be divisible by its heads");
    need(blocks[l] > 0, "model.blocks", "each stage needs at least one block");
    const int side = input_size / (patch_size << l);
    need(sr_ratios[l] > 0 && side % sr_ratios[l] == 0, "model.sr_ratios",
         "stage " + std::to_string(l + 1) + " grid side " + std::to_string(side) + " not divisible by ratio " +
             std::to_string(sr_ratios[l]));
  }
  need(ffn_expansion > 0, "model.ffn_expansion", "must be positive");
  need(prompt_tokens > 0, "model.prompt_tokens", "must be positive");
  need(fusion_heads > 0, "model.fusion_heads", "must be positive");
  for (int l = 0; l < kLevels; ++l) {
    need(widths[l] % fusion_heads == 0, "model.fusion_heads", "must divide every stage width");
  }
  need(fusion_ffn_expansion > 0, "model.fusion_ffn_expansion", "must be positive");
  need(decoder_width > 0, "model.decoder_width", "must be positive");
  need(!modalities.empty(), "model.modalities", "at least one modality required");
  std::set<ModalityKind> unique(modalities.begin(), modalities.end());
  need(unique.size() == modalities.size(), "model.modalities", "tags must be unique");
  for (const auto& m : modalities) {
    need(!m.tag.empty() && m.tag.find_first_of("-,\t /") == std::string::npos, "model.modalities",
         "tag '" + m.tag + "' must be non-empty and free of '-', ',', '/' and whitespace");
  }
}

std::array<LevelShape, kLevels> ModelConfig::level_shapes() const {
  std::array<LevelShape, kLevels> out{};
  for (int l = 0; l < kLevels; ++l) {
    const int side = input_size / (patch_size << l);
    out[l] = {side, side, widths[l]};
  }
  return out;
}

KeyValues ModelConfig::to_key_values() const {
  KeyValues out;
  out["model.input_size"] = std::to_string(input_size);
  out["model.patch_size"] = std::to_string(patch_size);
  out["model.widths"] = kv::from_int4(widths);
  out["model.heads"] = kv::from_int4(heads);
  out["model.blocks"] = kv::from_int4(blocks);
  out["model.sr_ratios"] = kv::from_int4(sr_ratios);
  out["model.ffn_expansion"] = std::to_string(ffn_expansion);
  out["model.prompt_tokens"] = std::to_string(prompt_tokens);
  out["model.use_prompts"] = use_prompts ? "true" : "false";
  out["model.fusion"] = fusion == FusionMode::kCsfh ? "csfh" : "add";
  out["model.fusion_plan"] = fusion_plan.to_string();
  out["model.fusion_heads"] = std::to_string(fusion_heads);
  out["model.fusion_ffn_expansion"] = std::to_string(fusion_ffn_expansion);
  out["model.decoder_width"] = std::to_string(decoder_width);
  std::string mods;
  for (const auto& m : modalities) mods += (mods.empty() ? "" : ",") + m.tag;
  out["model.modalities"] = mods;
  out["model.init_seed"] = std::to_string(init_seed);
  return out;
}

ModelConfig ModelConfig::from_key_values(const KeyValues& kvs) { return from_key_values(kvs, ModelConfig{}); }

ModelConfig ModelConfig::from_key_values(const KeyValues& kvs, ModelConfig cfg) {
  for (const auto& [key, value] : kvs) {
    if (key.rfind("model.", 0) != 0) continue;
    if (key == "model.input_size") cfg.input_size = kv::to_int(key, value);
    else if (key == "model.patch_size") cfg.patch_size = kv::to_int(key, value);
    else if (key == "model.widths") cfg.widths = kv::to_int4(key, value);
    else if (key == "model.heads") cfg.heads = kv::to_int4(key, value);
    else if (key == "model.blocks") cfg.blocks = kv::to_int4(key, value);
    else if (key == "model.sr_ratios") cfg.sr_ratios = kv::to_int4(key, value);
    else if (key == "model.ffn_expansion") cfg.ffn_expansion = kv::to_int(key, value);
    else if (key == "model.prompt_tokens") cfg.prompt_tokens = kv::to_int(key, value);
    else if (key == "model.use_prompts") cfg.use_prompts = kv::to_bool(key, value);
    else if (key == "model.fusion") {
      if (value == "csfh") cfg.fusion = FusionMode::kCsfh;
      else if (value == "add") cfg.fusion = FusionMode::kAdd;
      else bad_value(key, value, "'csfh' or 'add'");
    } else if (key == "model.fusion_plan") cfg.fusion_plan = FusionPlan::parse(value);
    else if (key == "model.fusion_heads") cfg.fusion_heads = kv::to_int(key, value);
    else if (key == "model.fusion_ffn_expansion") cfg.fusion_ffn_expansion = kv::to_int(key, value);
    else if (key == "model.decoder_width") cfg.decoder_width = kv::to_int(key, value);
    else if (key == "model.modalities") {
      cfg.modalities.clear();
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) cfg.modalities.push_back(ModalityKind{trim(item)});
    } else if (key == "model.init_seed") cfg.init_seed = kv::to_u64(key, value);
    else fail(ErrorKind::kInvalidArgument, "unknown config key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

}  // namespace matsod
