// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#include "matsod/matsod.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include <json.hpp>

#include "core/error.hpp"
#include "core/image_io.hpp"
#include "pipeline/checkpoint.hpp"
#include "pipeline/train.hpp"
#include "synthdata/synthdata.hpp"

struct matsod_model {
  std::unique_ptr<matsod::pipeline::Model> model;
};

namespace {

using namespace matsod;

thread_local std::string g_last_error;

matsod_status set_error(matsod_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

matsod_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
      return MATSOD_ERR_INVALID_ARGUMENT;
    case ErrorKind::kShape:
      return MATSOD_ERR_SHAPE;
    case ErrorKind::kIo:
      return MATSOD_ERR_IO;
    case ErrorKind::kFormat:
      return MATSOD_ERR_FORMAT;
  }
  return MATSOD_ERR_INTERNAL;
}

template <class F>
matsod_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return MATSOD_OK;
  } catch (const Error& e) {
    return set_error(status_of(e.kind()), e.what());
  } catch (const std::invalid_argument& e) {
    return set_error(MATSOD_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(MATSOD_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(MATSOD_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(MATSOD_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (!p) fail(ErrorKind::kInvalidArgument, std::string(what) + " must not be NULL");
}

KeyValues config_from(const char* text) {
  KeyValues kvs = text ? parse_key_values(text) : KeyValues{};
  for (const auto& [k, _] : kvs) {
    if (k.rfind("model.", 0) != 0 && k.rfind("train.", 0) != 0) {
      fail(ErrorKind::kInvalidArgument, "unknown config key '" + k + "'");
    }
  }
  return kvs;
}

std::vector<std::string> split_list(const char* text) {
  std::vector<std::string> out;
  if (!text) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

extern "C" {

MATSOD_API const char* matsod_version(void) { return "0.1.0"; }

MATSOD_API const char* matsod_last_error(void) { return g_last_error.c_str(); }

MATSOD_API void matsod_string_free(char* s) { std::free(s); }

MATSOD_API matsod_status matsod_config_set(const char* config_text, const char* key, const char* value, char** out) {
  return guarded([&] {
    require(key, "key");
    require(value, "value");
    require(out, "out");
    KeyValues kvs = config_from(config_text);
    kvs[key] = value;
    *out = dup_string(format_key_values(config_from(format_key_values(kvs).c_str())));
  });
}

MATSOD_API matsod_status matsod_generate_dataset(const char* root, const char* split, int n, const char* mix,
                                                 uint64_t seed, int size, double* depth_baseline) {
  return guarded([&] {
    require(root, "root");
    require(split, "split");
    const synth::Mix m = mix ? synth::parse_mix(mix) : synth::uniform_mix();
    const auto summary = synth::build_dataset(root, split, n, m, seed, size);
    if (depth_baseline) *depth_baseline = summary.depth_baseline_fbeta;
  });
}

MATSOD_API matsod_status matsod_audit_dataset(const char* root, const char* split, int size, char** problems) {
  return guarded([&] {
    require(root, "root");
    require(split, "split");
    require(problems, "problems");
    std::string text;
    for (const auto& p : synth::audit_dataset(root, split, size)) text += p + "\n";
    *problems = dup_string(text);
  });
}

MATSOD_API matsod_status matsod_model_create(const char* config_text, matsod_model** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    const ModelConfig cfg = ModelConfig::from_key_values(config_from(config_text));
    auto handle = std::make_unique<matsod_model>();
    handle->model = std::make_unique<pipeline::Model>(cfg);
    *out = handle.release();
  });
}

MATSOD_API matsod_status matsod_model_load(const char* checkpoint_dir, matsod_model** out) {
  return guarded([&] {
    require(checkpoint_dir, "checkpoint_dir");
    require(out, "out");
    *out = nullptr;
    auto handle = std::make_unique<matsod_model>();
    handle->model = pipeline::load_checkpoint(checkpoint_dir);
    *out = handle.release();
  });
}

MATSOD_API matsod_status matsod_model_save(const matsod_model* model, const char* checkpoint_dir,
                                           const char* extra_config_text) {
  return guarded([&] {
    require(model, "model");
    require(checkpoint_dir, "checkpoint_dir");
    KeyValues extra;
    for (const auto& [k, v] : config_from(extra_config_text)) {
      if (k.rfind("model.", 0) != 0) extra[k] = v;
    }
    pipeline::save_checkpoint(*model->model, checkpoint_dir, extra);
  });
}

MATSOD_API void matsod_model_destroy(matsod_model* model) { delete model; }

MATSOD_API matsod_status matsod_model_describe(const matsod_model* model, char** json) {
  return guarded([&] {
    require(model, "model");
    require(json, "json");
    const auto counts = pipeline::count_parameters(*model->model);
    nlohmann::ordered_json j;
    j["parameters"] = {{"backbone", counts.backbone},
                       {"prompts", counts.prompts},
                       {"fusion", counts.fusion},
                       {"decoder", counts.decoder},
                       {"total", counts.total}};
    nlohmann::ordered_json cfg;
    for (const auto& [k, v] : model->model->config().to_key_values()) cfg[k] = v;
    j["config"] = cfg;
    nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
    for (const auto& p : model->model->params().entries()) {
      tensors.push_back({{"name", p.name}, {"rows", p.var.rows()}, {"cols", p.var.cols()}});
    }
    j["tensors"] = tensors;
    *json = dup_string(j.dump(2) + "\n");
  });
}

MATSOD_API matsod_status matsod_model_config(const matsod_model* model, char** text) {
  return guarded([&] {
    require(model, "model");
    require(text, "text");
    *text = dup_string(format_key_values(model->model->config().to_key_values()));
  });
}

MATSOD_API matsod_status matsod_train(matsod_model* model, const char* data_root, const char* split,
                                      const char* train_config_text, matsod_progress_fn progress, void* user,
                                      char** history, char** warnings) {
  return guarded([&] {
    require(model, "model");
    require(data_root, "data_root");
    require(split, "split");
    if (history) *history = nullptr;
    if (warnings) *warnings = nullptr;
    const pipeline::TrainConfig cfg = pipeline::TrainConfig::from_key_values(config_from(train_config_text));
    const auto data = synth::load_dataset(data_root, split);
    pipeline::ProgressFn fn;
    if (progress) {
      fn = [progress, user](const pipeline::TrainProgress& p) { progress(p.epoch, p.phase, p.step, p.loss, user); };
    }
    const auto result = pipeline::train(*model->model, data, cfg, fn);
    std::string notes;
    for (const auto& w : result.warnings) notes += w + "\n";
    if (history) *history = dup_string(pipeline::format_history(result.history));
    if (warnings) *warnings = dup_string(notes);
  });
}

MATSOD_API matsod_status matsod_evaluate(const matsod_model* model, const char* data_root, const char* split,
                                         const char* mode, const char* subsets, const char* fbeta_policy,
                                         char** table, char** records) {
  return guarded([&] {
    require(model, "model");
    require(data_root, "data_root");
    require(split, "split");
    const metrics::EvalMode m = metrics::parse_eval_mode(mode ? mode : "sole");
    const metrics::FbetaPolicy policy = metrics::parse_fbeta_policy(fbeta_policy ? fbeta_policy : "sweep");
    std::vector<std::string> wanted;
    for (const auto& s : split_list(subsets)) {
      wanted.push_back(combo_label(parse_combo(s, default_modalities()), default_modalities()));
    }
    const auto data = synth::load_dataset(data_root, split);
    const auto report = metrics::evaluate(data, pipeline::make_predictor(*model->model), m, wanted, policy);
    if (table) *table = dup_string(report.to_table());
    if (records) *records = dup_string(report.to_records());
  });
}

MATSOD_API matsod_status matsod_predict(const matsod_model* model, const char* inputs, const char* out_png, int aux) {
  return guarded([&] {
    require(model, "model");
    require(inputs, "inputs");
    require(out_png, "out_png");
    const auto& known = model->model->config().modalities;
    MultimodalSample sample;
    sample.id = "predict";
    for (const auto& item : split_list(inputs)) {
      const auto eq = item.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
        fail(ErrorKind::kInvalidArgument, "input '" + item + "' is not MODALITY=PATH");
      }
      const ModalityKind kind = parse_modality(item.substr(0, eq), known);
      if (sample.images.count(kind)) fail(ErrorKind::kInvalidArgument, "modality " + kind.tag + " given twice");
      sample.images[kind] = read_png(item.substr(eq + 1));
    }
    if (sample.images.empty()) fail(ErrorKind::kInvalidArgument, "no inputs given");
    const ad::Matrix s1 = model->model->predict(sample, 0);
    const Image& ref = sample.images.begin()->second;
    write_png(out_png, matrix_to_image(s1, ref.height, ref.width));
    if (aux) {
      const std::filesystem::path out(out_png);
      for (int level = 1; level < kLevels; ++level) {
        const auto path = out.parent_path() / (out.stem().string() + "_s" + std::to_string(level + 1) + ".png");
        write_png(path.string(), matrix_to_image(model->model->predict(sample, level), ref.height, ref.width));
      }
    }
  });
}

MATSOD_API matsod_status matsod_arity_report(const matsod_model* model, uint64_t seed, char** table) {
  return guarded([&] {
    require(model, "model");
    require(table, "table");
    const auto& cfg = model->model->config();
    std::vector<ModalityKind> renderable;
    for (const auto& m : cfg.modalities) {
      if (m == kRgb || m == kDepth || m == kThermal) renderable.push_back(m);
    }
    const auto spec = synth::random_scene(seed, cfg.input_size);
    const auto sample = synth::render_sample(spec, renderable, "arity");
    *table = dup_string(pipeline::format_arity_report(pipeline::measure_arity_cost(*model->model, sample)));
  });
}

}  // extern "C"
