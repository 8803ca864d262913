// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#include "pipeline/model.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

#include "core/error.hpp"

namespace matsod::pipeline {

namespace {

const ModelConfig& validated(const ModelConfig& cfg) {
  cfg.validate();
  return cfg;
}

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : sep) + s;
  return out;
}

}  // namespace

Model::Model(const ModelConfig& cfg)
    : cfg_(validated(cfg)),
      store_(cfg.init_seed),
      backbone_(cfg_, store_),
      prompts_(cfg_.use_prompts ? mafe::PromptBank(cfg_, store_) : mafe::PromptBank()),
      csfh_(cfg_, store_),
      decoder_(cfg_, store_) {}

MultimodalSample Model::prepare(const MultimodalSample& sample) const {
  const auto problems = validate_sample(sample, cfg_.modalities);
  if (!problems.empty()) fail(ErrorKind::kShape, join(problems, "; "));
  const int n = cfg_.input_size;
  MultimodalSample out;
  out.id = sample.id;
  for (const auto& [kind, image] : sample.images) {
    out.images[kind] = image.height == n && image.width == n ? image : resize_bilinear(image, n, n);
  }
  if (sample.ground_truth.height == n && sample.ground_truth.width == n) {
    out.ground_truth = sample.ground_truth;
  } else {
    out.ground_truth = resize_bilinear(sample.ground_truth, n, n);
    for (auto& v : out.ground_truth.data) v = v > 0.5 ? 1.0 : 0.0;
  }
  return out;
}

std::map<ModalityKind, FeaturePyramid> Model::extract(const MultimodalSample& prepared) const {
  return mafe::extract_all(backbone_, prepared, prompts_);
}

SaliencyPrediction Model::forward(const MultimodalSample& prepared) const {
  return decoder_.decode(csfh_.fuse(extract(prepared)));
}

ad::Matrix Model::predict(const MultimodalSample& sample, int level) const {
  if (level < 0 || level >= kLevels) fail(ErrorKind::kInvalidArgument, "prediction level must be 0..3");
  ad::NoGradGuard guard;
  MultimodalSample prepared = sample;
  // Inference needs no mask; without one the first image sets the reference size.
  if (prepared.ground_truth.data.empty() && !prepared.images.empty()) {
    const Image* ref = &prepared.images.begin()->second;
    for (const auto& m : cfg_.modalities) {
      if (auto it = prepared.images.find(m); it != prepared.images.end()) {
        ref = &it->second;
        break;
      }
    }
    prepared.ground_truth = Image(ref->height, ref->width, 1);
  }
  const auto problems = validate_sample(prepared, cfg_.modalities);
  if (!problems.empty()) fail(ErrorKind::kShape, join(problems, "; "));
  const int h = prepared.ground_truth.height;
  const int w = prepared.ground_truth.width;
  const int n = cfg_.input_size;
  for (auto& [kind, image] : prepared.images) {
    if (image.height != n || image.width != n) image = resize_bilinear(image, n, n);
  }
  prepared.ground_truth = Image(n, n, 1);
  const SaliencyPrediction pred = forward(prepared);
  const ad::Matrix& map = pred.maps[level].value();
  if (h == n && w == n) return map;
  return image_to_matrix(resize_bilinear(matrix_to_image(map, n, n), h, w));
}

ParameterCounts count_parameters(const Model& model) {
  ParameterCounts c;
  for (const auto& p : model.params().entries()) {
    const std::size_t size = static_cast<std::size_t>(p.var.value().size());
    if (p.name.rfind("backbone.", 0) == 0) c.backbone += size;
    else if (p.name.rfind("prompts.", 0) == 0) c.prompts += size;
    else if (p.name.rfind("fusion.", 0) == 0) c.fusion += size;
    else if (p.name.rfind("decoder.", 0) == 0) c.decoder += size;
    c.total += size;
  }
  return c;
}

std::vector<std::string> parameter_names(const Model& model) {
  std::vector<std::string> names;
  for (const auto& p : model.params().entries()) names.push_back(p.name);
  return names;
}

std::vector<ArityCost> measure_arity_cost(const Model& model, const MultimodalSample& sample, int repeats) {
  const MultimodalSample prepared = model.prepare(sample);
  std::vector<ArityCost> out;
  std::vector<ModalityKind> order;
  for (const auto& m : model.config().modalities) {
    if (prepared.images.count(m)) order.push_back(m);
  }
  for (std::size_t k = 1; k <= order.size(); ++k) {
    MultimodalSample sub;
    sub.id = prepared.id;
    sub.ground_truth = prepared.ground_truth;
    for (std::size_t i = 0; i < k; ++i) sub.images[order[i]] = prepared.images.at(order[i]);
    ad::NoGradGuard guard;
    ArityCost cost;
    cost.modalities = static_cast<int>(k);
    double best = 0.0;
    for (int r = 0; r < std::max(1, repeats); ++r) {
      ad::reset_mac_count();
      const auto t0 = std::chrono::steady_clock::now();
      (void)model.forward(sub);
      const auto t1 = std::chrono::steady_clock::now();
      const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      cost.macs = ad::mac_count();
      best = r == 0 ? ms : std::min(best, ms);
    }
    cost.milliseconds = best;
    out.push_back(cost);
  }
  return out;
}

std::string format_arity_report(const std::vector<ArityCost>& costs) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-10s %14s %12s\n", "modalities", "MACs", "ms/forward");
  out << line;
  for (const auto& c : costs) {
    std::snprintf(line, sizeof line, "%-10d %14llu %12.3f\n", c.modalities, static_cast<unsigned long long>(c.macs),
                  c.milliseconds);
    out << line;
  }
  return out.str();
}

}  // namespace matsod::pipeline
