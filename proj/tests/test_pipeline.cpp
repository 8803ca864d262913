// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "core/error.hpp"
#include "pipeline/checkpoint.hpp"
#include "pipeline/model.hpp"
#include "pipeline/train.hpp"
#include "synthdata/synthdata.hpp"

using namespace matsod;
using namespace matsod::pipeline;
namespace fs = std::filesystem;
using ad::Matrix;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.input_size = 32;
  cfg.widths = {8, 16, 24, 32};
  cfg.decoder_width = 8;
  cfg.prompt_tokens = 2;
  return cfg;
}

TrainConfig short_schedule() {
  TrainConfig t;
  t.phase1_epochs = 1;
  t.phase2_epochs = 1;
  t.batch_size = 3;
  return t;
}

std::vector<metrics::LabelledSample> toy_data(int n, std::uint64_t seed = 1) {
  std::vector<metrics::LabelledSample> out;
  for (int i = 0; i < n; ++i) {
    const std::string combo = standard_combos()[static_cast<std::size_t>(i) % 7];
    const auto spec = synth::random_scene(seed * 1000 + static_cast<std::uint64_t>(i));
    out.push_back({combo, synth::render_sample(spec, parse_combo(combo, default_modalities()), std::to_string(i))});
  }
  return out;
}

std::map<std::string, Matrix> snapshot(const Model& m) {
  std::map<std::string, Matrix> out;
  for (const auto& p : m.params().entries()) out[p.name] = p.var.value();
  return out;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("prompt parameters cost N_mpt x C1 per modality") {
  const ModelConfig cfg;
  const Model base(cfg);
  const auto counts = count_parameters(base);
  CHECK(counts.prompts == 3 * 4 * 16);
  CHECK(counts.total == base.params().total_size());
  CHECK(counts.total == counts.backbone + counts.prompts + counts.fusion + counts.decoder);

  ModelConfig four = cfg;
  four.modalities.push_back(ModalityKind{"NIR"});
  const Model bigger(four);
  CHECK(count_parameters(bigger).total - counts.total == 4 * 16);

  ModelConfig none = cfg;
  none.use_prompts = false;
  const auto plain = count_parameters(Model(none));
  CHECK(plain.prompts == 0);
  CHECK(plain.backbone < counts.backbone);  // no prompt carries

  ModelConfig add = cfg;
  add.fusion = FusionMode::kAdd;
  CHECK(count_parameters(Model(add)).fusion == 0);
  CHECK(counts.fusion > 0);
}

TEST_CASE("predict returns the sample resolution and rejects unregistered inputs") {
  const Model model(small_config());
  auto s = synth::render_sample(synth::random_scene(4, 48), {kRgb, kThermal});
  const Matrix p = model.predict(s);
  CHECK(p.rows() == 48 * 48);
  CHECK(p.minCoeff() >= 0.0);
  CHECK(p.maxCoeff() <= 1.0);
  CHECK(model.predict(s, 3).rows() == 48 * 48);
  CHECK_THROWS_AS(model.predict(s, 4), Error);
  s.ground_truth = Image();
  CHECK(model.predict(s) == p);

  s.images[kThermal] = Image(32, 32, 1);
  try {
    model.predict(s);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kShape);
    CHECK(std::string(e.what()).find("co-registered") != std::string::npos);
  }
}

TEST_CASE("training records one loss per step and phase 2 moves only prompts") {
  Model model(small_config());
  const auto data = toy_data(7);
  TrainConfig t = short_schedule();
  t.phase1_epochs = 0;
  const auto before = snapshot(model);
  const auto r = train(model, data, t);
  CHECK(r.history.size() == 3);  // ceil(7 / 3)
  CHECK(r.phase1_steps == 0);
  for (const auto& [name, value] : snapshot(model)) {
    CAPTURE(name);
    if (name.rfind("prompts.", 0) == 0) {
      CHECK_FALSE(value == before.at(name));
    } else {
      CHECK(value == before.at(name));
    }
  }
  for (const auto& p : model.params().entries()) CHECK(p.var.requires_grad());
}

TEST_CASE("training with a fixed seed is bit-reproducible") {
  const auto data = toy_data(7);
  auto run = [&] {
    Model model(small_config());
    std::vector<int> epochs;
    auto r = train(model, data, short_schedule(), [&](const TrainProgress& p) { epochs.push_back(p.epoch); });
    CHECK(epochs.size() == r.history.size());
    return std::make_pair(r.history, snapshot(model));
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.first.size() == 6);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(format_history(a.first) == format_history(b.first));

  Model other(small_config());
  TrainConfig t = short_schedule();
  t.seed = 2;
  CHECK_FALSE(train(other, data, t).history == a.first);
}

TEST_CASE("disabled components produce warnings instead of silent skips") {
  ModelConfig cfg = small_config();
  cfg.use_prompts = false;
  Model model(cfg);
  const auto r = train(model, toy_data(3), short_schedule());
  CHECK(r.history.size() == 1);  // phase 2 skipped
  CHECK(r.warnings.size() >= 2);
}

TEST_CASE("MTC adds a positive term for multimodal samples only") {
  const Model model(small_config());
  TrainConfig with = short_schedule();
  TrainConfig without = with;
  without.use_mtc = false;
  auto multi = model.prepare(synth::render_sample(synth::random_scene(9), {kRgb, kDepth}));
  auto single = model.prepare(synth::render_sample(synth::random_scene(9), {kRgb}));
  ad::NoGradGuard guard;
  const double gap = sample_loss(model, multi, with, 0).item() - sample_loss(model, multi, without, 0).item();
  CHECK(gap > 0.0);
  CHECK(sample_loss(model, single, with, 0).item() == sample_loss(model, single, without, 0).item());
  with.mtc_pairs = MtcPairs::kAll;
  CHECK(sample_loss(model, multi, with, 0).item() == doctest::Approx(sample_loss(model, multi, without, 0).item() + gap));
}

TEST_CASE("SGD follows the Nesterov update with selective decay") {
  ad::ParamStore store(1);
  ad::Var a = store.constant("a", 1, 1, 1.0);
  ad::Var b = store.constant("b", 1, 1, 1.0);
  Sgd sgd(0.1, 0.9, 0.5);
  auto decay_a = [](const std::string& n) { return n == "a"; };
  for (int i = 0; i < 2; ++i) {
    store.zero_grad();
    ad::backward(ad::add(ad::scale(a, 2.0), ad::scale(b, 2.0)));
    sgd.step(store.entries(), decay_a);
  }
  // a: g1 = 2.5, buf1 = 2.5, a1 = 1 - 0.1 (2.5 + 2.25) = 0.525
  //    g2 = 2.2625, buf2 = 4.5125, a2 = 0.525 - 0.1 (2.2625 + 4.06125)
  CHECK(a.value()(0, 0) == doctest::Approx(0.525 - 0.1 * (2.2625 + 0.9 * 4.5125)).epsilon(1e-12));
  // b: constant gradient 2 without decay.
  CHECK(b.value()(0, 0) == doctest::Approx(1.0 - 0.1 * (2 + 1.8) - 0.1 * (2 + 0.9 * 3.8)).epsilon(1e-12));
}

TEST_CASE("train config round-trips and validates") {
  TrainConfig t;
  t.mtc_pairs = MtcPairs::kAll;
  t.distance = losses::Distance::kEuclideanSum;
  t.learning_rate = 0.0123;
  const auto back = TrainConfig::from_key_values(t.to_key_values());
  CHECK(back.mtc_pairs == MtcPairs::kAll);
  CHECK(back.distance == losses::Distance::kEuclideanSum);
  CHECK(back.learning_rate == 0.0123);
  CHECK_THROWS_AS(TrainConfig::from_key_values({{"train.bogus", "1"}}), Error);
  CHECK_THROWS_AS(TrainConfig::from_key_values({{"train.batch_size", "0"}}), Error);
  CHECK_THROWS_AS(TrainConfig::from_key_values({{"train.momentum", "1"}}), Error);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  Model model(small_config());
  train(model, toy_data(3), short_schedule());
  const fs::path dir = fresh_dir("matsod_ckpt_roundtrip");
  save_checkpoint(model, dir.string(), {{"train.seed", "1"}});
  const auto loaded = load_checkpoint(dir.string());
  CHECK(loaded->config() == model.config());
  CHECK(snapshot(*loaded) == snapshot(model));
  const auto s = synth::render_sample(synth::random_scene(12), {kRgb, kDepth, kThermal});
  CHECK(loaded->predict(s) == model.predict(s));
  CHECK(read_checkpoint_config(dir.string()).at("train.seed") == "1");

  std::ifstream manifest(dir / "manifest.txt");
  std::vector<std::string> names;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.rfind("param ", 0) == 0) names.push_back(line.substr(6, line.find(' ', 6) - 6));
  }
  CHECK(names == parameter_names(model));
}

TEST_CASE("checkpoint loading rejects mismatched prompt counts and versions") {
  const Model model(small_config());
  const fs::path dir = fresh_dir("matsod_ckpt_mismatch");
  save_checkpoint(model, dir.string());

  ModelConfig cfg = small_config();
  cfg.prompt_tokens = 3;
  Model other(cfg);
  const auto before = snapshot(other);
  try {
    load_into(other, dir.string());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kShape);
    CHECK(std::string(e.what()).find("prompts.") != std::string::npos);
  }
  CHECK(snapshot(other) == before);

  std::ifstream in(dir / "manifest.txt");
  std::stringstream all;
  all << in.rdbuf();
  in.close();
  std::string text = all.str();
  text.replace(0, text.find('\n'), "matsod-checkpoint 99");
  std::ofstream(dir / "manifest.txt") << text;
  try {
    load_checkpoint(dir.string());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kFormat);
    CHECK(std::string(e.what()).find("99") != std::string::npos);
  }
  CHECK_THROWS_AS(load_checkpoint((dir / "missing").string()), Error);
}

TEST_CASE("forward cost grows with modality count") {
  const Model model(small_config());
  const auto s = synth::render_sample(synth::random_scene(13), {kRgb, kDepth, kThermal});
  const auto costs = measure_arity_cost(model, s, 1);
  REQUIRE(costs.size() == 3);
  CHECK(costs[0].macs < costs[1].macs);
  CHECK(costs[1].macs < costs[2].macs);
  CHECK(format_arity_report(costs).find("modalities") != std::string::npos);
}

TEST_CASE("evaluation rows match direct metric calls on the same predictions") {
  const Model model(small_config());
  const auto data = toy_data(7, 3);
  const auto report = metrics::evaluate(data, make_predictor(model), metrics::EvalMode::kSole);
  REQUIRE(report.rows.size() == 7);
  for (const auto& row : report.rows) {
    for (const auto& s : data) {
      if (s.combo != row.subset) continue;
      const Matrix p = model.predict(s.sample);
      const Matrix g = image_to_matrix(s.sample.ground_truth);
      CHECK(row.mae == metrics::mae(p, g));
      CHECK(row.fbeta == metrics::f_beta(p, g));
    }
  }
}
