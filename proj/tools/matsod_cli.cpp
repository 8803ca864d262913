// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0
//
// matsod command-line tool. Exit codes: 0 success, 1 runtime or I/O failure,
// 2 usage error.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "matsod/matsod.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

int report(matsod_status status) {
  std::cerr << "error: " << matsod_last_error() << "\n";
  return status == MATSOD_ERR_INVALID_ARGUMENT || status == MATSOD_ERR_SHAPE ? kExitUsage : kExitFailure;
}

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { matsod_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct ModelHandle {
  matsod_model* p = nullptr;
  ~ModelHandle() { matsod_model_destroy(p); }
};

bool read_text(const std::string& path, std::string& out) {
  std::ifstream in(path);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

bool write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  return static_cast<bool>(out << text) && static_cast<bool>(out.flush());
}

struct GenerateArgs {
  std::string out;
  std::string split = "train";
  int n = 700;
  std::string mix;
  int size = 64;
  std::uint64_t seed = 1;
};

int cmd_generate(const GenerateArgs& a) {
  double baseline = 0.0;
  if (auto st = matsod_generate_dataset(a.out.c_str(), a.split.c_str(), a.n, a.mix.empty() ? nullptr : a.mix.c_str(),
                                        a.seed, a.size, &baseline);
      st != MATSOD_OK) {
    return report(st);
  }
  OwnedString problems;
  if (auto st = matsod_audit_dataset(a.out.c_str(), a.split.c_str(), a.size, &problems.p); st != MATSOD_OK) {
    return report(st);
  }
  if (!problems.str().empty()) {
    std::cerr << "error: audit failed:\n" << problems.str();
    return kExitFailure;
  }
  std::printf("wrote %d samples to %s/%s (depth-threshold baseline F_beta %.4f)\n", a.n, a.out.c_str(),
              a.split.c_str(), baseline);
  return kExitOk;
}

struct TrainArgs {
  std::string data;
  std::string split = "train";
  std::string config;
  std::string out;
  std::string fusion_plan;
  bool no_mtc = false;
  bool no_prompts = false;
  bool no_csfh = false;
  std::int64_t seed = -1;
  int phase1_epochs = -1;
  int phase2_epochs = -1;
  int batch_size = -1;
  bool quiet = false;
};

struct ProgressState {
  bool quiet = false;
  int epoch = 0;
  int phase = 1;
  double sum = 0.0;
  int steps = 0;

  void flush() {
    if (steps > 0 && !quiet) {
      std::printf("epoch %3d  phase %d  mean loss %.5f\n", epoch, phase, sum / steps);
      std::fflush(stdout);
    }
    sum = 0.0;
    steps = 0;
  }
};

void on_progress(int epoch, int phase, int, double loss, void* user) {
  auto* s = static_cast<ProgressState*>(user);
  if (epoch != s->epoch) {
    s->flush();
    s->epoch = epoch;
    s->phase = phase;
  }
  s->sum += loss;
  s->steps++;
}

int cmd_train(const TrainArgs& a) {
  std::string text;
  if (!a.config.empty() && !read_text(a.config, text)) {
    std::cerr << "error: cannot read config " << a.config << "\n";
    return kExitFailure;
  }
  std::vector<std::pair<std::string, std::string>> overrides;
  if (!a.fusion_plan.empty()) overrides.emplace_back("model.fusion_plan", a.fusion_plan);
  if (a.no_mtc) overrides.emplace_back("train.mtc", "false");
  if (a.no_prompts) overrides.emplace_back("model.use_prompts", "false");
  if (a.no_csfh) overrides.emplace_back("model.fusion", "add");
  if (a.seed >= 0) {
    overrides.emplace_back("train.seed", std::to_string(a.seed));
    overrides.emplace_back("model.init_seed", std::to_string(a.seed));
  }
  if (a.phase1_epochs >= 0) overrides.emplace_back("train.phase1_epochs", std::to_string(a.phase1_epochs));
  if (a.phase2_epochs >= 0) overrides.emplace_back("train.phase2_epochs", std::to_string(a.phase2_epochs));
  if (a.batch_size >= 0) overrides.emplace_back("train.batch_size", std::to_string(a.batch_size));
  for (const auto& [k, v] : overrides) {
    OwnedString merged;
    if (auto st = matsod_config_set(text.c_str(), k.c_str(), v.c_str(), &merged.p); st != MATSOD_OK) return report(st);
    text = merged.str();
  }

  ModelHandle model;
  if (auto st = matsod_model_create(text.c_str(), &model.p); st != MATSOD_OK) return report(st);
  ProgressState progress;
  progress.quiet = a.quiet;
  OwnedString history, warnings;
  const auto st = matsod_train(model.p, a.data.c_str(), a.split.c_str(), text.c_str(), on_progress, &progress,
                               &history.p, &warnings.p);
  progress.flush();
  if (st != MATSOD_OK) return report(st);
  if (!warnings.str().empty()) std::cerr << "warning: " << warnings.str();
  if (auto s = matsod_model_save(model.p, a.out.c_str(), text.c_str()); s != MATSOD_OK) return report(s);
  const std::string history_path = (std::filesystem::path(a.out) / "history.tsv").string();
  if (!write_text(history_path, history.str())) {
    std::cerr << "error: cannot write " << history_path << "\n";
    return kExitFailure;
  }
  if (!a.quiet) std::printf("checkpoint written to %s\n", a.out.c_str());
  return kExitOk;
}

struct EvalArgs {
  std::string data;
  std::string split = "test";
  std::string checkpoint;
  std::string mode = "sole";
  std::string subsets;
  std::string fbeta_policy = "sweep";
  std::string records;
};

int cmd_eval(const EvalArgs& a) {
  ModelHandle model;
  if (auto st = matsod_model_load(a.checkpoint.c_str(), &model.p); st != MATSOD_OK) return report(st);
  OwnedString table, records;
  if (auto st = matsod_evaluate(model.p, a.data.c_str(), a.split.c_str(), a.mode.c_str(),
                                a.subsets.empty() ? nullptr : a.subsets.c_str(), a.fbeta_policy.c_str(), &table.p,
                                &records.p);
      st != MATSOD_OK) {
    return report(st);
  }
  std::cout << table.str();
  if (a.records.empty()) {
    std::cout << "\n" << records.str();
  } else if (!write_text(a.records, records.str())) {
    std::cerr << "error: cannot write " << a.records << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

struct PredictArgs {
  std::string checkpoint;
  std::string inputs;
  std::string out;
  bool aux = false;
};

int cmd_predict(const PredictArgs& a) {
  ModelHandle model;
  if (auto st = matsod_model_load(a.checkpoint.c_str(), &model.p); st != MATSOD_OK) return report(st);
  if (auto st = matsod_predict(model.p, a.inputs.c_str(), a.out.c_str(), a.aux ? 1 : 0); st != MATSOD_OK) {
    return report(st);
  }
  return kExitOk;
}

struct InspectArgs {
  std::string checkpoint;
  std::string config;
  bool arity = false;
  std::uint64_t seed = 1;
};

int cmd_inspect(const InspectArgs& a) {
  ModelHandle model;
  if (!a.checkpoint.empty()) {
    if (auto st = matsod_model_load(a.checkpoint.c_str(), &model.p); st != MATSOD_OK) return report(st);
  } else {
    std::string text;
    if (!a.config.empty() && !read_text(a.config, text)) {
      std::cerr << "error: cannot read config " << a.config << "\n";
      return kExitFailure;
    }
    if (auto st = matsod_model_create(text.c_str(), &model.p); st != MATSOD_OK) return report(st);
  }
  OwnedString json;
  if (auto st = matsod_model_describe(model.p, &json.p); st != MATSOD_OK) return report(st);
  std::cout << json.str();
  if (a.arity) {
    OwnedString table;
    if (auto st = matsod_arity_report(model.p, a.seed, &table.p); st != MATSOD_OK) return report(st);
    std::cout << "\n" << table.str();
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Arbitrary-modality salient object detection on registered RGB / depth / thermal images.", "matsod"};
  app.set_version_flag("--version", matsod_version());
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate-data", "Render a synthetic registered dataset split");
  g->add_option("--out", gen.out, "Dataset root directory")->required();
  g->add_option("--split", gen.split, "Split name (sub-directory of --out)");
  g->add_option("--n", gen.n, "Number of samples")->check(CLI::NonNegativeNumber);
  g->add_option("--mix", gen.mix, "Combo fractions, e.g. RGB=0.5,RGB-D-T=0.5 (default: uniform over 7 combos)");
  g->add_option("--size", gen.size, "Canvas side in pixels")->check(CLI::Range(16, 4096));
  g->add_option("--seed", gen.seed, "Random seed");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model and write a checkpoint directory");
  t->add_option("--data", tr.data, "Dataset root directory")->required();
  t->add_option("--split", tr.split, "Split to train on");
  t->add_option("--config", tr.config, "Key-value config file (model.* and train.* keys)");
  t->add_option("--out", tr.out, "Checkpoint directory to write")->required();
  t->add_option("--fusion-plan", tr.fusion_plan, "Per-level fusion, e.g. \"sdfm=1,2 cdfm=3,4\" or \"1,2|3,4\"");
  t->add_flag("--no-mtc", tr.no_mtc, "Disable the modality translation contrastive loss");
  t->add_flag("--no-prompts", tr.no_prompts, "Build the backbone without modality prompts");
  t->add_flag("--no-csfh", tr.no_csfh, "Fuse modalities by element-wise addition instead of SDFM/CDFM");
  t->add_option("--seed", tr.seed, "Seed for initialisation and training order (-1: config values)");
  t->add_option("--phase1-epochs", tr.phase1_epochs, "Full-network epochs (-1: config value)");
  t->add_option("--phase2-epochs", tr.phase2_epochs, "Prompt-only epochs (-1: config value)");
  t->add_option("--batch-size", tr.batch_size, "Batch size (-1: config value)");
  t->add_flag("--quiet", tr.quiet, "Suppress progress output");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  e->add_option("--data", ev.data, "Dataset root directory")->required();
  e->add_option("--split", ev.split, "Split to evaluate");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory")->required();
  e->add_option("--mode", ev.mode, "sole (one row per subset) or joint (one pooled row)")
      ->check(CLI::IsMember({"sole", "joint"}));
  e->add_option("--subsets", ev.subsets, "Comma-separated combos for sole mode (default: all present)");
  e->add_option("--fbeta-policy", ev.fbeta_policy, "sweep (mean over 255 thresholds) or adaptive (2x mean)")
      ->check(CLI::IsMember({"sweep", "adaptive"}));
  e->add_option("--records", ev.records, "Write the tab-separated records here instead of stdout");

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Predict a saliency map from any subset of modalities");
  p->add_option("--checkpoint", pr.checkpoint, "Checkpoint directory")->required();
  p->add_option("--inputs", pr.inputs, "MODALITY=PATH list, e.g. rgb=a.png,d=b.png")->required();
  p->add_option("--out", pr.out, "Output PNG for the primary map")->required();
  p->add_flag("--aux", pr.aux, "Also write auxiliary maps as <out>_s2.png .. <out>_s4.png");

  InspectArgs in;
  auto* i = app.add_subcommand("inspect", "Print config and parameter counts of a model");
  auto* ck = i->add_option("--checkpoint", in.checkpoint, "Checkpoint directory");
  auto* cf = i->add_option("--config", in.config, "Key-value config file (default config if neither is given)");
  ck->excludes(cf);
  i->add_flag("--arity", in.arity, "Also report forward cost for 1..N modalities");
  i->add_option("--seed", in.seed, "Scene seed for the arity report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (g->parsed()) return cmd_generate(gen);
  if (t->parsed()) return cmd_train(tr);
  if (e->parsed()) return cmd_eval(ev);
  if (p->parsed()) return cmd_predict(pr);
  if (i->parsed()) return cmd_inspect(in);
  return kExitUsage;
}
