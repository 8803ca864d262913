// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0
//
// Exercises the shared library through its C header only.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <string>

#include "matsod/matsod.h"

namespace fs = std::filesystem;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  matsod_string_free(s);
  return out;
}

const char* kSmallModel =
    "model.input_size = 32\n"
    "model.widths = 8, 16, 24, 32\n"
    "model.decoder_width = 8\n"
    "model.prompt_tokens = 2\n";

}  // namespace

TEST_CASE("version and config editing") {
  CHECK(std::string(matsod_version()) == "0.1.0");
  char* out = nullptr;
  REQUIRE(matsod_config_set(nullptr, "train.batch_size", "8", &out) == MATSOD_OK);
  CHECK(take(out).find("train.batch_size = 8") != std::string::npos);
  CHECK(matsod_config_set(nullptr, "optimizer.lr", "1", &out) == MATSOD_ERR_INVALID_ARGUMENT);
  CHECK(std::string(matsod_last_error()).find("optimizer.lr") != std::string::npos);
}

TEST_CASE("bad arguments map to status codes") {
  matsod_model* m = nullptr;
  CHECK(matsod_model_create("model.input_size = 30\n", &m) == MATSOD_ERR_INVALID_ARGUMENT);
  CHECK(m == nullptr);
  CHECK(matsod_model_create(nullptr, nullptr) == MATSOD_ERR_INVALID_ARGUMENT);
  CHECK(matsod_model_load("/nonexistent/matsod", &m) == MATSOD_ERR_IO);
  CHECK(matsod_generate_dataset("/tmp/matsod_capi_bad", "train", 7, "RGB=0.7", 1, 64, nullptr) ==
        MATSOD_ERR_INVALID_ARGUMENT);
  matsod_model_destroy(nullptr);
}

TEST_CASE("generate, train, evaluate, save, load and predict through the C API") {
  const fs::path root = fs::temp_directory_path() / "matsod_capi";
  fs::remove_all(root);
  double baseline = 1.0;
  REQUIRE(matsod_generate_dataset(root.string().c_str(), "train", 7, nullptr, 3, 64, &baseline) == MATSOD_OK);
  CHECK(baseline < 0.9);
  char* problems = nullptr;
  REQUIRE(matsod_audit_dataset(root.string().c_str(), "train", 64, &problems) == MATSOD_OK);
  CHECK(take(problems).empty());

  matsod_model* model = nullptr;
  REQUIRE(matsod_model_create(kSmallModel, &model) == MATSOD_OK);
  int calls = 0;
  auto progress = [](int, int, int, double loss, void* user) {
    CHECK(loss > 0.0);
    ++*static_cast<int*>(user);
  };
  char* history = nullptr;
  char* warnings = nullptr;
  REQUIRE(matsod_train(model, root.string().c_str(), "train",
                       "train.phase1_epochs = 1\ntrain.phase2_epochs = 1\ntrain.batch_size = 4\n", progress, &calls,
                       &history, &warnings) == MATSOD_OK);
  CHECK(calls == 4);
  CHECK(take(history).rfind("step\tloss\n", 0) == 0);
  take(warnings);

  char* table = nullptr;
  char* records = nullptr;
  REQUIRE(matsod_evaluate(model, root.string().c_str(), "train", "sole", nullptr, nullptr, &table, &records) ==
          MATSOD_OK);
  CHECK(take(table).find("RGB-D-T") != std::string::npos);
  CHECK(take(records).find("\nRGB-D-T\t1\t") != std::string::npos);
  CHECK(matsod_evaluate(model, root.string().c_str(), "train", "both", nullptr, nullptr, &table, &records) ==
        MATSOD_ERR_INVALID_ARGUMENT);

  char* json = nullptr;
  REQUIRE(matsod_model_describe(model, &json) == MATSOD_OK);
  const std::string described = take(json);
  CHECK(described.find("\"prompts\": 48") != std::string::npos);

  const fs::path ckpt = root / "ckpt";
  REQUIRE(matsod_model_save(model, ckpt.string().c_str(), "train.seed = 1\n") == MATSOD_OK);
  matsod_model* loaded = nullptr;
  REQUIRE(matsod_model_load(ckpt.string().c_str(), &loaded) == MATSOD_OK);
  char* c1 = nullptr;
  char* c2 = nullptr;
  REQUIRE(matsod_model_config(model, &c1) == MATSOD_OK);
  REQUIRE(matsod_model_config(loaded, &c2) == MATSOD_OK);
  CHECK(take(c1) == take(c2));

  const fs::path sample = root / "train" / "RGB-D" / "00003";
  const std::string inputs = "rgb=" + (sample / "rgb.png").string() + ",d=" + (sample / "d.png").string();
  const fs::path out = root / "pred.png";
  REQUIRE(matsod_predict(loaded, inputs.c_str(), out.string().c_str(), 1) == MATSOD_OK);
  CHECK(fs::exists(out));
  CHECK(fs::exists(root / "pred_s4.png"));
  CHECK(matsod_predict(loaded, ("rgb=" + (sample / "rgb.png").string() + ",rgb=x.png").c_str(), out.string().c_str(),
                       0) == MATSOD_ERR_INVALID_ARGUMENT);
  CHECK(matsod_predict(loaded, "nir=a.png", out.string().c_str(), 0) == MATSOD_ERR_INVALID_ARGUMENT);

  char* arity = nullptr;
  REQUIRE(matsod_arity_report(loaded, 1, &arity) == MATSOD_OK);
  CHECK(take(arity).find("3") != std::string::npos);

  matsod_model_destroy(loaded);
  matsod_model_destroy(model);
}
