// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "core/error.hpp"
#include "synthdata/synthdata.hpp"

using namespace matsod;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

double mask_fraction(const Image& m) {
  double on = 0.0;
  for (double v : m.data) on += v;
  return on / static_cast<double>(m.data.size());
}

}  // namespace

TEST_CASE("rendering is deterministic under the seed") {
  const auto spec = synth::random_scene(77);
  const auto a = synth::render_sample(spec, {kRgb, kDepth, kThermal});
  const auto b = synth::render_sample(synth::random_scene(77), {kRgb, kDepth, kThermal});
  CHECK(a.images == b.images);
  CHECK(a.ground_truth == b.ground_truth);
  CHECK_FALSE(synth::render_sample(synth::random_scene(78), {kRgb}).images.at(kRgb) == a.images.at(kRgb));
}

TEST_CASE("scenes respect the object rules and masks are binary") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto spec = synth::random_scene(seed);
    CHECK_NOTHROW(synth::check_scene(spec));
    const Image mask = synth::render_mask(spec);
    const double f = mask_fraction(mask);
    CHECK(f >= synth::kMinObjectArea);
    CHECK(f <= synth::kMaxObjectArea);
    for (double v : mask.data) CHECK((v == 0.0 || v == 1.0));
    // Object fully inside: the border is background.
    for (int i = 0; i < 64; ++i) {
      CHECK(mask.at(0, i) == 0.0);
      CHECK(mask.at(63, i) == 0.0);
      CHECK(mask.at(i, 0) == 0.0);
      CHECK(mask.at(i, 63) == 0.0);
    }
  }
  auto spec = synth::random_scene(3);
  spec.object.rx = spec.object.ry = 40.0;
  CHECK_THROWS_AS(synth::check_scene(spec), Error);
  CHECK_THROWS_AS(synth::render_sample(spec, {kRgb}), Error);
  CHECK_THROWS_AS(synth::render_sample(synth::random_scene(3), {}), Error);
}

TEST_CASE("dropping a modality leaves the others unchanged") {
  const auto spec = synth::random_scene(91);
  const auto full = synth::render_sample(spec, {kRgb, kDepth, kThermal});
  const auto partial = synth::render_sample(spec, {kRgb, kDepth});
  CHECK(partial.images.size() == 2);
  CHECK(partial.images.at(kRgb) == full.images.at(kRgb));
  CHECK(partial.images.at(kDepth) == full.images.at(kDepth));
  CHECK(full.images.at(kRgb).channels == 3);
  CHECK(full.images.at(kThermal).channels == 1);
  CHECK(validate_sample(full).empty());
}

TEST_CASE("mix parsing and allocation") {
  const auto alloc = synth::allocate(synth::uniform_mix(), 70);
  REQUIRE(alloc.size() == 7);
  for (const auto& [combo, n] : alloc) CHECK(n == 10);
  const auto m = synth::parse_mix("rgb=0.5, RGB-D=0.25,d-t=0.25");
  CHECK(m.at("RGB") == 0.5);
  CHECK(m.at("D-T") == 0.25);
  int total = 0;
  for (const auto& [combo, n] : synth::allocate(synth::parse_mix("RGB=0.34,D=0.33,T=0.33"), 10)) total += n;
  CHECK(total == 10);
  CHECK_THROWS_AS(synth::parse_mix("RGB=0.5,D=0.4"), Error);
  CHECK_THROWS_AS(synth::parse_mix("RGB=0.5,X=0.5"), Error);
  CHECK_THROWS_AS(synth::parse_mix("RGB=1.5,D=-0.5"), Error);
}

TEST_CASE("build_dataset writes the layout, manifest and a clean audit") {
  const fs::path root = fresh_dir("matsod_synth_build");
  const auto summary = synth::build_dataset(root.string(), "train", 70, synth::uniform_mix(), 5);
  CHECK(summary.samples == 70);
  for (const auto& [combo, n] : summary.per_combo) CHECK(n == 10);
  CHECK(summary.depth_baseline_fbeta < synth::kDegenerateBaseline);

  std::ifstream manifest(root / "train" / "manifest.tsv");
  int lines = 0;
  std::string line;
  while (std::getline(manifest, line)) lines += !line.empty();
  CHECK(lines == 70);
  CHECK(fs::exists(root / "train" / "RGB-D-T" / "00069" / "t.png"));
  CHECK(fs::exists(root / "train" / "RGB-D-T" / "00069" / "gt.png"));
  CHECK(synth::audit_dataset(root.string(), "train", 64).empty());

  const auto loaded = synth::load_dataset(root.string(), "train");
  REQUIRE(loaded.size() == 70);
  for (const auto& s : loaded) {
    CHECK(validate_sample(s.sample).empty());
    CHECK(s.combo == combo_label([&] {
            std::vector<ModalityKind> ks;
            for (const auto& [k, img] : s.sample.images) ks.push_back(k);
            return ks;
          }(),
                                 default_modalities()));
  }

  // Regeneration is byte-identical.
  const fs::path other = fresh_dir("matsod_synth_build2");
  synth::build_dataset(other.string(), "train", 70, synth::uniform_mix(), 5);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  CHECK(slurp(root / "train" / "manifest.tsv") == slurp(other / "train" / "manifest.tsv"));
  CHECK(slurp(root / "train" / "RGB-T" / "00040" / "rgb.png") == slurp(other / "train" / "RGB-T" / "00040" / "rgb.png"));

  // Damage one file and the audit notices.
  fs::remove(root / "train" / "D" / "00010" / "d.png");
  CHECK_FALSE(synth::audit_dataset(root.string(), "train", 64).empty());
}

TEST_CASE("build_dataset reports unwritable roots") {
  const fs::path blocker = fresh_dir("matsod_synth_blocker");
  std::ofstream(blocker.string()) << "file";
  try {
    synth::build_dataset((blocker / "sub").string(), "train", 7, synth::uniform_mix(), 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIo);
  }
  fs::remove(blocker);
}
