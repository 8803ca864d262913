// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic registered RGB / depth / thermal scenes. Every modality is
// rendered from one shared geometry, so images are registered by
// construction, and each modality draws its noise from its own stream so the
// set of rendered modalities never changes the pixels of the others.
//
// On-disk layout of one split:
//   <root>/<split>/<combo>/<id>/<modality>.png   (rgb.png, d.png, t.png)
//   <root>/<split>/<combo>/<id>/gt.png
//   <root>/<split>/manifest.tsv                  id<TAB>combo<TAB>paths...
// Paths in the manifest are relative to <root>/<split>.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/types.hpp"
#include "metrics/metrics.hpp"

namespace matsod::synth {

inline constexpr double kMinObjectArea = 0.02;
inline constexpr double kMaxObjectArea = 0.40;

enum class ShapeType { kEllipse, kRectangle, kPolygon };

struct Shape {
  ShapeType type = ShapeType::kEllipse;
  double cx = 0.0, cy = 0.0;    // pixels
  double rx = 1.0, ry = 1.0;    // half extents
  double angle = 0.0;           // radians
  std::vector<double> radii;    // polygon vertex radii as fractions of rx/ry

  bool contains(double x, double y) const;
  // Radius of a circle around the centre that encloses the shape.
  double bound() const;
};

struct RgbParams {
  std::array<double, 3> background{0.5, 0.5, 0.5};
  std::array<double, 3> object{0.9, 0.2, 0.2};
  std::vector<std::array<double, 3>> distractors;
  double texture = 0.1;                // background texture amplitude
  std::array<double, 4> texture_freq{};  // two sinusoids: (fx, fy) pairs
  double brightness = 1.0;             // < 0.3 for low-light scenes
  double noise = 0.01;
};

struct DepthParams {
  double ramp_top = 0.2, ramp_bottom = 0.45;  // background plane
  double object = 0.8;
  std::vector<double> distractors;
  int blur = 1;
  double noise = 0.02;
};

struct ThermalParams {
  double ambient = 0.25;
  double ambient_wave = 0.05;
  double object = 0.8;
  std::vector<double> distractors;
  int blur = 2;
  double noise = 0.02;
};

struct SceneSpec {
  int size = 64;
  Shape object;
  std::vector<Shape> distractors;
  RgbParams rgb;
  DepthParams depth;
  ThermalParams thermal;
  std::uint64_t seed = 0;
};

// Draws a random scene that satisfies the area and containment rules.
SceneSpec random_scene(std::uint64_t seed, int size = 64);

// Throws Error(kInvalidArgument) when the scene violates the object rules.
void check_scene(const SceneSpec& spec);

Image render_mask(const SceneSpec& spec);
Image render_modality(const SceneSpec& spec, const ModalityKind& m);
MultimodalSample render_sample(const SceneSpec& spec, const std::vector<ModalityKind>& modalities,
                               const std::string& id = "");

// Combo label -> fraction. Fractions must be non-negative and sum to 1.
using Mix = std::map<std::string, double>;
Mix uniform_mix();
// "RGB=0.5,RGB-D=0.5". Throws Error(kInvalidArgument) on bad labels or sums.
Mix parse_mix(const std::string& text);
// Largest-remainder allocation of n samples, in standard combo order.
std::vector<std::pair<std::string, int>> allocate(const Mix& mix, int n);

struct DatasetSummary {
  int samples = 0;
  std::map<std::string, int> per_combo;
  // Mean threshold-sweep F-beta of the raw depth map used as a predictor.
  double depth_baseline_fbeta = 0.0;
};

inline constexpr double kDegenerateBaseline = 0.9;

// Renders and writes one split. Throws Error(kIo) on unwritable paths and
// Error(kInvalidArgument) when the depth baseline reaches kDegenerateBaseline.
DatasetSummary build_dataset(const std::string& root, const std::string& split, int n, const Mix& mix,
                             std::uint64_t seed, int size = 64);

std::vector<metrics::LabelledSample> load_dataset(const std::string& root, const std::string& split);

// Re-reads every manifest entry; returns one message per problem.
std::vector<std::string> audit_dataset(const std::string& root, const std::string& split, int size);

std::string modality_file(const ModalityKind& m);

}  // namespace matsod::synth
