// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <compare>
#include <map>
#include <string>
#include <vector>

#include "autodiff/tensor.hpp"

namespace matsod {

inline constexpr int kLevels = 4;

// Modality label. The canonical set is RGB/D/T but any tag works as long as the
// model was built with it.
struct ModalityKind {
  std::string tag;
  auto operator<=>(const ModalityKind&) const = default;
};

inline const ModalityKind kRgb{"RGB"};
inline const ModalityKind kDepth{"D"};
inline const ModalityKind kThermal{"T"};

std::vector<ModalityKind> default_modalities();
// Case-insensitive lookup against a known list; throws listing the known tags.
ModalityKind parse_modality(const std::string& text, const std::vector<ModalityKind>& known);

// Interleaved HWC image with unit-interval intensities.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

  double& at(int y, int x, int c = 0) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  double at(int y, int x, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool operator==(const Image&) const = default;
};

// Replicates a single channel into three; three-channel input passes through.
Image unify_channels(const Image& image);
// Bilinear resample (half-pixel centres), used for I/O-side resizing.
Image resize_bilinear(const Image& image, int height, int width);
// (h*w) x c matrix view of an image for the model.
ad::Matrix image_to_matrix(const Image& image);
Image matrix_to_image(const ad::Matrix& m, int height, int width);

struct MultimodalSample {
  std::string id;
  std::map<ModalityKind, Image> images;
  Image ground_truth;  // single channel, values in {0, 1}
};

// Empty result iff the sample is well formed.
std::vector<std::string> validate_sample(const MultimodalSample& sample,
                                         const std::vector<ModalityKind>& known = default_modalities());

// "RGB-D-T" style label with tags ordered as in `order`.
std::string combo_label(const std::vector<ModalityKind>& present, const std::vector<ModalityKind>& order);
std::vector<ModalityKind> parse_combo(const std::string& label, const std::vector<ModalityKind>& known);
// The seven subsets over {RGB, D, T} in reporting order.
const std::vector<std::string>& standard_combos();

struct LevelShape {
  int height = 0;
  int width = 0;
  int channels = 0;
  auto operator<=>(const LevelShape&) const = default;
};

// Four (h*w) x c maps, strides doubling per level.
struct FeaturePyramid {
  std::array<ad::Var, kLevels> levels;
  std::array<LevelShape, kLevels> shapes;
};

// Throws unless sizes halve level to level and widths strictly increase.
void check_pyramid_chain(const std::array<LevelShape, kLevels>& shapes);

struct SaliencyPrediction {
  int height = 0;
  int width = 0;
  // maps[0] is the primary S1, maps[1..3] are S2..S4; each (h*w) x 1 in [0, 1].
  std::array<ad::Var, kLevels> maps;

  const ad::Var& primary() const { return maps[0]; }
};

enum class FusionKind { kSdfm, kCdfm };

struct FusionPlan {
  std::array<FusionKind, kLevels> levels{FusionKind::kSdfm, FusionKind::kSdfm, FusionKind::kCdfm,
                                         FusionKind::kCdfm};

  // Accepts "sdfm=1,2 cdfm=3,4" and the tabular "1,2|3,4" / "-|1,2,3,4" forms.
  static FusionPlan parse(const std::string& text);
  std::string to_string() const;
  bool operator==(const FusionPlan&) const = default;
};

}  // namespace matsod
