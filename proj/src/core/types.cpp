// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#include "core/types.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "core/error.hpp"

namespace matsod {

namespace {

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string dims(int h, int w) { return std::to_string(h) + "×" + std::to_string(w); }

}  // namespace

std::vector<ModalityKind> default_modalities() { return {kRgb, kDepth, kThermal}; }

ModalityKind parse_modality(const std::string& text, const std::vector<ModalityKind>& known) {
  const std::string want = upper(trim(text));
  for (const auto& m : known) {
    if (upper(m.tag) == want) return m;
  }
  std::string list;
  for (const auto& m : known) list += (list.empty() ? "" : ", ") + m.tag;
  fail(ErrorKind::kInvalidArgument, "unknown modality '" + text + "'; known modalities: " + list);
}

Image unify_channels(const Image& image) {
  if (image.channels == 3) return image;
  if (image.channels != 1) {
    fail(ErrorKind::kShape, "unify_channels: expected 1 or 3 channels, got " + std::to_string(image.channels));
  }
  Image out(image.height, image.width, 3);
  for (std::size_t i = 0; i < image.data.size(); ++i) {
    out.data[3 * i] = image.data[i];
    out.data[3 * i + 1] = image.data[i];
    out.data[3 * i + 2] = image.data[i];
  }
  return out;
}

Image resize_bilinear(const Image& image, int height, int width) {
  if (image.height == height && image.width == width) return image;
  Image out(height, width, image.channels);
  const double sy = static_cast<double>(image.height) / height;
  const double sx = static_cast<double>(image.width) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::max(0.0, (y + 0.5) * sy - 0.5);
    const int y0 = std::min(static_cast<int>(fy), image.height - 1);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double ly = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::max(0.0, (x + 0.5) * sx - 0.5);
      const int x0 = std::min(static_cast<int>(fx), image.width - 1);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double lx = fx - x0;
      for (int c = 0; c < image.channels; ++c) {
        out.at(y, x, c) = (1 - ly) * ((1 - lx) * image.at(y0, x0, c) + lx * image.at(y0, x1, c)) +
                          ly * ((1 - lx) * image.at(y1, x0, c) + lx * image.at(y1, x1, c));
      }
    }
  }
  return out;
}

ad::Matrix image_to_matrix(const Image& image) {
  ad::Matrix m(static_cast<Eigen::Index>(image.height) * image.width, image.channels);
  std::copy(image.data.begin(), image.data.end(), m.data());
  return m;
}

Image matrix_to_image(const ad::Matrix& m, int height, int width) {
  if (m.rows() != static_cast<Eigen::Index>(height) * width) {
    fail(ErrorKind::kShape, "matrix_to_image: row count does not match " + dims(height, width));
  }
  Image out(height, width, static_cast<int>(m.cols()));
  std::copy(m.data(), m.data() + m.size(), out.data.begin());
  return out;
}

std::vector<std::string> validate_sample(const MultimodalSample& sample, const std::vector<ModalityKind>& known) {
  std::vector<std::string> problems;
  if (sample.images.empty()) {
    problems.emplace_back("no modalities present");
  }
  if (sample.images.size() > known.size()) {
    problems.push_back("too many modalities: " + std::to_string(sample.images.size()) + " present, " +
                       std::to_string(known.size()) + " known");
  }

  int ref_h = sample.ground_truth.height;
  int ref_w = sample.ground_truth.width;
  if (ref_h == 0 || ref_w == 0) {
    problems.emplace_back("ground_truth is empty");
    if (!sample.images.empty()) {
      ref_h = sample.images.begin()->second.height;
      ref_w = sample.images.begin()->second.width;
    }
  } else {
    if (sample.ground_truth.channels != 1) {
      problems.push_back("ground_truth must have 1 channel, has " + std::to_string(sample.ground_truth.channels));
    }
    const bool binary = std::all_of(sample.ground_truth.data.begin(), sample.ground_truth.data.end(),
                                    [](double v) { return v == 0.0 || v == 1.0; });
    if (!binary) problems.emplace_back("ground_truth is not binary");
  }

  for (const auto& [kind, image] : sample.images) {
    if (std::find(known.begin(), known.end(), kind) == known.end()) {
      problems.push_back("images: unknown modality " + kind.tag);
    }
    if (image.height != ref_h || image.width != ref_w) {
      problems.push_back("images not co-registered: " + kind.tag + " is " + dims(image.height, image.width) +
                         ", expected " + dims(ref_h, ref_w));
    }
    if (image.channels != 1 && image.channels != 3) {
      problems.push_back("images: " + kind.tag + " has " + std::to_string(image.channels) +
                         " channels, expected 1 or 3");
    }
    const bool unit = std::all_of(image.data.begin(), image.data.end(),
                                  [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; });
    if (!unit) problems.push_back("images: " + kind.tag + " has values outside [0, 1]");
  }
  return problems;
}

std::string combo_label(const std::vector<ModalityKind>& present, const std::vector<ModalityKind>& order) {
  std::string out;
  for (const auto& m : order) {
    if (std::find(present.begin(), present.end(), m) != present.end()) out += (out.empty() ? "" : "-") + m.tag;
  }
  return out;
}

std::vector<ModalityKind> parse_combo(const std::string& label, const std::vector<ModalityKind>& known) {
  std::vector<ModalityKind> out;
  std::stringstream ss(label);
  std::string part;
  while (std::getline(ss, part, '-')) {
    const ModalityKind m = parse_modality(part, known);
    if (std::find(out.begin(), out.end(), m) != out.end()) {
      fail(ErrorKind::kInvalidArgument, "modality " + m.tag + " repeated in '" + label + "'");
    }
    out.push_back(m);
  }
  if (out.empty()) fail(ErrorKind::kInvalidArgument, "empty modality combination");
  return out;
}

const std::vector<std::string>& standard_combos() {
  static const std::vector<std::string> combos{"RGB", "D", "T", "RGB-D", "RGB-T", "D-T", "RGB-D-T"};
  return combos;
}

void check_pyramid_chain(const std::array<LevelShape, kLevels>& shapes) {
  for (int l = 1; l < kLevels; ++l) {
    const auto& a = shapes[l - 1];
    const auto& b = shapes[l];
    if (a.height != 2 * b.height || a.width != 2 * b.width) {
      fail(ErrorKind::kShape, "pyramid level " + std::to_string(l + 1) + " is " + dims(b.height, b.width) +
                                  ", expected half of level " + std::to_string(l) + " (" +
                                  dims(a.height, a.width) + ")");
    }
    if (a.channels >= b.channels) {
      fail(ErrorKind::kShape, "pyramid widths must strictly increase (level " + std::to_string(l) + ": " +
                                  std::to_string(a.channels) + ", level " + std::to_string(l + 1) + ": " +
                                  std::to_string(b.channels) + ")");
    }
  }
  for (const auto& s : shapes) {
    if (s.height <= 0 || s.width <= 0 || s.channels <= 0) fail(ErrorKind::kShape, "empty pyramid level");
  }
}

FusionPlan FusionPlan::parse(const std::string& raw) {
  std::string text = raw;
  // Accept the typographic minus used in tables.
  for (std::size_t pos; (pos = text.find("−")) != std::string::npos;) text.replace(pos, 3, "-");
  text = trim(text);

  std::array<int, kLevels> owner{-1, -1, -1, -1};
  auto assign = [&](const std::string& list, FusionKind kind) {
    const std::string t = trim(list);
    if (t.empty() || t == "-") return;
    std::stringstream ss(t);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      int level = 0;
      try {
        std::size_t used = 0;
        level = std::stoi(item, &used);
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        fail(ErrorKind::kInvalidArgument, "fusion plan '" + raw + "': bad level '" + item + "'");
      }
      if (level < 1 || level > kLevels) {
        fail(ErrorKind::kInvalidArgument, "fusion plan '" + raw + "': level " + item + " outside 1..4");
      }
      if (owner[level - 1] != -1) {
        fail(ErrorKind::kInvalidArgument, "fusion plan '" + raw + "': level " + item + " assigned twice");
      }
      owner[level - 1] = static_cast<int>(kind);
    }
  };

  const auto bar = text.find('|');
  if (bar != std::string::npos) {
    assign(text.substr(0, bar), FusionKind::kSdfm);
    assign(text.substr(bar + 1), FusionKind::kCdfm);
  } else {
    std::stringstream ss(text);
    std::string clause;
    bool any = false;
    while (ss >> clause) {
      const auto eq = clause.find('=');
      const std::string key = eq == std::string::npos ? clause : upper(clause.substr(0, eq));
      if (eq == std::string::npos || (key != "SDFM" && key != "CDFM")) {
        fail(ErrorKind::kInvalidArgument,
             "fusion plan '" + raw + "': expected 'sdfm=<levels> cdfm=<levels>' or '<levels>|<levels>'");
      }
      assign(clause.substr(eq + 1), key == "SDFM" ? FusionKind::kSdfm : FusionKind::kCdfm);
      any = true;
    }
    if (!any) fail(ErrorKind::kInvalidArgument, "empty fusion plan");
  }

  FusionPlan plan;
  for (int l = 0; l < kLevels; ++l) {
    if (owner[l] == -1) {
      fail(ErrorKind::kInvalidArgument, "fusion plan '" + raw + "': level " + std::to_string(l + 1) + " unassigned");
    }
    plan.levels[l] = static_cast<FusionKind>(owner[l]);
  }
  return plan;
}

std::string FusionPlan::to_string() const {
  std::string s, c;
  for (int l = 0; l < kLevels; ++l) {
    std::string& dst = levels[l] == FusionKind::kSdfm ? s : c;
    dst += (dst.empty() ? "" : ",") + std::to_string(l + 1);
  }
  std::string out;
  if (!s.empty()) out += "sdfm=" + s;
  if (!c.empty()) out += (out.empty() ? "" : " ") + std::string("cdfm=") + c;
  return out;
}

}  // namespace matsod
