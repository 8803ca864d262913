// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#include "synthdata/synthdata.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "core/error.hpp"
#include "core/image_io.hpp"

namespace matsod::synth {

namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t combine(std::uint64_t a, std::uint64_t b) { return splitmix(a ^ splitmix(b)); }

std::uint64_t hash_string(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Small portable generator so rendered files are identical across standard
// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return splitmix(state_);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) { return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1)); }
  bool chance(double p) { return uniform() < p; }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
};

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

std::array<double, 3> random_colour(Rng& rng, double lo, double hi) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

double colour_distance(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

int mask_area(const Shape& s, int size) {
  int area = 0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) area += s.contains(x + 0.5, y + 0.5);
  }
  return area;
}

bool inside_canvas(const Shape& s, int size) {
  const double b = s.bound();
  return s.cx - b >= 0.0 && s.cy - b >= 0.0 && s.cx + b <= size && s.cy + b <= size;
}

Shape random_shape(Rng& rng, double radius, int size) {
  Shape s;
  s.type = static_cast<ShapeType>(rng.integer(0, 2));
  const double aspect = rng.uniform(0.6, 1.6);
  s.rx = radius * std::sqrt(aspect);
  s.ry = radius / std::sqrt(aspect);
  s.angle = rng.uniform(0.0, std::numbers::pi);
  if (s.type == ShapeType::kPolygon) {
    const int n = rng.integer(5, 8);
    for (int i = 0; i < n; ++i) s.radii.push_back(rng.uniform(0.7, 1.0));
    // Polygons lose area to their chords; compensate so target areas hold.
    s.rx *= 1.15;
    s.ry *= 1.15;
  } else if (s.type == ShapeType::kRectangle) {
    s.rx *= 0.886;
    s.ry *= 0.886;
  }
  const double b = s.bound();
  const double lo = b + 1.0;
  const double hi = size - b - 1.0;
  s.cx = lo < hi ? rng.uniform(lo, hi) : size / 2.0;
  s.cy = lo < hi ? rng.uniform(lo, hi) : size / 2.0;
  return s;
}

double ramp_at(const DepthParams& p, double y, int size) {
  return p.ramp_top + (p.ramp_bottom - p.ramp_top) * y / std::max(1, size - 1);
}

void box_blur(std::vector<double>& v, int size, int radius) {
  if (radius <= 0) return;
  std::vector<double> tmp(v.size());
  auto pass = [&](const std::vector<double>& src, std::vector<double>& dst, bool horizontal) {
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        double acc = 0.0;
        for (int d = -radius; d <= radius; ++d) {
          const int xx = horizontal ? std::clamp(x + d, 0, size - 1) : x;
          const int yy = horizontal ? y : std::clamp(y + d, 0, size - 1);
          acc += src[static_cast<std::size_t>(yy) * size + xx];
        }
        dst[static_cast<std::size_t>(y) * size + x] = acc / (2 * radius + 1);
      }
    }
  };
  pass(v, tmp, true);
  pass(tmp, v, false);
}

// Index of the topmost shape at a pixel: -1 background, 0 object, 1.. distractors.
std::vector<int> label_map(const SceneSpec& spec) {
  const int n = spec.size;
  std::vector<int> labels(static_cast<std::size_t>(n) * n, -1);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      int& l = labels[static_cast<std::size_t>(y) * n + x];
      for (std::size_t d = 0; d < spec.distractors.size(); ++d) {
        if (spec.distractors[d].contains(x + 0.5, y + 0.5)) l = static_cast<int>(d) + 1;
      }
      if (spec.object.contains(x + 0.5, y + 0.5)) l = 0;
    }
  }
  return labels;
}

Rng modality_rng(const SceneSpec& spec, const ModalityKind& m) {
  return Rng(combine(spec.seed, hash_string("noise:" + m.tag)));
}

Image render_rgb(const SceneSpec& spec) {
  const int n = spec.size;
  const auto& p = spec.rgb;
  const auto labels = label_map(spec);
  Rng rng = modality_rng(spec, kRgb);
  Image img(n, n, 3);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const int l = labels[static_cast<std::size_t>(y) * n + x];
      const double tex = p.texture * 0.5 *
                         (std::sin(p.texture_freq[0] * x + p.texture_freq[1] * y) +
                          std::sin(p.texture_freq[2] * x - p.texture_freq[3] * y));
      for (int c = 0; c < 3; ++c) {
        double v;
        if (l < 0) {
          v = p.background[c] + tex;
        } else if (l == 0) {
          v = p.object[c] * (0.9 + 0.1 * (y - spec.object.cy) / std::max(1.0, spec.object.ry));
        } else {
          v = p.distractors[static_cast<std::size_t>(l - 1)][c];
        }
        img.at(y, x, c) = clamp01(v * p.brightness + p.noise * rng.normal());
      }
    }
  }
  return img;
}

Image render_depth(const SceneSpec& spec) {
  const int n = spec.size;
  const auto& p = spec.depth;
  const auto labels = label_map(spec);
  Rng rng = modality_rng(spec, kDepth);
  std::vector<double> v(static_cast<std::size_t>(n) * n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const int l = labels[static_cast<std::size_t>(y) * n + x];
      v[static_cast<std::size_t>(y) * n + x] =
          l < 0 ? ramp_at(p, y, n) : l == 0 ? p.object : p.distractors[static_cast<std::size_t>(l - 1)];
    }
  }
  box_blur(v, n, p.blur);
  Image img(n, n, 1);
  for (std::size_t i = 0; i < v.size(); ++i) img.data[i] = clamp01(v[i] + p.noise * rng.normal());
  return img;
}

Image render_thermal(const SceneSpec& spec) {
  const int n = spec.size;
  const auto& p = spec.thermal;
  const auto labels = label_map(spec);
  Rng rng = modality_rng(spec, kThermal);
  std::vector<double> v(static_cast<std::size_t>(n) * n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const int l = labels[static_cast<std::size_t>(y) * n + x];
      v[static_cast<std::size_t>(y) * n + x] =
          l < 0 ? p.ambient + p.ambient_wave * std::sin(0.11 * x + 0.07 * y)
                : l == 0 ? p.object : p.distractors[static_cast<std::size_t>(l - 1)];
    }
  }
  box_blur(v, n, p.blur);
  Image img(n, n, 1);
  for (std::size_t i = 0; i < v.size(); ++i) img.data[i] = clamp01(v[i] + p.noise * rng.normal());
  return img;
}

std::string pad_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05d", i);
  return buf;
}

ModalityKind modality_from_file(const std::string& stem) {
  std::string tag = stem;
  for (auto& c : tag) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return ModalityKind{tag};
}

}  // namespace

bool Shape::contains(double x, double y) const {
  const double dx = x - cx, dy = y - cy;
  const double c = std::cos(angle), s = std::sin(angle);
  const double u = (c * dx + s * dy) / rx;
  const double v = (-s * dx + c * dy) / ry;
  switch (type) {
    case ShapeType::kEllipse:
      return u * u + v * v <= 1.0;
    case ShapeType::kRectangle:
      return std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
    case ShapeType::kPolygon: {
      const std::size_t n = radii.size();
      bool in = false;
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const double ai = 2.0 * std::numbers::pi * static_cast<double>(i) / n;
        const double aj = 2.0 * std::numbers::pi * static_cast<double>(j) / n;
        const double xi = radii[i] * std::cos(ai), yi = radii[i] * std::sin(ai);
        const double xj = radii[j] * std::cos(aj), yj = radii[j] * std::sin(aj);
        if ((yi > v) != (yj > v) && u < (xj - xi) * (v - yi) / (yj - yi) + xi) in = !in;
      }
      return in;
    }
  }
  return false;
}

double Shape::bound() const {
  if (type == ShapeType::kRectangle) return std::sqrt(rx * rx + ry * ry);
  return std::max(rx, ry);
}

SceneSpec random_scene(std::uint64_t seed, int size) {
  if (size < 16) fail(ErrorKind::kInvalidArgument, "scene size must be at least 16, got " + std::to_string(size));
  SceneSpec spec;
  spec.size = size;
  spec.seed = seed;
  Rng rng(combine(seed, hash_string("scene")));
  const double canvas = static_cast<double>(size) * size;

  for (int attempt = 0;; ++attempt) {
    const double target = rng.uniform(0.04, 0.28);
    Shape s = random_shape(rng, std::sqrt(target * canvas / std::numbers::pi), size);
    const double frac = mask_area(s, size) / canvas;
    if (inside_canvas(s, size) && frac >= kMinObjectArea && frac <= kMaxObjectArea) {
      spec.object = s;
      break;
    }
    if (attempt > 1000) fail(ErrorKind::kInvalidArgument, "random_scene: could not place an object");
  }

  const double obj_radius = std::sqrt(mask_area(spec.object, size) / std::numbers::pi);
  const int count = rng.integer(1, 3);
  for (int d = 0; d < count; ++d) {
    for (int attempt = 0; attempt < 30; ++attempt) {
      Shape s = random_shape(rng, obj_radius * rng.uniform(0.25, 0.55), size);
      const double gap = std::hypot(s.cx - spec.object.cx, s.cy - spec.object.cy);
      if (inside_canvas(s, size) && gap > s.bound() + spec.object.bound()) {
        spec.distractors.push_back(s);
        break;
      }
    }
  }
  const std::size_t nd = spec.distractors.size();

  RgbParams& rgb = spec.rgb;
  rgb.background = random_colour(rng, 0.15, 0.85);
  const double mode = rng.uniform();
  const bool low_light = mode < 0.2;
  const bool camouflage = mode >= 0.2 && mode < 0.35;
  if (camouflage) {
    for (int c = 0; c < 3; ++c) rgb.object[c] = clamp01(rgb.background[c] + rng.uniform(-0.12, 0.12));
  } else {
    do {
      rgb.object = random_colour(rng, 0.05, 0.95);
    } while (colour_distance(rgb.object, rgb.background) < 0.45);
  }
  for (std::size_t d = 0; d < nd; ++d) rgb.distractors.push_back(random_colour(rng, 0.1, 0.9));
  rgb.texture = rng.uniform(0.03, 0.2);
  for (auto& f : rgb.texture_freq) f = rng.uniform(0.05, 0.4);
  rgb.brightness = low_light ? rng.uniform(0.12, 0.25) : rng.uniform(0.8, 1.0);
  rgb.noise = low_light ? 0.03 : 0.01;

  DepthParams& dp = spec.depth;
  dp.ramp_top = rng.uniform(0.1, 0.3);
  dp.ramp_bottom = dp.ramp_top + rng.uniform(0.1, 0.3);
  const bool poor_depth = rng.chance(0.25);
  if (poor_depth) {
    dp.object = ramp_at(dp, spec.object.cy, size) + rng.uniform(0.05, 0.12);
    dp.noise = rng.uniform(0.05, 0.1);
  } else {
    dp.object = rng.uniform(0.6, 0.9);
    dp.noise = rng.uniform(0.01, 0.04);
  }
  for (std::size_t d = 0; d < nd; ++d) {
    const double near = rng.uniform(-0.08, 0.05);
    const double far = rng.uniform(0.0, 0.1);
    dp.distractors.push_back(rng.chance(0.35) ? dp.object + near
                                              : ramp_at(dp, spec.distractors[d].cy, size) + far);
  }
  dp.blur = rng.integer(0, 2);

  ThermalParams& tp = spec.thermal;
  tp.ambient = rng.uniform(0.15, 0.35);
  tp.ambient_wave = rng.uniform(0.02, 0.08);
  tp.object = rng.chance(0.2) ? tp.ambient + rng.uniform(0.08, 0.15) : rng.uniform(0.6, 0.95);
  for (std::size_t d = 0; d < nd; ++d) {
    const double hot = rng.uniform(0.5, 0.9);
    const double cool = tp.ambient + rng.uniform(0.0, 0.08);
    tp.distractors.push_back(rng.chance(0.4) ? hot : cool);
  }
  tp.blur = rng.integer(1, 3);
  tp.noise = rng.uniform(0.01, 0.04);
  return spec;
}

void check_scene(const SceneSpec& spec) {
  const double canvas = static_cast<double>(spec.size) * spec.size;
  const double frac = mask_area(spec.object, spec.size) / canvas;
  if (frac < kMinObjectArea || frac > kMaxObjectArea) {
    fail(ErrorKind::kInvalidArgument, "scene: object covers " + std::to_string(100.0 * frac) +
                                          "% of the canvas, allowed 2%..40%");
  }
  if (!inside_canvas(spec.object, spec.size)) fail(ErrorKind::kInvalidArgument, "scene: object leaves the canvas");
  const std::size_t nd = spec.distractors.size();
  if (spec.rgb.distractors.size() != nd || spec.depth.distractors.size() != nd ||
      spec.thermal.distractors.size() != nd) {
    fail(ErrorKind::kInvalidArgument, "scene: per-modality distractor parameters do not match distractor count");
  }
  if (spec.object.type == ShapeType::kPolygon && spec.object.radii.size() < 3) {
    fail(ErrorKind::kInvalidArgument, "scene: polygon needs at least 3 vertices");
  }
}

Image render_mask(const SceneSpec& spec) {
  const int n = spec.size;
  Image mask(n, n, 1);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) mask.at(y, x) = spec.object.contains(x + 0.5, y + 0.5) ? 1.0 : 0.0;
  }
  return mask;
}

Image render_modality(const SceneSpec& spec, const ModalityKind& m) {
  if (m == kRgb) return render_rgb(spec);
  if (m == kDepth) return render_depth(spec);
  if (m == kThermal) return render_thermal(spec);
  fail(ErrorKind::kInvalidArgument, "no renderer for modality " + m.tag + " (known: RGB, D, T)");
}

MultimodalSample render_sample(const SceneSpec& spec, const std::vector<ModalityKind>& modalities,
                               const std::string& id) {
  if (modalities.empty()) fail(ErrorKind::kInvalidArgument, "render_sample: no modalities requested");
  check_scene(spec);
  MultimodalSample s;
  s.id = id;
  for (const auto& m : modalities) s.images[m] = render_modality(spec, m);
  s.ground_truth = render_mask(spec);
  return s;
}

Mix uniform_mix() {
  Mix mix;
  for (const auto& c : standard_combos()) mix[c] = 1.0 / static_cast<double>(standard_combos().size());
  return mix;
}

Mix parse_mix(const std::string& text) {
  Mix mix;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) fail(ErrorKind::kInvalidArgument, "mix entry '" + item + "' is not COMBO=FRACTION");
    const std::string label = item.substr(0, eq);
    const auto mods = parse_combo(label, default_modalities());
    const std::string canonical = combo_label(mods, default_modalities());
    double frac = 0.0;
    try {
      std::size_t used = 0;
      frac = std::stod(item.substr(eq + 1), &used);
      if (used != item.size() - eq - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      fail(ErrorKind::kInvalidArgument, "mix entry '" + item + "' has a non-numeric fraction");
    }
    if (frac < 0.0) fail(ErrorKind::kInvalidArgument, "mix fraction for " + canonical + " is negative");
    if (mix.count(canonical)) fail(ErrorKind::kInvalidArgument, "mix lists " + canonical + " twice");
    mix[canonical] = frac;
  }
  if (mix.empty()) fail(ErrorKind::kInvalidArgument, "mix is empty");
  double total = 0.0;
  for (const auto& [_, f] : mix) total += f;
  if (std::abs(total - 1.0) > 1e-6) {
    fail(ErrorKind::kInvalidArgument, "mix fractions sum to " + std::to_string(total) + ", expected 1");
  }
  return mix;
}

std::vector<std::pair<std::string, int>> allocate(const Mix& mix, int n) {
  if (n < 0) fail(ErrorKind::kInvalidArgument, "sample count must be non-negative");
  std::vector<std::string> order;
  for (const auto& c : standard_combos()) {
    if (mix.count(c)) order.push_back(c);
  }
  for (const auto& [c, _] : mix) {
    if (std::find(order.begin(), order.end(), c) == order.end()) order.push_back(c);
  }
  std::vector<std::pair<std::string, int>> out;
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const double exact = mix.at(order[i]) * n;
    const int base = static_cast<int>(std::floor(exact + 1e-9));
    out.emplace_back(order[i], base);
    assigned += base;
    remainders.emplace_back(exact - base, i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n && k < remainders.size(); ++k, ++assigned) out[remainders[k].second].second++;
  return out;
}

std::string modality_file(const ModalityKind& m) {
  std::string name = m.tag;
  for (auto& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return name + ".png";
}

DatasetSummary build_dataset(const std::string& root, const std::string& split, int n, const Mix& mix,
                             std::uint64_t seed, int size) {
  if (split.empty() || split.find('/') != std::string::npos) {
    fail(ErrorKind::kInvalidArgument, "split name must be a single path component");
  }
  const fs::path dir = fs::path(root) / split;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());

  DatasetSummary summary;
  std::ostringstream manifest;
  double baseline = 0.0;
  const std::uint64_t split_seed = combine(seed, hash_string(split));
  int index = 0;
  for (const auto& [combo, count] : allocate(mix, n)) {
    const auto mods = parse_combo(combo, default_modalities());
    for (int k = 0; k < count; ++k, ++index) {
      const std::string id = pad_id(index);
      const SceneSpec spec = random_scene(combine(split_seed, static_cast<std::uint64_t>(index)), size);
      const MultimodalSample sample = render_sample(spec, mods, id);
      const fs::path rel = fs::path(combo) / id;
      fs::create_directories(dir / rel, ec);
      if (ec) fail(ErrorKind::kIo, "cannot create " + (dir / rel).string() + ": " + ec.message());
      manifest << id << '\t' << combo;
      for (const auto& m : mods) {
        write_png((dir / rel / modality_file(m)).string(), sample.images.at(m));
        manifest << '\t' << (rel / modality_file(m)).generic_string();
      }
      write_png((dir / rel / "gt.png").string(), sample.ground_truth);
      manifest << '\t' << (rel / "gt.png").generic_string() << '\n';

      const Image depth = sample.images.count(kDepth) ? sample.images.at(kDepth) : render_modality(spec, kDepth);
      baseline += metrics::f_beta(image_to_matrix(depth), image_to_matrix(sample.ground_truth));
      summary.per_combo[combo]++;
      summary.samples++;
    }
  }
  std::ofstream out(dir / "manifest.tsv", std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + (dir / "manifest.tsv").string());
  out << manifest.str();
  if (!out.flush()) fail(ErrorKind::kIo, "write failed for " + (dir / "manifest.tsv").string());

  summary.depth_baseline_fbeta = summary.samples ? baseline / summary.samples : 0.0;
  if (summary.samples > 0 && summary.depth_baseline_fbeta >= kDegenerateBaseline) {
    fail(ErrorKind::kInvalidArgument, "generated data is degenerate: depth threshold baseline reaches F=" +
                                          std::to_string(summary.depth_baseline_fbeta));
  }
  return summary;
}

namespace {

struct ManifestEntry {
  std::string id, combo;
  std::vector<std::string> paths;
};

std::vector<ManifestEntry> read_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.tsv");
  if (!in) fail(ErrorKind::kIo, "cannot read " + (dir / "manifest.tsv").string());
  std::vector<ManifestEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    ManifestEntry e;
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() < 4) {
      fail(ErrorKind::kFormat, (dir / "manifest.tsv").string() + ":" + std::to_string(lineno) +
                                   ": expected id, combo and at least two paths");
    }
    e.id = fields[0];
    e.combo = fields[1];
    e.paths.assign(fields.begin() + 2, fields.end());
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace

std::vector<metrics::LabelledSample> load_dataset(const std::string& root, const std::string& split) {
  const fs::path dir = fs::path(root) / split;
  std::vector<metrics::LabelledSample> out;
  for (const auto& e : read_manifest(dir)) {
    metrics::LabelledSample item;
    item.combo = e.combo;
    item.sample.id = e.id;
    for (const auto& rel : e.paths) {
      const fs::path p = dir / rel;
      Image img = read_png(p.string());
      if (p.stem() == "gt") {
        if (img.channels != 1) fail(ErrorKind::kFormat, p.string() + ": ground truth must be single-channel");
        for (auto& v : img.data) v = v > 0.5 ? 1.0 : 0.0;
        item.sample.ground_truth = std::move(img);
      } else {
        item.sample.images[modality_from_file(p.stem().string())] = std::move(img);
      }
    }
    if (item.sample.ground_truth.data.empty()) fail(ErrorKind::kFormat, "sample " + e.id + " has no gt.png");
    out.push_back(std::move(item));
  }
  return out;
}

std::vector<std::string> audit_dataset(const std::string& root, const std::string& split, int size) {
  const fs::path dir = fs::path(root) / split;
  std::vector<std::string> problems;
  for (const auto& e : read_manifest(dir)) {
    std::vector<ModalityKind> present;
    bool has_gt = false;
    for (const auto& rel : e.paths) {
      const fs::path p = dir / rel;
      if (!fs::exists(p)) {
        problems.push_back(e.id + ": missing " + rel);
        continue;
      }
      Image img;
      try {
        img = read_png(p.string());
      } catch (const Error& err) {
        problems.push_back(e.id + ": " + err.what());
        continue;
      }
      if (img.height != size || img.width != size) {
        problems.push_back(e.id + ": " + rel + " is " + std::to_string(img.height) + "x" +
                           std::to_string(img.width) + ", expected " + std::to_string(size) + "x" +
                           std::to_string(size));
      }
      if (p.stem() == "gt") {
        has_gt = true;
        for (double v : img.data) {
          if (v != 0.0 && v != 1.0) {
            problems.push_back(e.id + ": ground truth is not binary");
            break;
          }
        }
      } else {
        present.push_back(modality_from_file(p.stem().string()));
      }
    }
    if (!has_gt) problems.push_back(e.id + ": no ground truth listed");
    std::vector<ModalityKind> expected;
    try {
      expected = parse_combo(e.combo, default_modalities());
    } catch (const Error& err) {
      problems.push_back(e.id + ": " + err.what());
      continue;
    }
    std::sort(present.begin(), present.end());
    std::sort(expected.begin(), expected.end());
    if (present != expected) problems.push_back(e.id + ": files do not match combo " + e.combo);
  }
  return problems;
}

}  // namespace matsod::synth
