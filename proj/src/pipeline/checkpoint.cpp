// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#include "pipeline/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "core/error.hpp"

namespace matsod::pipeline {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'M', 'A', 'T', 'S', 'O', 'D', 'T', '\x01'};
constexpr const char* kHeader = "matsod-checkpoint";

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
void put_le(std::string& out, T v) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(const char* p) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

struct ParamRecord {
  std::string name;
  long long rows = 0, cols = 0;
  std::string file;
};

struct Manifest {
  KeyValues config;
  std::vector<ParamRecord> params;
};

Manifest read_manifest(const fs::path& dir) {
  const fs::path path = dir / "manifest.txt";
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot read checkpoint manifest " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::kFormat, path.string() + ": empty manifest");
  {
    std::istringstream hs(line);
    std::string magic;
    int version = 0;
    if (!(hs >> magic >> version) || magic != kHeader) {
      fail(ErrorKind::kFormat, path.string() + ": not a matsod checkpoint");
    }
    if (version != kCheckpointVersion) {
      fail(ErrorKind::kFormat, path.string() + ": checkpoint version " + std::to_string(version) +
                                   ", this build reads version " + std::to_string(kCheckpointVersion));
    }
  }
  Manifest m;
  std::string config_text;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.rfind("config ", 0) == 0) {
      config_text += line.substr(7) + "\n";
    } else if (line.rfind("param ", 0) == 0) {
      std::istringstream ls(line.substr(6));
      ParamRecord r;
      std::string dtype;
      if (!(ls >> r.name >> r.rows >> r.cols >> dtype >> r.file) || dtype != "f64") {
        fail(ErrorKind::kFormat, path.string() + ":" + std::to_string(lineno) + ": malformed param line");
      }
      m.params.push_back(r);
    } else if (!line.empty()) {
      fail(ErrorKind::kFormat, path.string() + ":" + std::to_string(lineno) + ": unexpected line");
    }
  }
  m.config = parse_key_values(config_text);
  return m;
}

ad::Matrix read_blob(const fs::path& path, const std::string& name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read blob for " + name + ": " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 24 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    fail(ErrorKind::kFormat, name + ": blob has a bad header");
  }
  const auto rows = get_le<std::uint64_t>(bytes.data() + 8);
  const auto cols = get_le<std::uint64_t>(bytes.data() + 16);
  if (bytes.size() != 24 + rows * cols * 8) fail(ErrorKind::kFormat, name + ": blob size does not match its header");
  ad::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::uint64_t i = 0; i < rows * cols; ++i) m.data()[i] = get_le<double>(bytes.data() + 24 + 8 * i);
  return m;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& dir, const KeyValues& extra) {
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create checkpoint directory " + dir + ": " + ec.message());

  std::ostringstream manifest;
  manifest << kHeader << ' ' << kCheckpointVersion << '\n';
  KeyValues config = model.config().to_key_values();
  for (const auto& [k, v] : extra) config[k] = v;
  for (const auto& [k, v] : config) manifest << "config " << k << " = " << v << '\n';

  for (const auto& p : model.params().entries()) {
    const ad::Matrix& m = p.var.value();
    const std::string file = p.name + ".bin";
    std::string blob(kMagic, 8);
    put_le<std::uint64_t>(blob, static_cast<std::uint64_t>(m.rows()));
    put_le<std::uint64_t>(blob, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) put_le<double>(blob, m.data()[i]);
    std::ofstream out(root / file, std::ios::binary);
    if (!out.write(blob.data(), static_cast<std::streamsize>(blob.size()))) {
      fail(ErrorKind::kIo, "cannot write " + (root / file).string());
    }
    manifest << "param " << p.name << ' ' << m.rows() << ' ' << m.cols() << " f64 " << file << '\n';
  }
  std::ofstream out(root / "manifest.txt", std::ios::binary);
  if (!(out << manifest.str()) || !out.flush()) fail(ErrorKind::kIo, "cannot write " + (root / "manifest.txt").string());
}

KeyValues read_checkpoint_config(const std::string& dir) { return read_manifest(fs::path(dir)).config; }

void load_into(Model& model, const std::string& dir) {
  const fs::path root(dir);
  const Manifest m = read_manifest(root);
  std::map<std::string, const ParamRecord*> by_name;
  for (const auto& r : m.params) by_name[r.name] = &r;

  const auto& entries = model.params().entries();
  for (const auto& p : entries) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) fail(ErrorKind::kFormat, "checkpoint has no tensor " + p.name);
    const ParamRecord& r = *it->second;
    if (r.rows != p.var.rows() || r.cols != p.var.cols()) {
      fail(ErrorKind::kShape, p.name + ": checkpoint shape " + std::to_string(r.rows) + "x" + std::to_string(r.cols) +
                                  ", model expects " + std::to_string(p.var.rows()) + "x" +
                                  std::to_string(p.var.cols()));
    }
  }
  for (const auto& r : m.params) {
    if (!model.params().contains(r.name)) fail(ErrorKind::kFormat, "checkpoint tensor " + r.name + " is not in the model");
  }
  // Read everything before touching the model so a corrupt blob leaves it intact.
  std::vector<ad::Matrix> values;
  for (const auto& p : entries) {
    const ParamRecord& r = *by_name.at(p.name);
    ad::Matrix v = read_blob(root / r.file, p.name);
    if (v.rows() != r.rows || v.cols() != r.cols) fail(ErrorKind::kFormat, p.name + ": blob shape differs from manifest");
    values.push_back(std::move(v));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    ad::Var v = entries[i].var;
    v.mutable_value() = values[i];
  }
}

std::unique_ptr<Model> load_checkpoint(const std::string& dir) {
  const KeyValues config = read_checkpoint_config(dir);
  auto model = std::make_unique<Model>(ModelConfig::from_key_values(config));
  load_into(*model, dir);
  return model;
}

}  // namespace matsod::pipeline
