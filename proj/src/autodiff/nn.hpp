// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0
//
// Named parameter registry plus the two layer shapes every module uses.

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "autodiff/ops.hpp"

namespace matsod::ad {

struct NamedParam {
  std::string name;
  Var var;
};

class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed) : rng_(seed) {}

  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  Var add(const std::string& name, Matrix init);
  Var zeros(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  Var constant(const std::string& name, Eigen::Index rows, Eigen::Index cols, double value);
  Var normal(const std::string& name, Eigen::Index rows, Eigen::Index cols, double stddev);
  // N(0, 1/fan_in) with fan_in = rows.
  Var fan_in(const std::string& name, Eigen::Index rows, Eigen::Index cols);

  const std::vector<NamedParam>& entries() const { return entries_; }
  // Throws std::out_of_range for unknown names.
  Var find(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::size_t total_size() const;
  void zero_grad();

 private:
  std::mt19937_64 rng_;
  std::vector<NamedParam> entries_;
};

struct Linear {
  Var weight;  // in x out
  Var bias;    // 1 x out, may be undefined
  Var operator()(const Var& x) const { return linear(x, weight, bias); }
};

Linear make_linear(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index out,
                   bool with_bias = true);

struct LayerNorm {
  Var gamma;
  Var beta;
  Var operator()(const Var& x) const { return layer_norm(x, gamma, beta); }
};

LayerNorm make_layer_norm(ParamStore& store, const std::string& name, Eigen::Index width);

}  // namespace matsod::ad
