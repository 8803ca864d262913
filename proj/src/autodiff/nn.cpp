// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#include "autodiff/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace matsod::ad {

Var ParamStore::add(const std::string& name, Matrix init) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name " + name);
  Var v(std::move(init), true);
  entries_.push_back({name, v});
  return v;
}

Var ParamStore::zeros(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  return add(name, Matrix::Zero(rows, cols));
}

Var ParamStore::constant(const std::string& name, Eigen::Index rows, Eigen::Index cols, double value) {
  return add(name, Matrix::Constant(rows, cols, value));
}

Var ParamStore::normal(const std::string& name, Eigen::Index rows, Eigen::Index cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng_);
  return add(name, std::move(m));
}

Var ParamStore::fan_in(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  return normal(name, rows, cols, 1.0 / std::sqrt(static_cast<double>(rows)));
}

Var ParamStore::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.var;
  }
  throw std::out_of_range("no parameter named " + name);
}

bool ParamStore::contains(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.var.value().size());
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.var.zero_grad();
}

Linear make_linear(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index out,
                   bool with_bias) {
  Linear l;
  l.weight = store.fan_in(name + ".weight", in, out);
  if (with_bias) l.bias = store.zeros(name + ".bias", 1, out);
  return l;
}

LayerNorm make_layer_norm(ParamStore& store, const std::string& name, Eigen::Index width) {
  return {store.constant(name + ".gamma", 1, width, 1.0), store.zeros(name + ".beta", 1, width)};
}

}  // namespace matsod::ad
