// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode automatic differentiation over dense row-major double
// matrices. Every value in the model is a 2-D matrix; spatial maps are stored
// as (height*width) x channels with row index y*width + x.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>

namespace matsod::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Node {
  Matrix value;
  Matrix grad;  // empty until something flows into it
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;
  bool requires_grad = false;

  template <class Expr>
  void accumulate(const Expr& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(Matrix value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  // Empty matrix when no gradient has reached this node.
  const Matrix& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.resize(0, 0); }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double item() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Builds an interior node. When gradient recording is off or no input needs a
// gradient, the result is a constant and the closure is dropped.
Var make_result(Matrix value, const std::vector<Var>& inputs, std::function<void(Node&)> fn);

// Seeds d(root)/d(root) = 1 and propagates through the recorded graph.
void backward(const Var& root);

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Multiply-accumulate counter over forward matmul/attention kernels.
std::uint64_t mac_count();
void reset_mac_count();
void add_macs(std::uint64_t n);

}  // namespace matsod::ad
