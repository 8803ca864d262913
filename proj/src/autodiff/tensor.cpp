// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#include "autodiff/tensor.hpp"

#include <stdexcept>
#include <unordered_set>

namespace matsod::ad {

namespace {
thread_local bool g_grad_enabled = true;
thread_local std::uint64_t g_macs = 0;
}  // namespace

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

double Var::item() const {
  if (node_->value.size() != 1) {
    throw std::logic_error("item() on a non-scalar value");
  }
  return node_->value(0, 0);
}

Var make_result(Matrix value, const std::vector<Var>& inputs, std::function<void(Node&)> fn) {
  Var out(std::move(value), false);
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const auto& in : inputs) {
    if (in.defined() && in.requires_grad()) {
      any = true;
      break;
    }
  }
  if (!any) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  node.inputs.reserve(inputs.size());
  for (const auto& in : inputs) node.inputs.push_back(in.defined() ? in.node() : nullptr);
  node.backward_fn = std::move(fn);
  return out;
}

void backward(const Var& root) {
  if (!root.defined() || root.value().size() != 1) {
    throw std::logic_error("backward() needs a scalar root");
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child && child->requires_grad && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && node->grad.size() != 0) node->backward_fn(*node);
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

std::uint64_t mac_count() { return g_macs; }
void reset_mac_count() { g_macs = 0; }
void add_macs(std::uint64_t n) { g_macs += n; }

}  // namespace matsod::ad
