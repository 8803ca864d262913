// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#include "autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace matsod::ad {

namespace {

Node* grad_target(Node& self, std::size_t i) {
  Node* n = self.inputs[i].get();
  return (n && n->requires_grad) ? n : nullptr;
}

void require(bool ok, const char* op, const std::string& what) {
  if (!ok) throw std::invalid_argument(std::string(op) + ": " + what);
}

std::string shape_str(const Var& v) {
  return std::to_string(v.rows()) + "x" + std::to_string(v.cols());
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), op,
          "shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

Var matmul(const Var& a, const Var& b) {
  require(a.cols() == b.rows(), "matmul", "inner dimensions " + shape_str(a) + " * " + shape_str(b));
  add_macs(static_cast<std::uint64_t>(a.rows() * a.cols() * b.cols()));
  Matrix out = a.value() * b.value();
  return make_result(std::move(out), {a, b}, [](Node& self) {
    const Matrix& A = self.inputs[0]->value;
    const Matrix& B = self.inputs[1]->value;
    if (Node* n = grad_target(self, 0)) n->accumulate(self.grad * B.transpose());
    if (Node* n = grad_target(self, 1)) n->accumulate(A.transpose() * self.grad);
  });
}

Var transpose(const Var& a) {
  Matrix out = a.value().transpose();
  return make_result(std::move(out), {a}, [](Node& self) {
    if (Node* n = grad_target(self, 0)) n->accumulate(self.grad.transpose());
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Matrix out = a.value() + b.value();
  return make_result(std::move(out), {a, b}, [](Node& self) {
    if (Node* n = grad_target(self, 0)) n->accumulate(self.grad);
    if (Node* n = grad_target(self, 1)) n->accumulate(self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Matrix out = a.value() - b.value();
  return make_result(std::move(out), {a, b}, [](Node& self) {
    if (Node* n = grad_target(self, 0)) n->accumulate(self.grad);
    if (Node* n = grad_target(self, 1)) n->accumulate(-self.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Matrix out = a.value().cwiseProduct(b.value());
  return make_result(std::move(out), {a, b}, [](Node& self) {
    if (Node* n = grad_target(self, 0)) n->accumulate(self.grad.cwiseProduct(self.inputs[1]->value));
    if (Node* n = grad_target(self, 1)) n->accumulate(self.grad.cwiseProduct(self.inputs[0]->value));
  });
}

Var scale(const Var& a, double s) {
  Matrix out = a.value() * s;
  return make_result(std::move(out), {a}, [s](Node& self) {
    if (Node* n = grad_target(self, 0)) n->accumulate(self.grad * s);
  });
}

Var add_scalar(const Var& a, double s) {
  Matrix out = a.value().array() + s;
  return make_result(std::move(out), {a}, [](Node& self) {
    if (Node* n = grad_target(self, 0)) n->accumulate(self.grad);
  });
}

Var add_n(const std::vector<Var>& xs) {
  require(!xs.empty(), "add_n", "empty input list");
  Matrix out = xs.front().value();
  for (std::size_t i = 1; i < xs.size(); ++i) {
    require_same_shape(xs.front(), xs[i], "add_n");
    out += xs[i].value();
  }
  return make_result(std::move(out), xs, [](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      if (Node* n = grad_target(self, i)) n->accumulate(self.grad);
    }
  });
}

Var mean_n(const std::vector<Var>& xs) {
  return scale(add_n(xs), 1.0 / static_cast<double>(xs.size()));
}

Var add_row(const Var& x, const Var& row) {
  require(row.rows() == 1 && row.cols() == x.cols(), "add_row", shape_str(x) + " + " + shape_str(row));
  Matrix out = x.value().rowwise() + row.value().row(0);
  return make_result(std::move(out), {x, row}, [](Node& self) {
    if (Node* n = grad_target(self, 0)) n->accumulate(self.grad);
    if (Node* n = grad_target(self, 1)) n->accumulate(self.grad.colwise().sum());
  });
}

Var mul_row(const Var& x, const Var& row) {
  require(row.rows() == 1 && row.cols() == x.cols(), "mul_row", shape_str(x) + " * " + shape_str(row));
  Matrix out = x.value().array().rowwise() * row.value().row(0).array();
  return make_result(std::move(out), {x, row}, [](Node& self) {
    const Matrix& X = self.inputs[0]->value;
    const Matrix& R = self.inputs[1]->value;
    if (Node* n = grad_target(self, 0)) {
      Matrix g = self.grad.array().rowwise() * R.row(0).array();
      n->accumulate(g);
    }
    if (Node* n = grad_target(self, 1)) n->accumulate(self.grad.cwiseProduct(X).colwise().sum());
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  Var y = matmul(x, weight);
  return bias.defined() ? add_row(y, bias) : y;
}

Var gelu(const Var& a) {
  Matrix out = a.value().unaryExpr([](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); });
  return make_result(std::move(out), {a}, [](Node& self) {
    if (Node* n = grad_target(self, 0)) {
      Matrix d = n->value.unaryExpr([](double x) {
        return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
      });
      n->accumulate(self.grad.cwiseProduct(d));
    }
  });
}

Var relu(const Var& a) {
  Matrix out = a.value().cwiseMax(0.0);
  return make_result(std::move(out), {a}, [](Node& self) {
    if (Node* n = grad_target(self, 0)) {
      Matrix g = (n->value.array() > 0.0).select(self.grad, 0.0);
      n->accumulate(g);
    }
  });
}

Var sigmoid(const Var& a) {
  Matrix out = a.value().unaryExpr([](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return make_result(std::move(out), {a}, [](Node& self) {
    if (Node* n = grad_target(self, 0)) {
      Matrix d = self.value.array() * (1.0 - self.value.array());
      n->accumulate(self.grad.cwiseProduct(d));
    }
  });
}

Var exp(const Var& a) {
  Matrix out = a.value().array().exp();
  return make_result(std::move(out), {a}, [](Node& self) {
    if (Node* n = grad_target(self, 0)) n->accumulate(self.grad.cwiseProduct(self.value));
  });
}

Var log(const Var& a) {
  Matrix out = a.value().array().log();
  return make_result(std::move(out), {a}, [](Node& self) {
    if (Node* n = grad_target(self, 0)) n->accumulate(self.grad.cwiseQuotient(n->value));
  });
}

Var sqrt(const Var& a) {
  Matrix out = a.value().array().sqrt();
  return make_result(std::move(out), {a}, [](Node& self) {
    if (Node* n = grad_target(self, 0)) {
      Matrix g = self.grad.array() / (2.0 * self.value.array());
      n->accumulate(g);
    }
  });
}

Var square(const Var& a) {
  Matrix out = a.value().array().square();
  return make_result(std::move(out), {a}, [](Node& self) {
    if (Node* n = grad_target(self, 0)) n->accumulate(2.0 * self.grad.cwiseProduct(n->value));
  });
}

Var clamp(const Var& a, double lo, double hi) {
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return make_result(std::move(out), {a}, [lo, hi](Node& self) {
    if (Node* n = grad_target(self, 0)) {
      Matrix g = (n->value.array() > lo && n->value.array() < hi).select(self.grad, 0.0);
      n->accumulate(g);
    }
  });
}

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make_result(std::move(out), {a}, [](Node& self) {
    if (Node* n = grad_target(self, 0)) {
      n->accumulate(Matrix::Constant(n->value.rows(), n->value.cols(), self.grad(0, 0)));
    }
  });
}

Var mean(const Var& a) {
  require(a.value().size() > 0, "mean", "empty input");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

namespace {

void softmax_rows_inplace(Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const double mx = row.maxCoeff();
    row = (row.array() - mx).exp();
    row /= row.sum();
  }
}

// dS = A * (dA - rowsum(dA * A))
Matrix softmax_backward(const Matrix& probs, const Matrix& dprobs) {
  Eigen::VectorXd dots = probs.cwiseProduct(dprobs).rowwise().sum();
  Matrix out = dprobs;
  out.colwise() -= dots;
  return probs.cwiseProduct(out);
}

}  // namespace

Var softmax_rows(const Var& a) {
  Matrix out = a.value();
  softmax_rows_inplace(out);
  return make_result(std::move(out), {a}, [](Node& self) {
    if (Node* n = grad_target(self, 0)) n->accumulate(softmax_backward(self.value, self.grad));
  });
}

namespace {

struct NormStats {
  Matrix xhat;
  Eigen::VectorXd inv_std;
};

NormStats normalise_rows(const Matrix& x, double eps) {
  NormStats s;
  const double inv_n = 1.0 / static_cast<double>(x.cols());
  Eigen::VectorXd mu = x.rowwise().sum() * inv_n;
  s.xhat = x.colwise() - mu;
  Eigen::VectorXd var = s.xhat.array().square().rowwise().sum() * inv_n;
  s.inv_std = (var.array() + eps).rsqrt();
  s.xhat = s.xhat.array().colwise() * s.inv_std.array();
  return s;
}

Matrix normalise_backward(const NormStats& s, const Matrix& dxhat) {
  const double n = static_cast<double>(dxhat.cols());
  Eigen::VectorXd sum_d = dxhat.rowwise().sum();
  Eigen::VectorXd sum_dx = dxhat.cwiseProduct(s.xhat).rowwise().sum();
  Matrix dx = dxhat * n;
  dx.colwise() -= sum_d;
  dx -= (s.xhat.array().colwise() * sum_dx.array()).matrix();
  dx = dx.array().colwise() * (s.inv_std.array() / n);
  return dx;
}

}  // namespace

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  require(gamma.rows() == 1 && gamma.cols() == x.cols() && beta.rows() == 1 && beta.cols() == x.cols(),
          "layer_norm", "affine parameters must be 1x" + std::to_string(x.cols()));
  auto stats = std::make_shared<NormStats>(normalise_rows(x.value(), eps));
  Matrix out = (stats->xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
               beta.value().row(0).array();
  return make_result(std::move(out), {x, gamma, beta}, [stats](Node& self) {
    const Matrix& G = self.inputs[1]->value;
    if (Node* n = grad_target(self, 0)) {
      Matrix dxhat = self.grad.array().rowwise() * G.row(0).array();
      n->accumulate(normalise_backward(*stats, dxhat));
    }
    if (Node* n = grad_target(self, 1)) n->accumulate(self.grad.cwiseProduct(stats->xhat).colwise().sum());
    if (Node* n = grad_target(self, 2)) n->accumulate(self.grad.colwise().sum());
  });
}

Var layer_norm(const Var& x, double eps) {
  auto stats = std::make_shared<NormStats>(normalise_rows(x.value(), eps));
  Matrix out = stats->xhat;
  return make_result(std::move(out), {x}, [stats](Node& self) {
    if (Node* n = grad_target(self, 0)) n->accumulate(normalise_backward(*stats, self.grad));
  });
}

Var concat_rows(const std::vector<Var>& xs) {
  require(!xs.empty(), "concat_rows", "empty input list");
  Eigen::Index rows = 0;
  for (const auto& x : xs) {
    require(x.cols() == xs.front().cols(), "concat_rows", "column mismatch " + shape_str(x));
    rows += x.rows();
  }
  Matrix out(rows, xs.front().cols());
  Eigen::Index r = 0;
  for (const auto& x : xs) {
    out.middleRows(r, x.rows()) = x.value();
    r += x.rows();
  }
  return make_result(std::move(out), xs, [](Node& self) {
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      const Eigen::Index n_rows = self.inputs[i]->value.rows();
      if (Node* n = grad_target(self, i)) n->accumulate(self.grad.middleRows(r, n_rows));
      r += n_rows;
    }
  });
}

Var concat_cols(const std::vector<Var>& xs) {
  require(!xs.empty(), "concat_cols", "empty input list");
  Eigen::Index cols = 0;
  for (const auto& x : xs) {
    require(x.rows() == xs.front().rows(), "concat_cols", "row mismatch " + shape_str(x));
    cols += x.cols();
  }
  Matrix out(xs.front().rows(), cols);
  Eigen::Index c = 0;
  for (const auto& x : xs) {
    out.middleCols(c, x.cols()) = x.value();
    c += x.cols();
  }
  return make_result(std::move(out), xs, [](Node& self) {
    Eigen::Index c = 0;
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      const Eigen::Index n_cols = self.inputs[i]->value.cols();
      if (Node* n = grad_target(self, i)) n->accumulate(self.grad.middleCols(c, n_cols));
      c += n_cols;
    }
  });
}

Var slice_rows(const Var& x, Eigen::Index begin, Eigen::Index count) {
  require(begin >= 0 && count >= 0 && begin + count <= x.rows(), "slice_rows", "range out of bounds");
  Matrix out = x.value().middleRows(begin, count);
  return make_result(std::move(out), {x}, [begin, count](Node& self) {
    if (Node* n = grad_target(self, 0)) {
      Matrix g = Matrix::Zero(n->value.rows(), n->value.cols());
      g.middleRows(begin, count) = self.grad;
      n->accumulate(g);
    }
  });
}

Var slice_cols(const Var& x, Eigen::Index begin, Eigen::Index count) {
  require(begin >= 0 && count >= 0 && begin + count <= x.cols(), "slice_cols", "range out of bounds");
  Matrix out = x.value().middleCols(begin, count);
  return make_result(std::move(out), {x}, [begin, count](Node& self) {
    if (Node* n = grad_target(self, 0)) {
      Matrix g = Matrix::Zero(n->value.rows(), n->value.cols());
      g.middleCols(begin, count) = self.grad;
      n->accumulate(g);
    }
  });
}

Var interleave_rows(const std::vector<Var>& xs) {
  require(!xs.empty(), "interleave_rows", "empty input list");
  const Eigen::Index n = static_cast<Eigen::Index>(xs.size());
  const Eigen::Index rows = xs.front().rows();
  for (const auto& x : xs) require_same_shape(xs.front(), x, "interleave_rows");
  Matrix out(rows * n, xs.front().cols());
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index i = 0; i < n; ++i) out.row(r * n + i) = xs[static_cast<std::size_t>(i)].value().row(r);
  }
  return make_result(std::move(out), xs, [n, rows](Node& self) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Node* t = grad_target(self, static_cast<std::size_t>(i));
      if (!t) continue;
      Matrix g(rows, self.grad.cols());
      for (Eigen::Index r = 0; r < rows; ++r) g.row(r) = self.grad.row(r * n + i);
      t->accumulate(g);
    }
  });
}

Var deinterleave_rows(const Var& x, Eigen::Index group, Eigen::Index slot) {
  require(group > 0 && x.rows() % group == 0 && slot >= 0 && slot < group, "deinterleave_rows",
          "bad grouping");
  const Eigen::Index rows = x.rows() / group;
  Matrix out(rows, x.cols());
  for (Eigen::Index r = 0; r < rows; ++r) out.row(r) = x.value().row(r * group + slot);
  return make_result(std::move(out), {x}, [group, slot, rows](Node& self) {
    if (Node* n = grad_target(self, 0)) {
      Matrix g = Matrix::Zero(n->value.rows(), n->value.cols());
      for (Eigen::Index r = 0; r < rows; ++r) g.row(r * group + slot) = self.grad.row(r);
      n->accumulate(g);
    }
  });
}

Var group_mean_rows(const Var& x, Eigen::Index group) {
  require(group > 0 && x.rows() % group == 0, "group_mean_rows", "rows not divisible by group");
  const Eigen::Index rows = x.rows() / group;
  const double inv = 1.0 / static_cast<double>(group);
  Matrix out = Matrix::Zero(rows, x.cols());
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index i = 0; i < group; ++i) out.row(r) += x.value().row(r * group + i);
  }
  out *= inv;
  return make_result(std::move(out), {x}, [group, rows, inv](Node& self) {
    if (Node* n = grad_target(self, 0)) {
      Matrix g(n->value.rows(), n->value.cols());
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index i = 0; i < group; ++i) g.row(r * group + i) = self.grad.row(r) * inv;
      }
      n->accumulate(g);
    }
  });
}

Var space_to_depth(const Var& x, int height, int width, int r) {
  require(r > 0 && height % r == 0 && width % r == 0, "space_to_depth",
          std::to_string(height) + "x" + std::to_string(width) + " not divisible by " + std::to_string(r));
  require(x.rows() == static_cast<Eigen::Index>(height) * width, "space_to_depth", "row count != h*w");
  const Eigen::Index c = x.cols();
  const int oh = height / r;
  const int ow = width / r;
  Matrix out(static_cast<Eigen::Index>(oh) * ow, c * r * r);
  const Matrix& in = x.value();
  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      const Eigen::Index orow = static_cast<Eigen::Index>(i) * ow + j;
      for (int dy = 0; dy < r; ++dy) {
        for (int dx = 0; dx < r; ++dx) {
          const Eigen::Index irow = static_cast<Eigen::Index>(i * r + dy) * width + (j * r + dx);
          out.block(orow, (dy * r + dx) * c, 1, c) = in.row(irow);
        }
      }
    }
  }
  return make_result(std::move(out), {x}, [height, width, r, c, oh, ow](Node& self) {
    Node* n = grad_target(self, 0);
    if (!n) return;
    Matrix g(static_cast<Eigen::Index>(height) * width, c);
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        const Eigen::Index orow = static_cast<Eigen::Index>(i) * ow + j;
        for (int dy = 0; dy < r; ++dy) {
          for (int dx = 0; dx < r; ++dx) {
            const Eigen::Index irow = static_cast<Eigen::Index>(i * r + dy) * width + (j * r + dx);
            g.row(irow) = self.grad.block(orow, (dy * r + dx) * c, 1, c);
          }
        }
      }
    }
    n->accumulate(g);
  });
}

Var depthwise_conv3x3(const Var& x, int height, int width, const Var& kernel, const Var& bias) {
  const Eigen::Index c = x.cols();
  require(x.rows() == static_cast<Eigen::Index>(height) * width, "depthwise_conv3x3", "row count != h*w");
  require(kernel.rows() == 9 && kernel.cols() == c, "depthwise_conv3x3", "kernel must be 9x" + std::to_string(c));
  require(bias.rows() == 1 && bias.cols() == c, "depthwise_conv3x3", "bias must be 1x" + std::to_string(c));
  add_macs(static_cast<std::uint64_t>(9 * x.rows() * c));
  const Matrix& in = x.value();
  const Matrix& k = kernel.value();
  Matrix out = bias.value().replicate(x.rows(), 1);
  for (int y = 0; y < height; ++y) {
    for (int xx = 0; xx < width; ++xx) {
      auto orow = out.row(static_cast<Eigen::Index>(y) * width + xx);
      for (int dy = -1; dy <= 1; ++dy) {
        const int sy = y + dy;
        if (sy < 0 || sy >= height) continue;
        for (int dx = -1; dx <= 1; ++dx) {
          const int sx = xx + dx;
          if (sx < 0 || sx >= width) continue;
          orow += in.row(static_cast<Eigen::Index>(sy) * width + sx).cwiseProduct(k.row((dy + 1) * 3 + (dx + 1)));
        }
      }
    }
  }
  return make_result(std::move(out), {x, kernel, bias}, [height, width](Node& self) {
    const Matrix& in = self.inputs[0]->value;
    const Matrix& k = self.inputs[1]->value;
    Node* nx = grad_target(self, 0);
    Node* nk = grad_target(self, 1);
    Matrix gx, gk;
    if (nx) gx = Matrix::Zero(in.rows(), in.cols());
    if (nk) gk = Matrix::Zero(9, in.cols());
    for (int y = 0; y < height; ++y) {
      for (int xx = 0; xx < width; ++xx) {
        auto grow = self.grad.row(static_cast<Eigen::Index>(y) * width + xx);
        for (int dy = -1; dy <= 1; ++dy) {
          const int sy = y + dy;
          if (sy < 0 || sy >= height) continue;
          for (int dx = -1; dx <= 1; ++dx) {
            const int sx = xx + dx;
            if (sx < 0 || sx >= width) continue;
            const Eigen::Index irow = static_cast<Eigen::Index>(sy) * width + sx;
            const int tap = (dy + 1) * 3 + (dx + 1);
            if (nx) gx.row(irow) += grow.cwiseProduct(k.row(tap));
            if (nk) gk.row(tap) += grow.cwiseProduct(in.row(irow));
          }
        }
      }
    }
    if (nx) nx->accumulate(gx);
    if (nk) nk->accumulate(gk);
    if (Node* nb = grad_target(self, 2)) nb->accumulate(self.grad.colwise().sum());
  });
}

namespace {

struct Taps {
  std::vector<int> lo, hi;
  std::vector<double> w_lo, w_hi;
};

Taps bilinear_taps(int in, int out) {
  Taps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.w_lo.resize(out);
  t.w_hi.resize(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * ratio - 0.5;
    if (src < 0) src = 0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const int i1 = std::min(i0 + 1, in - 1);
    const double lambda = src - i0;
    t.lo[o] = i0;
    t.hi[o] = i1;
    t.w_lo[o] = 1.0 - lambda;
    t.w_hi[o] = lambda;
  }
  return t;
}

}  // namespace

Var upsample_bilinear(const Var& x, int height, int width, int out_height, int out_width) {
  require(x.rows() == static_cast<Eigen::Index>(height) * width, "upsample_bilinear", "row count != h*w");
  require(out_height > 0 && out_width > 0, "upsample_bilinear", "empty output");
  auto ty = std::make_shared<Taps>(bilinear_taps(height, out_height));
  auto tx = std::make_shared<Taps>(bilinear_taps(width, out_width));
  const Matrix& in = x.value();
  Matrix out(static_cast<Eigen::Index>(out_height) * out_width, x.cols());
  for (int y = 0; y < out_height; ++y) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(ty->lo[y]) * width;
    const Eigen::Index r1 = static_cast<Eigen::Index>(ty->hi[y]) * width;
    for (int xx = 0; xx < out_width; ++xx) {
      out.row(static_cast<Eigen::Index>(y) * out_width + xx) =
          ty->w_lo[y] * (tx->w_lo[xx] * in.row(r0 + tx->lo[xx]) + tx->w_hi[xx] * in.row(r0 + tx->hi[xx])) +
          ty->w_hi[y] * (tx->w_lo[xx] * in.row(r1 + tx->lo[xx]) + tx->w_hi[xx] * in.row(r1 + tx->hi[xx]));
    }
  }
  return make_result(std::move(out), {x}, [ty, tx, width, out_height, out_width](Node& self) {
    Node* n = grad_target(self, 0);
    if (!n) return;
    Matrix g = Matrix::Zero(n->value.rows(), n->value.cols());
    for (int y = 0; y < out_height; ++y) {
      const Eigen::Index r0 = static_cast<Eigen::Index>(ty->lo[y]) * width;
      const Eigen::Index r1 = static_cast<Eigen::Index>(ty->hi[y]) * width;
      for (int xx = 0; xx < out_width; ++xx) {
        auto go = self.grad.row(static_cast<Eigen::Index>(y) * out_width + xx);
        g.row(r0 + tx->lo[xx]) += ty->w_lo[y] * tx->w_lo[xx] * go;
        g.row(r0 + tx->hi[xx]) += ty->w_lo[y] * tx->w_hi[xx] * go;
        g.row(r1 + tx->lo[xx]) += ty->w_hi[y] * tx->w_lo[xx] * go;
        g.row(r1 + tx->hi[xx]) += ty->w_hi[y] * tx->w_hi[xx] * go;
      }
    }
    n->accumulate(g);
  });
}

namespace {

// Sobel taps in correlation form, indexed [dy+1][dx+1].
constexpr double kSobelX[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
constexpr double kSobelY[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};

}  // namespace

Var sobel(const Var& x, int height, int width, int axis) {
  require(x.rows() == static_cast<Eigen::Index>(height) * width, "sobel", "row count != h*w");
  require(axis == 0 || axis == 1, "sobel", "axis must be 0 or 1");
  const auto& taps = axis == 0 ? kSobelX : kSobelY;
  const Matrix& in = x.value();
  Matrix out = Matrix::Zero(in.rows(), in.cols());
  auto idx = [&](int y, int xx) {
    y = std::clamp(y, 0, height - 1);
    xx = std::clamp(xx, 0, width - 1);
    return static_cast<Eigen::Index>(y) * width + xx;
  };
  for (int y = 0; y < height; ++y) {
    for (int xx = 0; xx < width; ++xx) {
      auto orow = out.row(idx(y, xx));
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const double w = taps[dy + 1][dx + 1];
          if (w != 0.0) orow += w * in.row(idx(y + dy, xx + dx));
        }
      }
    }
  }
  return make_result(std::move(out), {x}, [height, width, axis](Node& self) {
    Node* n = grad_target(self, 0);
    if (!n) return;
    const auto& taps = axis == 0 ? kSobelX : kSobelY;
    auto idx = [&](int y, int xx) {
      y = std::clamp(y, 0, height - 1);
      xx = std::clamp(xx, 0, width - 1);
      return static_cast<Eigen::Index>(y) * width + xx;
    };
    Matrix g = Matrix::Zero(n->value.rows(), n->value.cols());
    for (int y = 0; y < height; ++y) {
      for (int xx = 0; xx < width; ++xx) {
        auto go = self.grad.row(idx(y, xx));
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const double w = taps[dy + 1][dx + 1];
            if (w != 0.0) g.row(idx(y + dy, xx + dx)) += w * go;
          }
        }
      }
    }
    n->accumulate(g);
  });
}

Var attention(const Var& q, const Var& k, const Var& v, Eigen::Index groups, int heads, double scale) {
  require(groups > 0 && q.rows() % groups == 0 && k.rows() % groups == 0, "attention",
          "row counts not divisible by group count");
  require(k.rows() == v.rows(), "attention", "key/value row mismatch");
  require(q.cols() == k.cols(), "attention", "query/key width mismatch");
  require(heads > 0 && q.cols() % heads == 0 && v.cols() % heads == 0, "attention",
          "width not divisible by head count");
  const Eigen::Index tq = q.rows() / groups;
  const Eigen::Index tk = k.rows() / groups;
  const Eigen::Index dqk = q.cols() / heads;
  const Eigen::Index dv = v.cols() / heads;
  add_macs(static_cast<std::uint64_t>(groups * heads * tq * tk * (dqk + dv)));

  auto probs = std::make_shared<std::vector<Matrix>>(static_cast<std::size_t>(groups * heads));
  Matrix out(q.rows(), v.cols());
  const Matrix& Q = q.value();
  const Matrix& K = k.value();
  const Matrix& V = v.value();
  for (Eigen::Index g = 0; g < groups; ++g) {
    for (int h = 0; h < heads; ++h) {
      Matrix s = scale * Q.block(g * tq, h * dqk, tq, dqk) * K.block(g * tk, h * dqk, tk, dqk).transpose();
      softmax_rows_inplace(s);
      out.block(g * tq, h * dv, tq, dv) = s * V.block(g * tk, h * dv, tk, dv);
      (*probs)[static_cast<std::size_t>(g * heads + h)] = std::move(s);
    }
  }
  return make_result(std::move(out), {q, k, v}, [probs, groups, heads, tq, tk, dqk, dv, scale](Node& self) {
    const Matrix& Q = self.inputs[0]->value;
    const Matrix& K = self.inputs[1]->value;
    const Matrix& V = self.inputs[2]->value;
    Node* nq = grad_target(self, 0);
    Node* nk = grad_target(self, 1);
    Node* nv = grad_target(self, 2);
    Matrix gq, gk, gv;
    if (nq) gq.resize(Q.rows(), Q.cols());
    if (nk) gk.resize(K.rows(), K.cols());
    if (nv) gv.resize(V.rows(), V.cols());
    for (Eigen::Index g = 0; g < groups; ++g) {
      for (int h = 0; h < heads; ++h) {
        const Matrix& a = (*probs)[static_cast<std::size_t>(g * heads + h)];
        auto d_out = self.grad.block(g * tq, h * dv, tq, dv);
        if (nv) gv.block(g * tk, h * dv, tk, dv) = a.transpose() * d_out;
        if (!nq && !nk) continue;
        Matrix ds = softmax_backward(a, d_out * V.block(g * tk, h * dv, tk, dv).transpose()) * scale;
        if (nq) gq.block(g * tq, h * dqk, tq, dqk) = ds * K.block(g * tk, h * dqk, tk, dqk);
        if (nk) gk.block(g * tk, h * dqk, tk, dqk) = ds.transpose() * Q.block(g * tq, h * dqk, tq, dqk);
      }
    }
    if (nq) nq->accumulate(gq);
    if (nk) nk->accumulate(gk);
    if (nv) nv->accumulate(gv);
  });
}

}  // namespace matsod::ad
