// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "autodiff/tensor.hpp"

namespace matsod::ad {

// Algebra
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var add_n(const std::vector<Var>& xs);
Var mean_n(const std::vector<Var>& xs);
// x (n x c) + row (1 x c) broadcast over rows.
Var add_row(const Var& x, const Var& row);
Var mul_row(const Var& x, const Var& row);
// x W + b; b may be undefined.
Var linear(const Var& x, const Var& weight, const Var& bias);

// Pointwise
Var gelu(const Var& a);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var square(const Var& a);
// Gradient passes only where lo < a < hi.
Var clamp(const Var& a, double lo, double hi);

// Reductions
Var sum(const Var& a);
Var mean(const Var& a);

// Normalisation
Var softmax_rows(const Var& a);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-6);
// Affine-free variant: zero rows stay exactly zero.
Var layer_norm(const Var& x, double eps = 1e-6);

// Layout
Var concat_rows(const std::vector<Var>& xs);
Var concat_cols(const std::vector<Var>& xs);
Var slice_rows(const Var& x, Eigen::Index begin, Eigen::Index count);
Var slice_cols(const Var& x, Eigen::Index begin, Eigen::Index count);
// Row r*n + i of the result is row r of xs[i]; all inputs share a shape.
Var interleave_rows(const std::vector<Var>& xs);
// Inverse of interleave_rows for one slot.
Var deinterleave_rows(const Var& x, Eigen::Index group, Eigen::Index slot);
// Averages each consecutive block of `group` rows.
Var group_mean_rows(const Var& x, Eigen::Index group);

// Spatial ops on (h*w) x c maps
// Non-overlapping r x r blocks to rows of length r*r*c, block-major ordering
// (dy, dx, c).
Var space_to_depth(const Var& x, int height, int width, int r);
// Zero-padded 3x3 depthwise convolution; kernel is 9 x c (tap-major), bias 1 x c.
Var depthwise_conv3x3(const Var& x, int height, int width, const Var& kernel, const Var& bias);
// Half-pixel-centred bilinear resampling (align_corners = false).
Var upsample_bilinear(const Var& x, int height, int width, int out_height, int out_width);
// 3x3 Sobel response with replicated borders; axis 0 = d/dx, 1 = d/dy.
Var sobel(const Var& x, int height, int width, int axis);

// Scaled dot-product attention. q has groups*tq rows, k and v groups*tk rows;
// each group attends only within itself. Columns are split evenly into heads.
Var attention(const Var& q, const Var& k, const Var& v, Eigen::Index groups, int heads, double scale);

}  // namespace matsod::ad
