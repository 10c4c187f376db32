// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable operations over Var<T>. Image-like operations accept either
// a single [C,H,W] tensor or a batch [N,C,H,W]; the output keeps the input rank.

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cds/tensor.hpp"

namespace cds {

// Stabilizer for log(): log(x + kLogEps).
inline constexpr double kLogEps = 1e-8;

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad);

// Affine map over the trailing axis: y = x W^T + b.
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);

template <typename T> Var<T> relu(const Var<T>& x);
template <typename T> Var<T> sigmoid(const Var<T>& x);
template <typename T> Var<T> tanh(const Var<T>& x);
template <typename T> Var<T> exp(const Var<T>& x);
template <typename T> Var<T> log(const Var<T>& x);  // log(x + kLogEps)
template <typename T> Var<T> clamp(const Var<T>& x, T lo, T hi);

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> add_scalar(const Var<T>& x, T s);
template <typename T> Var<T> mul_scalar(const Var<T>& x, T s);

template <typename T> Var<T> sum(const Var<T>& x);
template <typename T> Var<T> mean(const Var<T>& x);
// Sum over the trailing axis.
template <typename T> Var<T> sum_last(const Var<T>& x);

// Mean over H,W: [N,C,H,W] -> [N,C], [C,H,W] -> [C].
template <typename T> Var<T> spatial_mean(const Var<T>& x);
// Mean over C: [N,C,H,W] -> [N,H,W], [C,H,W] -> [H,W].
template <typename T> Var<T> channel_mean(const Var<T>& x);
// Non-overlapping window x window average pooling.
template <typename T> Var<T> avgpool2d(const Var<T>& x, int window);

// Corner-aligned bilinear resampling: the first and last output samples sit
// exactly on the first and last input samples.
template <typename T> Var<T> bilinear_resize(const Var<T>& x, std::size_t out_h, std::size_t out_w);

// Max-subtracted softmax along `axis` (negative values count from the back).
template <typename T> Var<T> softmax(const Var<T>& x, int axis);

// Softmax over the channel axis of [N,K,H,W] / [K,H,W] restricted to entries
// with valid[k,y,x] != 0. Invalid entries are exactly zero.
template <typename T>
Var<T> masked_softmax(const Var<T>& x, const std::vector<std::uint8_t>& valid);

struct BatchNormOptions {
  bool training = true;
  bool update_running = true;
  double momentum = 0.1;
  double eps = 1e-5;
};

// Per-channel batch normalization of [N,C,H,W] / [C,H,W]. In training mode the
// biased batch variance normalizes and the running buffers are blended with
// the batch statistics (unbiased variance) when update_running is set.
template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, Tensor<T>& running_mean,
                  Tensor<T>& running_var, const BatchNormOptions& opts);

template <typename T> Var<T> concat_channels(const Var<T>& a, const Var<T>& b);
// x[n,c,:,:] * g[n,c]
template <typename T> Var<T> scale_channels(const Var<T>& x, const Var<T>& g);

// [N,H,W] -> [N,K,d*d], [H,W] -> [K,d*d]. Rows follow grid raster order,
// columns the raster order inside each grid cell.
template <typename T> Var<T> unfold_grids(const Var<T>& map, std::size_t d);
template <typename T> Tensor<T> fold_grids(const Tensor<T>& z, std::size_t height, std::size_t width,
                                           std::size_t d);

template <typename T> Var<T> narrow_last(const Var<T>& x, std::size_t start, std::size_t length);
// Rows of a rank-2 tensor selected by index (repeats allowed).
template <typename T> Var<T> gather_rows(const Var<T>& x, const std::vector<std::size_t>& rows);
template <typename T> Var<T> reshape(const Var<T>& x, Shape shape);

}  // namespace cds
