// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Training objectives.
//
// Superpixel loss: cell centres g(s) are Q-weighted means of pixel properties
// f(p) over each cell's 3x3 pixel support, and every pixel is reconstructed as
// f'(p) = sum_s g(s) Q_s(p). The loss is cross-entropy on the semantic one-hot
// plus lambda_pos times the squared position error (pixels), both averaged
// over pixels.

#pragma once

#include <cstdint>
#include <vector>

#include "cds/image.hpp"
#include "cds/model.hpp"
#include "cds/ops.hpp"

namespace cds {

inline constexpr int kDefaultMaxRegions = 50;
inline constexpr double kDefaultLambdaPos = 0.003;
inline constexpr double kCenterEps = 1e-8;

// One-hot ground truth [N,R,H,W]. R is the largest region count in the batch,
// capped at max_regions; beyond the cap, regions ranked by size from
// max_regions - 1 on share the last id.
template <typename T>
Tensor<T> semantic_onehot(const std::vector<LabelMap>& labels, int max_regions = kDefaultMaxRegions);
// Label ids after the region cap.
std::vector<std::int32_t> cap_regions(const LabelMap& labels, int max_regions);

// (row, col) pixel coordinates [N,2,H,W].
template <typename T>
Tensor<T> position_features(std::size_t n, std::size_t height, std::size_t width);

// Cell centres [N,K,D] for association map q [N,9,H,W] and features
// f [N,D,H,W]; cells with no mass fall to 0.
template <typename T>
Tensor<T> compute_centers(const Tensor<T>& q, const Tensor<T>& f, int d);

// f'(p) = sum over valid neighbours of g(s) Q_s(p), [N,D,H,W]. Differentiable
// in q; f is treated as constant.
template <typename T>
Var<T> reconstruct(const Var<T>& q, const Tensor<T>& f, int d);

template <typename T>
Var<T> superpixel_loss(const Var<T>& q, const Tensor<T>& semantic, const Tensor<T>& position, int d,
                       double lambda_pos = kDefaultLambdaPos);

// Mean over images and grid cells of KL(softmax(Z_I[k]) || softmax(Z_A[k])),
// Z = unfold_grids(channel_mean(.), d).
template <typename T>
Var<T> alignment_loss(const Var<T>& content_i, const Var<T>& content_a, int d);

// (1/N²) sum_i sum_j [log h(v_i[i] | v_a[i]) - log h(v_i[j] | v_a[i])]. Bind
// the variational parameters as constants to keep them frozen.
template <typename T>
Var<T> mi_loss(ParamBinder<T>& bind, VariationalParams<T>& vp, const Var<T>& v_i, const Var<T>& v_a);

// -(1/N) sum_i log h(v_i[i] | v_a[i]) on detached style vectors.
template <typename T>
Var<T> variational_nll(ParamBinder<T>& bind, VariationalParams<T>& vp, const Tensor<T>& v_i, const Tensor<T>& v_a);

struct LossWeights {
  double sp_i = 1.0;
  double sp_a = 1.0;
  double align = 1.0;
  double mi = 1.0;
};

template <typename T>
struct LossParts {
  Var<T> sp_i;
  Var<T> sp_a;
  Var<T> align;
  Var<T> mi;
};

template <typename T>
Var<T> total_loss(const LossParts<T>& parts, const LossWeights& weights = {});

}  // namespace cds
