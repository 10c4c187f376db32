// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0

#include "cds/losses.hpp"

#include <algorithm>
#include <memory>
#include <numeric>

#include "cds/errors.hpp"
#include "cds/superpixel.hpp"

namespace cds {
namespace {

struct QDims {
  std::size_t n, h, w;
};

QDims check_q(const Shape& qs, const Shape& fs, const char* op) {
  if (qs.size() != 4 || qs[1] != static_cast<std::size_t>(kNeighbours)) {
    throw DimensionError(std::string(op) + ": association map must be [N,9,H,W], got " + shape_str(qs));
  }
  if (fs.size() != 4 || fs[0] != qs[0] || fs[2] != qs[2] || fs[3] != qs[3]) {
    throw DimensionError(std::string(op) + ": features " + shape_str(fs) + " do not match " + shape_str(qs));
  }
  return {qs[0], qs[2], qs[3]};
}

// Per-image accumulators G[s][ch] = sum f Q and den[s] = sum Q.
template <typename T>
void accumulate_centers(const T* q, const T* f, std::size_t dch, const NeighbourIndex& idx, std::size_t cells,
                        std::vector<T>& centers, std::vector<T>& den) {
  const std::size_t plane = static_cast<std::size_t>(idx.height) * idx.width;
  centers.assign(cells * dch, T(0));
  den.assign(cells, T(0));
  for (int k = 0; k < kNeighbours; ++k) {
    for (std::size_t p = 0; p < plane; ++p) {
      const std::int32_t s = idx.ids[k * plane + p];
      if (s < 0) continue;
      const T qv = q[k * plane + p];
      den[s] += qv;
      for (std::size_t ch = 0; ch < dch; ++ch) centers[s * dch + ch] += qv * f[ch * plane + p];
    }
  }
  for (std::size_t s = 0; s < cells; ++s) {
    const T inv = T(1) / (den[s] + static_cast<T>(kCenterEps));
    for (std::size_t ch = 0; ch < dch; ++ch) centers[s * dch + ch] *= inv;
  }
}

}  // namespace

std::vector<std::int32_t> cap_regions(const LabelMap& labels, int max_regions) {
  if (max_regions < 1) throw ConfigError("max_regions must be >= 1");
  if (labels.n_regions <= max_regions) return labels.labels;
  std::vector<long> size(labels.n_regions, 0);
  for (std::int32_t l : labels.labels) ++size[l];
  std::vector<int> order(labels.n_regions);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return size[a] > size[b]; });
  std::vector<int> kept(order.begin(), order.begin() + (max_regions - 1));
  std::sort(kept.begin(), kept.end());
  std::vector<std::int32_t> remap(labels.n_regions, max_regions - 1);
  for (std::size_t i = 0; i < kept.size(); ++i) remap[kept[i]] = static_cast<std::int32_t>(i);
  std::vector<std::int32_t> out(labels.labels.size());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = remap[labels.labels[p]];
  return out;
}

template <typename T>
Tensor<T> semantic_onehot(const std::vector<LabelMap>& labels, int max_regions) {
  if (labels.empty()) throw DataError("semantic_onehot: empty batch");
  const std::size_t h = labels[0].height, w = labels[0].width;
  int r = 1;
  for (const auto& l : labels) r = std::max(r, std::min(l.n_regions, max_regions));
  const std::size_t rr = static_cast<std::size_t>(r);
  Tensor<T> out({labels.size(), rr, h, w});
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (static_cast<std::size_t>(labels[b].height) != h || static_cast<std::size_t>(labels[b].width) != w) {
      throw DataError("semantic_onehot: label maps differ in size");
    }
    const std::vector<std::int32_t> ids = cap_regions(labels[b], max_regions);
    for (std::size_t p = 0; p < h * w; ++p) out.data[(b * rr + ids[p]) * h * w + p] = T(1);
  }
  return out;
}

template <typename T>
Tensor<T> position_features(std::size_t n, std::size_t height, std::size_t width) {
  Tensor<T> out({n, 2, height, width});
  const std::size_t plane = height * width;
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) {
        out.data[(b * 2) * plane + y * width + x] = static_cast<T>(y);
        out.data[(b * 2 + 1) * plane + y * width + x] = static_cast<T>(x);
      }
  return out;
}

template <typename T>
Tensor<T> compute_centers(const Tensor<T>& q, const Tensor<T>& f, int d) {
  const QDims qd = check_q(q.shape, f.shape, "compute_centers");
  const NeighbourIndex idx = grid_index_map(static_cast<int>(qd.h), static_cast<int>(qd.w), d);
  const std::size_t cells = (qd.h / d) * (qd.w / d), dch = f.dim(1), plane = qd.h * qd.w;
  Tensor<T> out({qd.n, cells, dch});
  std::vector<T> centers, den;
  for (std::size_t b = 0; b < qd.n; ++b) {
    accumulate_centers(q.data.data() + b * kNeighbours * plane, f.data.data() + b * dch * plane, dch, idx, cells,
                       centers, den);
    std::copy(centers.begin(), centers.end(), out.data.begin() + static_cast<long>(b * cells * dch));
  }
  return out;
}

template <typename T>
Var<T> reconstruct(const Var<T>& q, const Tensor<T>& f, int d) {
  const QDims qd = check_q(q.shape(), f.shape, "reconstruct");
  auto idx = std::make_shared<NeighbourIndex>(grid_index_map(static_cast<int>(qd.h), static_cast<int>(qd.w), d));
  const std::size_t cells = (qd.h / d) * (qd.w / d), dch = f.dim(1), plane = qd.h * qd.w;
  auto feat = std::make_shared<Tensor<T>>(f);
  auto centers = std::make_shared<std::vector<T>>(qd.n * cells * dch);
  auto dens = std::make_shared<std::vector<T>>(qd.n * cells);
  const auto& qv = q.value().data;
  Tensor<T> out({qd.n, dch, qd.h, qd.w});
  std::vector<T> g, den;
  for (std::size_t b = 0; b < qd.n; ++b) {
    const T* qb = qv.data() + b * kNeighbours * plane;
    accumulate_centers(qb, f.data.data() + b * dch * plane, dch, *idx, cells, g, den);
    std::copy(g.begin(), g.end(), centers->begin() + static_cast<long>(b * cells * dch));
    std::copy(den.begin(), den.end(), dens->begin() + static_cast<long>(b * cells));
    T* ob = out.data.data() + b * dch * plane;
    for (int k = 0; k < kNeighbours; ++k) {
      for (std::size_t p = 0; p < plane; ++p) {
        const std::int32_t s = idx->ids[k * plane + p];
        if (s < 0) continue;
        const T w = qb[k * plane + p];
        for (std::size_t ch = 0; ch < dch; ++ch) ob[ch * plane + p] += w * g[s * dch + ch];
      }
    }
  }
  return q.tape().record("reconstruct", std::move(out), {q},
                         [qd, idx, feat, centers, dens, cells, dch, plane](Tape<T>& t, int self) {
    const int qi = t.input(self, 0);
    if (!t.requires_grad(qi)) return;
    const auto& u = t.grad(self);
    const auto& qv = t.value(qi).data;
    auto& gq = t.grad(qi);
    std::vector<T> gbar(cells * dch);
    for (std::size_t b = 0; b < qd.n; ++b) {
      const T* ub = u.data() + b * dch * plane;
      const T* qb = qv.data() + b * kNeighbours * plane;
      const T* fb = feat->data.data() + b * dch * plane;
      const T* gb = centers->data() + b * cells * dch;
      const T* db = dens->data() + b * cells;
      T* gqb = gq.data() + b * kNeighbours * plane;
      std::fill(gbar.begin(), gbar.end(), T(0));
      for (int k = 0; k < kNeighbours; ++k) {
        for (std::size_t p = 0; p < plane; ++p) {
          const std::int32_t s = idx->ids[k * plane + p];
          if (s < 0) continue;
          const T w = qb[k * plane + p];
          T direct = T(0);
          for (std::size_t ch = 0; ch < dch; ++ch) {
            gbar[s * dch + ch] += w * ub[ch * plane + p];
            direct += ub[ch * plane + p] * gb[s * dch + ch];
          }
          gqb[k * plane + p] += direct;
        }
      }
      for (int k = 0; k < kNeighbours; ++k) {
        for (std::size_t p = 0; p < plane; ++p) {
          const std::int32_t s = idx->ids[k * plane + p];
          if (s < 0) continue;
          T acc = T(0);
          for (std::size_t ch = 0; ch < dch; ++ch) acc += gbar[s * dch + ch] * (fb[ch * plane + p] - gb[s * dch + ch]);
          gqb[k * plane + p] += acc / (db[s] + static_cast<T>(kCenterEps));
        }
      }
    }
  });
}

template <typename T>
Var<T> superpixel_loss(const Var<T>& q, const Tensor<T>& semantic, const Tensor<T>& position, int d,
                       double lambda_pos) {
  if (lambda_pos < 0.0) throw ConfigError("lambda_pos must be >= 0");
  Tape<T>& tape = q.tape();
  const std::size_t pixels = q.dim(0) * q.dim(2) * q.dim(3);
  const T inv = T(1) / static_cast<T>(pixels);
  const Var<T> rec_sem = reconstruct(q, semantic, d);
  const Var<T> ce = mul_scalar(sum(mul(tape.constant(semantic), log(rec_sem))), -inv);
  if (lambda_pos == 0.0) return ce;
  const Var<T> diff = sub(reconstruct(q, position, d), tape.constant(position));
  return add(ce, mul_scalar(sum(mul(diff, diff)), static_cast<T>(lambda_pos) * inv));
}

template <typename T>
Var<T> alignment_loss(const Var<T>& content_i, const Var<T>& content_a, int d) {
  if (content_i.shape() != content_a.shape() || content_i.value().rank() != 4) {
    throw DimensionError("alignment_loss: expected matching [N,C,H,W] features, got " +
                         shape_str(content_i.shape()) + " and " + shape_str(content_a.shape()));
  }
  const std::size_t h = content_i.dim(2), w = content_i.dim(3);
  if (d < 1 || h % d != 0 || w % d != 0) throw DimensionError("alignment_loss: H,W not divisible by d");
  const std::size_t rows = content_i.dim(0) * (h / d) * (w / d);
  const Var<T> p = softmax(unfold_grids(channel_mean(content_i), d), -1);
  const Var<T> q = softmax(unfold_grids(channel_mean(content_a), d), -1);
  return mul_scalar(sum(mul(p, sub(log(p), log(q)))), T(1) / static_cast<T>(rows));
}

template <typename T>
Var<T> mi_loss(ParamBinder<T>& bind, VariationalParams<T>& vp, const Var<T>& v_i, const Var<T>& v_a) {
  if (v_i.shape() != v_a.shape() || v_i.value().rank() != 2) {
    throw DimensionError("mi_loss: batch shapes " + shape_str(v_i.shape()) + " and " + shape_str(v_a.shape()) +
                         " differ");
  }
  const std::size_t n = v_i.dim(0);
  std::vector<std::size_t> rows_a, rows_i;
  rows_a.reserve(n * n);
  rows_i.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      rows_a.push_back(i);
      rows_i.push_back(j);
    }
  const Var<T> positive = variational_loglik(bind, vp, v_i, v_a);
  const Var<T> all = variational_loglik(bind, vp, gather_rows(v_i, rows_i), gather_rows(v_a, rows_a));
  const T nn = static_cast<T>(n);
  return sub(mul_scalar(sum(positive), T(1) / nn), mul_scalar(sum(all), T(1) / (nn * nn)));
}

template <typename T>
Var<T> variational_nll(ParamBinder<T>& bind, VariationalParams<T>& vp, const Tensor<T>& v_i, const Tensor<T>& v_a) {
  Tape<T>& tape = bind.tape();
  const Var<T> ll = variational_loglik(bind, vp, tape.constant(v_i), tape.constant(v_a));
  return mul_scalar(sum(ll), T(-1) / static_cast<T>(v_i.dim(0)));
}

template <typename T>
Var<T> total_loss(const LossParts<T>& parts, const LossWeights& weights) {
  Var<T> total = mul_scalar(parts.sp_i, static_cast<T>(weights.sp_i));
  total = add(total, mul_scalar(parts.sp_a, static_cast<T>(weights.sp_a)));
  total = add(total, mul_scalar(parts.align, static_cast<T>(weights.align)));
  return add(total, mul_scalar(parts.mi, static_cast<T>(weights.mi)));
}

#define CDS_INSTANTIATE_LOSSES(T)                                                                              \
  template Tensor<T> semantic_onehot<T>(const std::vector<LabelMap>&, int);                                    \
  template Tensor<T> position_features<T>(std::size_t, std::size_t, std::size_t);                              \
  template Tensor<T> compute_centers(const Tensor<T>&, const Tensor<T>&, int);                                 \
  template Var<T> reconstruct(const Var<T>&, const Tensor<T>&, int);                                           \
  template Var<T> superpixel_loss(const Var<T>&, const Tensor<T>&, const Tensor<T>&, int, double);             \
  template Var<T> alignment_loss(const Var<T>&, const Var<T>&, int);                                           \
  template Var<T> mi_loss(ParamBinder<T>&, VariationalParams<T>&, const Var<T>&, const Var<T>&);               \
  template Var<T> variational_nll(ParamBinder<T>&, VariationalParams<T>&, const Tensor<T>&, const Tensor<T>&); \
  template Var<T> total_loss(const LossParts<T>&, const LossWeights&);

CDS_INSTANTIATE_LOSSES(float)
CDS_INSTANTIATE_LOSSES(double)

}  // namespace cds
