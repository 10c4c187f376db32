// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0

#include "cds/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

namespace cds {
namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<MatR<T>>;
template <typename T>
using CMapR = Eigen::Map<const MatR<T>>;

// Canonical (N,C,H,W) view of a rank-3 or rank-4 tensor.
struct Dims4 {
  std::size_t n, c, h, w;
  bool batched;
  std::size_t plane() const { return h * w; }
};

Dims4 image_dims(const Shape& s, const char* op) {
  if (s.size() == 4) return {s[0], s[1], s[2], s[3], true};
  if (s.size() == 3) return {1, s[0], s[1], s[2], false};
  throw DimensionError(std::string(op) + ": expected [C,H,W] or [N,C,H,W], got " + shape_str(s));
}

Shape image_shape(const Dims4& d, std::size_t c, std::size_t h, std::size_t w) {
  if (d.batched) return {d.n, c, h, w};
  return {c, h, w};
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

template <typename T>
void im2col(const T* img, std::size_t c, std::size_t h, std::size_t w, int k, int stride, int pad,
            std::size_t oh, std::size_t ow, T* col) {
  const std::size_t plane = oh * ow;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + ((ch * k + ky) * k + kx) * plane;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const long iy = static_cast<long>(oy) * stride - pad + ky;
          T* dst = row + oy * ow;
          if (iy < 0 || iy >= static_cast<long>(h)) {
            std::fill(dst, dst + ow, T(0));
            continue;
          }
          const T* src = img + (ch * h + static_cast<std::size_t>(iy)) * w;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const long ix = static_cast<long>(ox) * stride - pad + kx;
            dst[ox] = (ix < 0 || ix >= static_cast<long>(w)) ? T(0) : src[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, std::size_t c, std::size_t h, std::size_t w, int k, int stride, int pad,
                std::size_t oh, std::size_t ow, T* img) {
  const std::size_t plane = oh * ow;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + ((ch * k + ky) * k + kx) * plane;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const long iy = static_cast<long>(oy) * stride - pad + ky;
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          T* dst = img + (ch * h + static_cast<std::size_t>(iy)) * w;
          const T* src = row + oy * ow;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const long ix = static_cast<long>(ox) * stride - pad + kx;
            if (ix >= 0 && ix < static_cast<long>(w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T, typename Fwd, typename Deriv>
Var<T> unary(const char* name, const Var<T>& x, Fwd f, Deriv df) {
  const Tensor<T>& in = x.value();
  Tensor<T> out(in.shape);
  for (std::size_t i = 0; i < in.size(); ++i) out.data[i] = f(in.data[i]);
  return x.tape().record(name, std::move(out), {x}, [df](Tape<T>& t, int self) {
    const int xi = t.input(self, 0);
    if (!t.requires_grad(xi)) return;
    const auto& xv = t.value(xi).data;
    const auto& yv = t.value(self).data;
    const auto& g = t.grad(self);
    auto& gx = t.grad(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xv[i], yv[i]);
  });
}

// 1-D corner-aligned interpolation taps.
struct Taps {
  std::vector<std::size_t> lo, hi;
  std::vector<double> frac;
};

Taps corner_aligned_taps(std::size_t in, std::size_t out) {
  Taps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.frac.resize(out);
  const double scale = out > 1 ? static_cast<double>(in - 1) / static_cast<double>(out - 1) : 0.0;
  for (std::size_t i = 0; i < out; ++i) {
    const double src = static_cast<double>(i) * scale;
    std::size_t lo = static_cast<std::size_t>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    t.lo[i] = lo;
    t.hi[i] = std::min(lo + 1, in - 1);
    t.frac[i] = src - static_cast<double>(lo);
  }
  return t;
}

std::size_t normalize_axis(int axis, std::size_t rank, const char* op) {
  const long a = axis < 0 ? static_cast<long>(rank) + axis : axis;
  if (a < 0 || a >= static_cast<long>(rank)) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

}  // namespace

// ---------------------------------------------------------------------------
// Convolution and affine layers

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad) {
  const Tensor<T>& X = x.value();
  const Tensor<T>& Wt = weight.value();
  const Tensor<T>& B = bias.value();
  const Dims4 d = image_dims(X.shape, "conv2d");
  if (Wt.rank() != 4) throw DimensionError("conv2d: weight must be [C_out,C_in,k,k], got " + shape_str(Wt.shape));
  const std::size_t co = Wt.dim(0);
  const int k = static_cast<int>(Wt.dim(2));
  if (Wt.dim(1) != d.c) {
    throw DimensionError("conv2d: input channels (axis " + std::to_string(d.batched ? 1 : 0) + ") = " +
                         std::to_string(d.c) + " but weight axis 1 = " + std::to_string(Wt.dim(1)));
  }
  if (Wt.dim(2) != Wt.dim(3) || k % 2 == 0) {
    throw DimensionError("conv2d: kernel must be square with odd size, got " + shape_str(Wt.shape));
  }
  if (B.rank() != 1 || B.dim(0) != co) {
    throw DimensionError("conv2d: bias must be [" + std::to_string(co) + "], got " + shape_str(B.shape));
  }
  if (stride < 1 || pad < 0) throw DimensionError("conv2d: stride must be >= 1 and pad >= 0");
  const long oh_l = (static_cast<long>(d.h) + 2 * pad - k) / stride + 1;
  const long ow_l = (static_cast<long>(d.w) + 2 * pad - k) / stride + 1;
  if (static_cast<long>(d.h) + 2 * pad < k || static_cast<long>(d.w) + 2 * pad < k) {
    throw DimensionError("conv2d: kernel larger than padded input " + shape_str(X.shape));
  }
  const std::size_t oh = static_cast<std::size_t>(oh_l), ow = static_cast<std::size_t>(ow_l);
  const std::size_t kk = d.c * static_cast<std::size_t>(k * k);
  const std::size_t plane = oh * ow;
  const bool pointwise = (k == 1 && stride == 1 && pad == 0);

  Tensor<T> out(image_shape(d, co, oh, ow));
  std::vector<T> col(pointwise ? 0 : kk * plane);
  CMapR<T> wm(Wt.data.data(), co, kk);
  for (std::size_t n = 0; n < d.n; ++n) {
    const T* img = X.data.data() + n * d.c * d.plane();
    if (!pointwise) im2col(img, d.c, d.h, d.w, k, stride, pad, oh, ow, col.data());
    CMapR<T> cm(pointwise ? img : col.data(), kk, plane);
    MapR<T> om(out.data.data() + n * co * plane, co, plane);
    om.noalias() = wm * cm;
    for (std::size_t o = 0; o < co; ++o) om.row(o).array() += B.data[o];
  }

  return x.tape().record("conv2d", std::move(out), {x, weight, bias},
                         [d, co, k, stride, pad, oh, ow, kk, plane, pointwise](Tape<T>& t, int self) {
    const int xi = t.input(self, 0), wi = t.input(self, 1), bi = t.input(self, 2);
    const Tensor<T>& X = t.value(xi);
    const Tensor<T>& Wt = t.value(wi);
    const auto& g = t.grad(self);
    const bool need_x = t.requires_grad(xi), need_w = t.requires_grad(wi), need_b = t.requires_grad(bi);
    std::vector<T> col(pointwise ? 0 : kk * plane);
    std::vector<T> dcol(need_x && !pointwise ? kk * plane : 0);
    CMapR<T> wm(Wt.data.data(), co, kk);
    for (std::size_t n = 0; n < d.n; ++n) {
      const T* img = X.data.data() + n * d.c * d.plane();
      CMapR<T> gm(g.data() + n * co * plane, co, plane);
      if (need_w) {
        if (!pointwise) im2col(img, d.c, d.h, d.w, k, stride, pad, oh, ow, col.data());
        CMapR<T> cm(pointwise ? img : col.data(), kk, plane);
        MapR<T> gw(t.grad(wi).data(), co, kk);
        gw.noalias() += gm * cm.transpose();
      }
      if (need_b) {
        auto& gb = t.grad(bi);
        // Plain loop: Eigen's packet reduction order depends on pointer
        // alignment, which would make results vary with heap layout.
        for (std::size_t o = 0; o < co; ++o) {
          const T* row = g.data() + (n * co + o) * plane;
          T s = T(0);
          for (std::size_t p = 0; p < plane; ++p) s += row[p];
          gb[o] += s;
        }
      }
      if (need_x) {
        T* gx = t.grad(xi).data() + n * d.c * d.plane();
        if (pointwise) {
          MapR<T> gxm(gx, kk, plane);
          gxm.noalias() += wm.transpose() * gm;
        } else {
          MapR<T> dc(dcol.data(), kk, plane);
          dc.noalias() = wm.transpose() * gm;
          col2im_add(dcol.data(), d.c, d.h, d.w, k, stride, pad, oh, ow, gx);
        }
      }
    }
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  const Tensor<T>& X = x.value();
  const Tensor<T>& Wt = weight.value();
  const Tensor<T>& B = bias.value();
  if (X.rank() < 1) throw DimensionError("linear: input must have at least one axis");
  if (Wt.rank() != 2) throw DimensionError("linear: weight must be [D_out,D_in], got " + shape_str(Wt.shape));
  const std::size_t din = X.shape.back();
  const std::size_t dout = Wt.dim(0);
  if (Wt.dim(1) != din) {
    throw DimensionError("linear: input trailing axis " + std::to_string(din) + " != weight axis 1 " +
                         std::to_string(Wt.dim(1)));
  }
  if (B.rank() != 1 || B.dim(0) != dout) {
    throw DimensionError("linear: bias must be [" + std::to_string(dout) + "], got " + shape_str(B.shape));
  }
  const std::size_t rows = X.size() / din;
  Shape os = X.shape;
  os.back() = dout;
  Tensor<T> out(os);
  CMapR<T> xm(X.data.data(), rows, din);
  CMapR<T> wm(Wt.data.data(), dout, din);
  MapR<T> om(out.data.data(), rows, dout);
  om.noalias() = xm * wm.transpose();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < dout; ++o) om(r, o) += B.data[o];

  return x.tape().record("linear", std::move(out), {x, weight, bias}, [rows, din, dout](Tape<T>& t, int self) {
    const int xi = t.input(self, 0), wi = t.input(self, 1), bi = t.input(self, 2);
    CMapR<T> gm(t.grad(self).data(), rows, dout);
    if (t.requires_grad(xi)) {
      CMapR<T> wm(t.value(wi).data.data(), dout, din);
      MapR<T> gx(t.grad(xi).data(), rows, din);
      gx.noalias() += gm * wm;
    }
    if (t.requires_grad(wi)) {
      CMapR<T> xm(t.value(xi).data.data(), rows, din);
      MapR<T> gw(t.grad(wi).data(), dout, din);
      gw.noalias() += gm.transpose() * xm;
    }
    if (t.requires_grad(bi)) {
      auto& gb = t.grad(bi);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t o = 0; o < dout; ++o) gb[o] += gm(r, o);
    }
  });
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Var<T> relu(const Var<T>& x) {
  return unary<T>(
      "relu", x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return unary<T>(
      "sigmoid", x,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  return unary<T>("tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> exp(const Var<T>& x) {
  return unary<T>("exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> log(const Var<T>& x) {
  const T eps = static_cast<T>(kLogEps);
  return unary<T>("log", x, [eps](T v) { return std::log(v + eps); }, [eps](T v, T) { return T(1) / (v + eps); });
}

template <typename T>
Var<T> clamp(const Var<T>& x, T lo, T hi) {
  return unary<T>(
      "clamp", x, [lo, hi](T v) { return std::clamp(v, lo, hi); },
      [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

template <typename T>
Var<T> add_scalar(const Var<T>& x, T s) {
  return unary<T>("add_scalar", x, [s](T v) { return v + s; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> mul_scalar(const Var<T>& x, T s) {
  return unary<T>("mul_scalar", x, [s](T v) { return v * s; }, [s](T, T) { return s; });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out(a.shape());
  const auto& av = a.value().data;
  const auto& bv = b.value().data;
  for (std::size_t i = 0; i < av.size(); ++i) out.data[i] = av[i] + bv[i];
  return a.tape().record("add", std::move(out), {a, b}, [](Tape<T>& t, int self) {
    const auto& g = t.grad(self);
    for (std::size_t k = 0; k < 2; ++k) {
      const int in = t.input(self, k);
      if (!t.requires_grad(in)) continue;
      auto& gi = t.grad(in);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<T> out(a.shape());
  const auto& av = a.value().data;
  const auto& bv = b.value().data;
  for (std::size_t i = 0; i < av.size(); ++i) out.data[i] = av[i] - bv[i];
  return a.tape().record("sub", std::move(out), {a, b}, [](Tape<T>& t, int self) {
    const auto& g = t.grad(self);
    const int ai = t.input(self, 0), bi = t.input(self, 1);
    if (t.requires_grad(ai)) {
      auto& ga = t.grad(ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(bi)) {
      auto& gb = t.grad(bi);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<T> out(a.shape());
  const auto& av = a.value().data;
  const auto& bv = b.value().data;
  for (std::size_t i = 0; i < av.size(); ++i) out.data[i] = av[i] * bv[i];
  return a.tape().record("mul", std::move(out), {a, b}, [](Tape<T>& t, int self) {
    const auto& g = t.grad(self);
    const int ai = t.input(self, 0), bi = t.input(self, 1);
    const auto& av = t.value(ai).data;
    const auto& bv = t.value(bi).data;
    if (t.requires_grad(ai)) {
      auto& ga = t.grad(ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(bi)) {
      auto& gb = t.grad(bi);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions and pooling

template <typename T>
Var<T> sum(const Var<T>& x) {
  T s = T(0);
  for (T v : x.value().data) s += v;
  return x.tape().record("sum", Tensor<T>(Shape{}, std::vector<T>{s}), {x}, [](Tape<T>& t, int self) {
    const T g = t.grad(self)[0];
    for (T& gi : t.grad(t.input(self, 0))) gi += g;
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  return mul_scalar(sum(x), T(1) / static_cast<T>(x.size()));
}

template <typename T>
Var<T> sum_last(const Var<T>& x) {
  const Tensor<T>& X = x.value();
  if (X.rank() < 1) throw DimensionError("sum_last: input must have at least one axis");
  const std::size_t inner = X.shape.back();
  const std::size_t rows = X.size() / inner;
  Shape os(X.shape.begin(), X.shape.end() - 1);
  Tensor<T> out(os);
  for (std::size_t r = 0; r < rows; ++r) {
    T s = T(0);
    for (std::size_t j = 0; j < inner; ++j) s += X.data[r * inner + j];
    out.data[r] = s;
  }
  return x.tape().record("sum_last", std::move(out), {x}, [rows, inner](Tape<T>& t, int self) {
    const auto& g = t.grad(self);
    auto& gx = t.grad(t.input(self, 0));
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < inner; ++j) gx[r * inner + j] += g[r];
  });
}

template <typename T>
Var<T> spatial_mean(const Var<T>& x) {
  const Dims4 d = image_dims(x.shape(), "spatial_mean");
  const auto& xv = x.value().data;
  Tensor<T> out(d.batched ? Shape{d.n, d.c} : Shape{d.c});
  const std::size_t hw = d.plane();
  for (std::size_t nc = 0; nc < d.n * d.c; ++nc) {
    T s = T(0);
    for (std::size_t i = 0; i < hw; ++i) s += xv[nc * hw + i];
    out.data[nc] = s / static_cast<T>(hw);
  }
  return x.tape().record("spatial_mean", std::move(out), {x}, [d](Tape<T>& t, int self) {
    const auto& g = t.grad(self);
    auto& gx = t.grad(t.input(self, 0));
    const std::size_t hw = d.plane();
    for (std::size_t nc = 0; nc < d.n * d.c; ++nc) {
      const T share = g[nc] / static_cast<T>(hw);
      for (std::size_t i = 0; i < hw; ++i) gx[nc * hw + i] += share;
    }
  });
}

template <typename T>
Var<T> channel_mean(const Var<T>& x) {
  const Dims4 d = image_dims(x.shape(), "channel_mean");
  const auto& xv = x.value().data;
  const std::size_t hw = d.plane();
  Tensor<T> out(d.batched ? Shape{d.n, d.h, d.w} : Shape{d.h, d.w});
  for (std::size_t n = 0; n < d.n; ++n) {
    T* o = out.data.data() + n * hw;
    for (std::size_t c = 0; c < d.c; ++c) {
      const T* src = xv.data() + (n * d.c + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) o[i] += src[i];
    }
    for (std::size_t i = 0; i < hw; ++i) o[i] /= static_cast<T>(d.c);
  }
  return x.tape().record("channel_mean", std::move(out), {x}, [d](Tape<T>& t, int self) {
    const auto& g = t.grad(self);
    auto& gx = t.grad(t.input(self, 0));
    const std::size_t hw = d.plane();
    const T inv = T(1) / static_cast<T>(d.c);
    for (std::size_t n = 0; n < d.n; ++n)
      for (std::size_t c = 0; c < d.c; ++c)
        for (std::size_t i = 0; i < hw; ++i) gx[(n * d.c + c) * hw + i] += g[n * hw + i] * inv;
  });
}

template <typename T>
Var<T> avgpool2d(const Var<T>& x, int window) {
  const Dims4 d = image_dims(x.shape(), "avgpool2d");
  if (window < 1) throw DimensionError("avgpool2d: window must be >= 1");
  const std::size_t wnd = static_cast<std::size_t>(window);
  if (d.h % wnd != 0 || d.w % wnd != 0) {
    throw DimensionError("avgpool2d: window " + std::to_string(window) + " does not divide spatial dims " +
                         std::to_string(d.h) + "x" + std::to_string(d.w));
  }
  const std::size_t oh = d.h / wnd, ow = d.w / wnd;
  const auto& xv = x.value().data;
  Tensor<T> out(image_shape(d, d.c, oh, ow));
  const T inv = T(1) / static_cast<T>(wnd * wnd);
  for (std::size_t nc = 0; nc < d.n * d.c; ++nc) {
    const T* src = xv.data() + nc * d.plane();
    T* dst = out.data.data() + nc * oh * ow;
    for (std::size_t y = 0; y < d.h; ++y)
      for (std::size_t xx = 0; xx < d.w; ++xx) dst[(y / wnd) * ow + xx / wnd] += src[y * d.w + xx];
    for (std::size_t i = 0; i < oh * ow; ++i) dst[i] *= inv;
  }
  return x.tape().record("avgpool2d", std::move(out), {x}, [d, wnd, oh, ow, inv](Tape<T>& t, int self) {
    const auto& g = t.grad(self);
    auto& gx = t.grad(t.input(self, 0));
    for (std::size_t nc = 0; nc < d.n * d.c; ++nc) {
      const T* gs = g.data() + nc * oh * ow;
      T* dst = gx.data() + nc * d.plane();
      for (std::size_t y = 0; y < d.h; ++y)
        for (std::size_t xx = 0; xx < d.w; ++xx) dst[y * d.w + xx] += gs[(y / wnd) * ow + xx / wnd] * inv;
    }
  });
}

template <typename T>
Var<T> bilinear_resize(const Var<T>& x, std::size_t out_h, std::size_t out_w) {
  const Dims4 d = image_dims(x.shape(), "bilinear_resize");
  if (out_h < 1 || out_w < 1) throw DimensionError("bilinear_resize: target size must be at least 1x1");
  auto ty = std::make_shared<Taps>(corner_aligned_taps(d.h, out_h));
  auto tx = std::make_shared<Taps>(corner_aligned_taps(d.w, out_w));
  const auto& xv = x.value().data;
  Tensor<T> out(image_shape(d, d.c, out_h, out_w));
  for (std::size_t nc = 0; nc < d.n * d.c; ++nc) {
    const T* src = xv.data() + nc * d.plane();
    T* dst = out.data.data() + nc * out_h * out_w;
    for (std::size_t y = 0; y < out_h; ++y) {
      const T fy = static_cast<T>(ty->frac[y]);
      const T* r0 = src + ty->lo[y] * d.w;
      const T* r1 = src + ty->hi[y] * d.w;
      for (std::size_t xx = 0; xx < out_w; ++xx) {
        const T fx = static_cast<T>(tx->frac[xx]);
        const std::size_t x0 = tx->lo[xx], x1 = tx->hi[xx];
        const T top = r0[x0] + (r0[x1] - r0[x0]) * fx;
        const T bot = r1[x0] + (r1[x1] - r1[x0]) * fx;
        dst[y * out_w + xx] = top + (bot - top) * fy;
      }
    }
  }
  return x.tape().record("bilinear_resize", std::move(out), {x}, [d, ty, tx, out_h, out_w](Tape<T>& t, int self) {
    const auto& g = t.grad(self);
    auto& gx = t.grad(t.input(self, 0));
    for (std::size_t nc = 0; nc < d.n * d.c; ++nc) {
      const T* gs = g.data() + nc * out_h * out_w;
      T* dst = gx.data() + nc * d.plane();
      for (std::size_t y = 0; y < out_h; ++y) {
        const T fy = static_cast<T>(ty->frac[y]);
        T* r0 = dst + ty->lo[y] * d.w;
        T* r1 = dst + ty->hi[y] * d.w;
        for (std::size_t xx = 0; xx < out_w; ++xx) {
          const T fx = static_cast<T>(tx->frac[xx]);
          const std::size_t x0 = tx->lo[xx], x1 = tx->hi[xx];
          const T gv = gs[y * out_w + xx];
          r0[x0] += gv * (T(1) - fy) * (T(1) - fx);
          r0[x1] += gv * (T(1) - fy) * fx;
          r1[x0] += gv * fy * (T(1) - fx);
          r1[x1] += gv * fy * fx;
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Normalizations

template <typename T>
Var<T> softmax(const Var<T>& x, int axis) {
  const Tensor<T>& X = x.value();
  const std::size_t ax = normalize_axis(axis, X.rank(), "softmax");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= X.shape[i];
  for (std::size_t i = ax + 1; i < X.rank(); ++i) inner *= X.shape[i];
  const std::size_t len = X.shape[ax];
  Tensor<T> out(X.shape);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      T mx = X.data[base];
      for (std::size_t a = 1; a < len; ++a) mx = std::max(mx, X.data[base + a * inner]);
      T z = T(0);
      for (std::size_t a = 0; a < len; ++a) {
        const T e = std::exp(X.data[base + a * inner] - mx);
        out.data[base + a * inner] = e;
        z += e;
      }
      for (std::size_t a = 0; a < len; ++a) out.data[base + a * inner] /= z;
    }
  }
  return x.tape().record("softmax", std::move(out), {x}, [outer, inner, len](Tape<T>& t, int self) {
    const auto& y = t.value(self).data;
    const auto& g = t.grad(self);
    auto& gx = t.grad(t.input(self, 0));
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * len * inner + in;
        T dot = T(0);
        for (std::size_t a = 0; a < len; ++a) dot += g[base + a * inner] * y[base + a * inner];
        for (std::size_t a = 0; a < len; ++a) {
          const std::size_t i = base + a * inner;
          gx[i] += y[i] * (g[i] - dot);
        }
      }
    }
  });
}

template <typename T>
Var<T> masked_softmax(const Var<T>& x, const std::vector<std::uint8_t>& valid) {
  const Dims4 d = image_dims(x.shape(), "masked_softmax");
  const std::size_t hw = d.plane();
  if (valid.size() != d.c * hw) {
    throw DimensionError("masked_softmax: mask has " + std::to_string(valid.size()) + " entries, expected " +
                         std::to_string(d.c * hw));
  }
  auto mask = std::make_shared<std::vector<std::uint8_t>>(valid);
  const auto& xv = x.value().data;
  Tensor<T> out(x.shape());
  for (std::size_t n = 0; n < d.n; ++n) {
    const T* src = xv.data() + n * d.c * hw;
    T* dst = out.data.data() + n * d.c * hw;
    for (std::size_t p = 0; p < hw; ++p) {
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t k = 0; k < d.c; ++k)
        if ((*mask)[k * hw + p]) mx = std::max(mx, src[k * hw + p]);
      if (!std::isfinite(mx)) continue;  // no valid entry: all zero
      T z = T(0);
      for (std::size_t k = 0; k < d.c; ++k) {
        if (!(*mask)[k * hw + p]) continue;
        const T e = std::exp(src[k * hw + p] - mx);
        dst[k * hw + p] = e;
        z += e;
      }
      for (std::size_t k = 0; k < d.c; ++k) dst[k * hw + p] /= z;
    }
  }
  return x.tape().record("masked_softmax", std::move(out), {x}, [d](Tape<T>& t, int self) {
    const std::size_t hw = d.plane();
    const auto& y = t.value(self).data;
    const auto& g = t.grad(self);
    auto& gx = t.grad(t.input(self, 0));
    for (std::size_t n = 0; n < d.n; ++n) {
      const std::size_t off = n * d.c * hw;
      for (std::size_t p = 0; p < hw; ++p) {
        T dot = T(0);
        for (std::size_t k = 0; k < d.c; ++k) dot += g[off + k * hw + p] * y[off + k * hw + p];
        for (std::size_t k = 0; k < d.c; ++k) {
          const std::size_t i = off + k * hw + p;
          gx[i] += y[i] * (g[i] - dot);
        }
      }
    }
  });
}

template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, Tensor<T>& running_mean,
                  Tensor<T>& running_var, const BatchNormOptions& opts) {
  const Dims4 d = image_dims(x.shape(), "batch_norm");
  const Shape cs{d.c};
  if (gamma.shape() != cs || beta.shape() != cs || running_mean.shape != cs || running_var.shape != cs) {
    throw DimensionError("batch_norm: per-channel parameters must be [" + std::to_string(d.c) + "]");
  }
  const std::size_t hw = d.plane();
  const std::size_t m = d.n * hw;
  const auto& xv = x.value().data;
  const auto& gv = gamma.value().data;
  const auto& bv = beta.value().data;

  auto xhat = std::make_shared<std::vector<T>>(xv.size());
  auto inv_std = std::make_shared<std::vector<T>>(d.c);
  Tensor<T> out(x.shape());
  for (std::size_t c = 0; c < d.c; ++c) {
    T mu, var;
    if (opts.training) {
      double s = 0.0;
      for (std::size_t n = 0; n < d.n; ++n)
        for (std::size_t i = 0; i < hw; ++i) s += xv[(n * d.c + c) * hw + i];
      const double mean_d = s / static_cast<double>(m);
      double ss = 0.0;
      for (std::size_t n = 0; n < d.n; ++n)
        for (std::size_t i = 0; i < hw; ++i) {
          const double dv = xv[(n * d.c + c) * hw + i] - mean_d;
          ss += dv * dv;
        }
      mu = static_cast<T>(mean_d);
      var = static_cast<T>(ss / static_cast<double>(m));
      if (opts.update_running) {
        const double unbiased = m > 1 ? ss / static_cast<double>(m - 1) : ss;
        const double mom = opts.momentum;
        running_mean.data[c] = static_cast<T>((1.0 - mom) * running_mean.data[c] + mom * mean_d);
        running_var.data[c] = static_cast<T>((1.0 - mom) * running_var.data[c] + mom * unbiased);
      }
    } else {
      mu = running_mean.data[c];
      var = running_var.data[c];
    }
    const T is = T(1) / std::sqrt(var + static_cast<T>(opts.eps));
    (*inv_std)[c] = is;
    for (std::size_t n = 0; n < d.n; ++n)
      for (std::size_t i = 0; i < hw; ++i) {
        const std::size_t idx = (n * d.c + c) * hw + i;
        const T h = (xv[idx] - mu) * is;
        (*xhat)[idx] = h;
        out.data[idx] = gv[c] * h + bv[c];
      }
  }
  const bool training = opts.training;
  return x.tape().record("batch_norm", std::move(out), {x, gamma, beta},
                         [d, xhat, inv_std, training](Tape<T>& t, int self) {
    const int xi = t.input(self, 0), gi = t.input(self, 1), bi = t.input(self, 2);
    const std::size_t hw = d.plane();
    const std::size_t m = d.n * hw;
    const auto& g = t.grad(self);
    const auto& gv = t.value(gi).data;
    for (std::size_t c = 0; c < d.c; ++c) {
      T sg = T(0), sgh = T(0);
      for (std::size_t n = 0; n < d.n; ++n)
        for (std::size_t i = 0; i < hw; ++i) {
          const std::size_t idx = (n * d.c + c) * hw + i;
          sg += g[idx];
          sgh += g[idx] * (*xhat)[idx];
        }
      if (t.requires_grad(gi)) t.grad(gi)[c] += sgh;
      if (t.requires_grad(bi)) t.grad(bi)[c] += sg;
      if (!t.requires_grad(xi)) continue;
      auto& gx = t.grad(xi);
      const T scale = gv[c] * (*inv_std)[c];
      const T mg = sg / static_cast<T>(m), mgh = sgh / static_cast<T>(m);
      for (std::size_t n = 0; n < d.n; ++n)
        for (std::size_t i = 0; i < hw; ++i) {
          const std::size_t idx = (n * d.c + c) * hw + i;
          gx[idx] += training ? scale * (g[idx] - mg - (*xhat)[idx] * mgh) : scale * g[idx];
        }
    }
  });
}

// ---------------------------------------------------------------------------
// Layout

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  const Dims4 da = image_dims(a.shape(), "concat_channels");
  const Dims4 db = image_dims(b.shape(), "concat_channels");
  if (da.batched != db.batched || da.n != db.n || da.h != db.h || da.w != db.w) {
    throw DimensionError("concat_channels: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t hw = da.plane();
  const std::size_t c = da.c + db.c;
  Tensor<T> out(image_shape(da, c, da.h, da.w));
  const auto& av = a.value().data;
  const auto& bv = b.value().data;
  for (std::size_t n = 0; n < da.n; ++n) {
    std::copy_n(av.data() + n * da.c * hw, da.c * hw, out.data.data() + n * c * hw);
    std::copy_n(bv.data() + n * db.c * hw, db.c * hw, out.data.data() + (n * c + da.c) * hw);
  }
  return a.tape().record("concat_channels", std::move(out), {a, b}, [da, db, hw, c](Tape<T>& t, int self) {
    const auto& g = t.grad(self);
    const int ai = t.input(self, 0), bi = t.input(self, 1);
    for (std::size_t n = 0; n < da.n; ++n) {
      if (t.requires_grad(ai)) {
        auto& ga = t.grad(ai);
        for (std::size_t i = 0; i < da.c * hw; ++i) ga[n * da.c * hw + i] += g[n * c * hw + i];
      }
      if (t.requires_grad(bi)) {
        auto& gb = t.grad(bi);
        for (std::size_t i = 0; i < db.c * hw; ++i) gb[n * db.c * hw + i] += g[(n * c + da.c) * hw + i];
      }
    }
  });
}

template <typename T>
Var<T> scale_channels(const Var<T>& x, const Var<T>& g) {
  const Dims4 d = image_dims(x.shape(), "scale_channels");
  const Shape expect = d.batched ? Shape{d.n, d.c} : Shape{d.c};
  if (g.shape() != expect) {
    throw DimensionError("scale_channels: scale must be " + shape_str(expect) + ", got " + shape_str(g.shape()));
  }
  const std::size_t hw = d.plane();
  const auto& xv = x.value().data;
  const auto& gv = g.value().data;
  Tensor<T> out(x.shape());
  for (std::size_t nc = 0; nc < d.n * d.c; ++nc)
    for (std::size_t i = 0; i < hw; ++i) out.data[nc * hw + i] = xv[nc * hw + i] * gv[nc];
  return x.tape().record("scale_channels", std::move(out), {x, g}, [d](Tape<T>& t, int self) {
    const std::size_t hw = d.plane();
    const int xi = t.input(self, 0), si = t.input(self, 1);
    const auto& gr = t.grad(self);
    const auto& xv = t.value(xi).data;
    const auto& sv = t.value(si).data;
    if (t.requires_grad(xi)) {
      auto& gx = t.grad(xi);
      for (std::size_t nc = 0; nc < d.n * d.c; ++nc)
        for (std::size_t i = 0; i < hw; ++i) gx[nc * hw + i] += gr[nc * hw + i] * sv[nc];
    }
    if (t.requires_grad(si)) {
      auto& gs = t.grad(si);
      for (std::size_t nc = 0; nc < d.n * d.c; ++nc) {
        T acc = T(0);
        for (std::size_t i = 0; i < hw; ++i) acc += gr[nc * hw + i] * xv[nc * hw + i];
        gs[nc] += acc;
      }
    }
  });
}

template <typename T>
Var<T> unfold_grids(const Var<T>& map, std::size_t d) {
  const Shape& s = map.shape();
  if (s.size() != 2 && s.size() != 3) {
    throw DimensionError("unfold_grids: expected [H,W] or [N,H,W], got " + shape_str(s));
  }
  const bool batched = s.size() == 3;
  const std::size_t n = batched ? s[0] : 1;
  const std::size_t h = s[s.size() - 2], w = s[s.size() - 1];
  if (d == 0 || h % d != 0 || w % d != 0) {
    throw DimensionError("unfold_grids: grid size " + std::to_string(d) + " does not divide " + std::to_string(h) +
                         "x" + std::to_string(w));
  }
  const std::size_t gw = w / d;
  const std::size_t k = (h / d) * gw;
  const std::size_t dd = d * d;
  // index[j] = source offset (within one map) of unfolded entry j
  auto index = std::make_shared<std::vector<std::size_t>>(k * dd);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t cell = (y / d) * gw + x / d;
      (*index)[cell * dd + (y % d) * d + (x % d)] = y * w + x;
    }
  const auto& mv = map.value().data;
  Tensor<T> out(batched ? Shape{n, k, dd} : Shape{k, dd});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t j = 0; j < k * dd; ++j) out.data[b * k * dd + j] = mv[b * h * w + (*index)[j]];
  return map.tape().record("unfold_grids", std::move(out), {map}, [index, n, h, w](Tape<T>& t, int self) {
    const auto& g = t.grad(self);
    auto& gx = t.grad(t.input(self, 0));
    const std::size_t m = index->size();
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t j = 0; j < m; ++j) gx[b * h * w + (*index)[j]] += g[b * m + j];
  });
}

template <typename T>
Tensor<T> fold_grids(const Tensor<T>& z, std::size_t height, std::size_t width, std::size_t d) {
  if (d == 0 || height % d != 0 || width % d != 0) throw DimensionError("fold_grids: indivisible dims");
  const std::size_t gw = width / d;
  const std::size_t k = (height / d) * gw;
  const std::size_t dd = d * d;
  const bool batched = z.rank() == 3;
  if ((batched && (z.dim(1) != k || z.dim(2) != dd)) || (!batched && (z.rank() != 2 || z.dim(0) != k || z.dim(1) != dd))) {
    throw DimensionError("fold_grids: unexpected shape " + shape_str(z.shape));
  }
  const std::size_t n = batched ? z.dim(0) : 1;
  Tensor<T> out(batched ? Shape{n, height, width} : Shape{height, width});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) {
        const std::size_t cell = (y / d) * gw + x / d;
        out.data[b * height * width + y * width + x] = z.data[b * k * dd + cell * dd + (y % d) * d + (x % d)];
      }
  return out;
}

template <typename T>
Var<T> narrow_last(const Var<T>& x, std::size_t start, std::size_t length) {
  const Tensor<T>& X = x.value();
  if (X.rank() < 1 || start + length > X.shape.back()) {
    throw DimensionError("narrow_last: range [" + std::to_string(start) + "," + std::to_string(start + length) +
                         ") exceeds trailing axis of " + shape_str(X.shape));
  }
  const std::size_t inner = X.shape.back();
  const std::size_t rows = X.size() / inner;
  Shape os = X.shape;
  os.back() = length;
  Tensor<T> out(os);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(X.data.data() + r * inner + start, length, out.data.data() + r * length);
  return x.tape().record("narrow_last", std::move(out), {x}, [rows, inner, start, length](Tape<T>& t, int self) {
    const auto& g = t.grad(self);
    auto& gx = t.grad(t.input(self, 0));
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < length; ++j) gx[r * inner + start + j] += g[r * length + j];
  });
}

template <typename T>
Var<T> gather_rows(const Var<T>& x, const std::vector<std::size_t>& rows) {
  const Tensor<T>& X = x.value();
  if (X.rank() != 2) throw DimensionError("gather_rows: expected rank-2 input, got " + shape_str(X.shape));
  const std::size_t cols = X.dim(1);
  for (std::size_t r : rows) {
    if (r >= X.dim(0)) throw DimensionError("gather_rows: row index " + std::to_string(r) + " out of range");
  }
  auto idx = std::make_shared<std::vector<std::size_t>>(rows);
  Tensor<T> out(Shape{rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(X.data.data() + rows[i] * cols, cols, out.data.data() + i * cols);
  return x.tape().record("gather_rows", std::move(out), {x}, [idx, cols](Tape<T>& t, int self) {
    const auto& g = t.grad(self);
    auto& gx = t.grad(t.input(self, 0));
    for (std::size_t i = 0; i < idx->size(); ++i)
      for (std::size_t j = 0; j < cols; ++j) gx[(*idx)[i] * cols + j] += g[i * cols + j];
  });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  Tensor<T> out(std::move(shape), x.value().data);
  return x.tape().record("reshape", std::move(out), {x}, [](Tape<T>& t, int self) {
    const auto& g = t.grad(self);
    auto& gx = t.grad(t.input(self, 0));
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

#define CDS_INSTANTIATE_OPS(T)                                                                              \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int);                          \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                                    \
  template Var<T> relu(const Var<T>&);                                                                     \
  template Var<T> sigmoid(const Var<T>&);                                                                  \
  template Var<T> tanh(const Var<T>&);                                                                     \
  template Var<T> exp(const Var<T>&);                                                                      \
  template Var<T> log(const Var<T>&);                                                                      \
  template Var<T> clamp(const Var<T>&, T, T);                                                              \
  template Var<T> add(const Var<T>&, const Var<T>&);                                                       \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                                       \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                                       \
  template Var<T> add_scalar(const Var<T>&, T);                                                            \
  template Var<T> mul_scalar(const Var<T>&, T);                                                            \
  template Var<T> sum(const Var<T>&);                                                                      \
  template Var<T> mean(const Var<T>&);                                                                     \
  template Var<T> sum_last(const Var<T>&);                                                                 \
  template Var<T> spatial_mean(const Var<T>&);                                                             \
  template Var<T> channel_mean(const Var<T>&);                                                             \
  template Var<T> avgpool2d(const Var<T>&, int);                                                           \
  template Var<T> bilinear_resize(const Var<T>&, std::size_t, std::size_t);                                \
  template Var<T> softmax(const Var<T>&, int);                                                             \
  template Var<T> masked_softmax(const Var<T>&, const std::vector<std::uint8_t>&);                         \
  template Var<T> batch_norm(const Var<T>&, const Var<T>&, const Var<T>&, Tensor<T>&, Tensor<T>&,         \
                             const BatchNormOptions&);                                                     \
  template Var<T> concat_channels(const Var<T>&, const Var<T>&);                                           \
  template Var<T> scale_channels(const Var<T>&, const Var<T>&);                                            \
  template Var<T> unfold_grids(const Var<T>&, std::size_t);                                                \
  template Tensor<T> fold_grids(const Tensor<T>&, std::size_t, std::size_t, std::size_t);                  \
  template Var<T> narrow_last(const Var<T>&, std::size_t, std::size_t);                                    \
  template Var<T> gather_rows(const Var<T>&, const std::vector<std::size_t>&);                             \
  template Var<T> reshape(const Var<T>&, Shape);

CDS_INSTANTIATE_OPS(float)
CDS_INSTANTIATE_OPS(double)

}  // namespace cds
