// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0

#include "cds/slic.hpp"

#include <algorithm>
#include <cmath>

#include "cds/errors.hpp"

namespace cds {
namespace {

struct Center {
  double l, a, b, y, x;
};

}  // namespace

SlicResult slic_detailed(const ImageRGB& image, const SlicConfig& cfg) {
  const int h = image.height, w = image.width;
  const long n = static_cast<long>(h) * w;
  if (n == 0) throw DataError("slic: empty image");
  if (cfg.k < 1 || cfg.k > n) throw ConfigError("slic: k must lie in [1, " + std::to_string(n) + "]");
  if (cfg.iters < 1) throw ConfigError("slic: iters must be >= 1");
  if (cfg.m < 0.0) throw ConfigError("slic: m must be >= 0");

  const LabImage lab = rgb_to_lab_raw(image);
  auto px = [&](int y, int x) { return &lab.lab[(static_cast<std::size_t>(y) * w + x) * 3]; };
  const double s = std::sqrt(static_cast<double>(n) / cfg.k);
  const double spatial = (cfg.m / s) * (cfg.m / s);

  const auto [ny, nx] = grid_for_count(h, w, cfg.k);
  if (ny > h || nx > w) throw ConfigError("slic: seed grid larger than the image");

  auto grad_at = [&](int y, int x) {
    const double* u = px(std::max(y - 1, 0), x);
    const double* d = px(std::min(y + 1, h - 1), x);
    const double* l = px(y, std::max(x - 1, 0));
    const double* r = px(y, std::min(x + 1, w - 1));
    double g = 0.0;
    for (int c = 0; c < 3; ++c) g += (d[c] - u[c]) * (d[c] - u[c]) + (r[c] - l[c]) * (r[c] - l[c]);
    return g;
  };

  std::vector<Center> centers;
  centers.reserve(static_cast<std::size_t>(ny) * nx);
  for (int i = 0; i < ny; ++i) {
    for (int j = 0; j < nx; ++j) {
      const double cy = (i + 0.5) * h / ny;
      const double cx = (j + 0.5) * w / nx;
      int sy = std::min(h - 1, static_cast<int>(cy));
      int sx = std::min(w - 1, static_cast<int>(cx));
      double yy = cy, xx = cx;
      if (cfg.perturb_seeds) {
        double best = grad_at(sy, sx);
        int by = sy, bx = sx;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int y = sy + dy, x = sx + dx;
            if (y < 0 || y >= h || x < 0 || x >= w) continue;
            const double g = grad_at(y, x);
            if (g < best) {
              best = g;
              by = y;
              bx = x;
            }
          }
        }
        if (by != sy || bx != sx) {
          sy = by;
          sx = bx;
          yy = sy + 0.5;
          xx = sx + 0.5;
        }
      }
      const double* c = px(sy, sx);
      centers.push_back({c[0], c[1], c[2], yy, xx});
    }
  }

  auto dist2 = [&](const Center& c, int y, int x) {
    const double* p = px(y, x);
    const double dl = p[0] - c.l, da = p[1] - c.a, db = p[2] - c.b;
    const double dy = y + 0.5 - c.y, dx = x + 0.5 - c.x;
    return dl * dl + da * da + db * db + spatial * (dy * dy + dx * dx);
  };

  // Start from the seed cell containing each pixel centre.
  std::vector<std::int32_t> labels(static_cast<std::size_t>(n));
  for (int y = 0; y < h; ++y) {
    const int i = std::min(ny - 1, static_cast<int>((y + 0.5) * ny / h));
    for (int x = 0; x < w; ++x) {
      const int j = std::min(nx - 1, static_cast<int>((x + 0.5) * nx / w));
      labels[static_cast<std::size_t>(y) * w + x] = i * nx + j;
    }
  }

  SlicResult result;
  std::vector<double> best(static_cast<std::size_t>(n));
  for (int it = 0; it < cfg.iters; ++it) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        best[p] = dist2(centers[labels[p]], y, x);
      }
    }
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const Center& c = centers[k];
      const int y0 = std::max(0, static_cast<int>(std::floor(c.y - s)) - 1);
      const int y1 = std::min(h - 1, static_cast<int>(std::ceil(c.y + s)));
      const int x0 = std::max(0, static_cast<int>(std::floor(c.x - s)) - 1);
      const int x1 = std::min(w - 1, static_cast<int>(std::ceil(c.x + s)));
      for (int y = y0; y <= y1; ++y) {
        if (std::abs(y + 0.5 - c.y) > s) continue;
        for (int x = x0; x <= x1; ++x) {
          if (std::abs(x + 0.5 - c.x) > s) continue;
          const std::size_t p = static_cast<std::size_t>(y) * w + x;
          const double d = dist2(c, y, x);
          if (d < best[p]) {
            best[p] = d;
            labels[p] = static_cast<std::int32_t>(k);
          }
        }
      }
    }
    std::vector<double> acc(centers.size() * 5, 0.0);
    std::vector<long> count(centers.size(), 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        const std::size_t k = labels[p];
        const double* v = px(y, x);
        acc[k * 5 + 0] += v[0];
        acc[k * 5 + 1] += v[1];
        acc[k * 5 + 2] += v[2];
        acc[k * 5 + 3] += y + 0.5;
        acc[k * 5 + 4] += x + 0.5;
        ++count[k];
      }
    }
    for (std::size_t k = 0; k < centers.size(); ++k) {
      if (count[k] == 0) continue;
      const double inv = 1.0 / static_cast<double>(count[k]);
      centers[k] = {acc[k * 5] * inv, acc[k * 5 + 1] * inv, acc[k * 5 + 2] * inv, acc[k * 5 + 3] * inv,
                    acc[k * 5 + 4] * inv};
    }
    double energy = 0.0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) energy += dist2(centers[labels[static_cast<std::size_t>(y) * w + x]], y, x);
    }
    result.energy.push_back(energy);
  }

  SuperpixelLabeling out = make_labeling(h, w, std::move(labels));
  if (cfg.connectivity) {
    const int min_size = cfg.min_size > 0 ? cfg.min_size : std::max<int>(1, static_cast<int>(n / cfg.k / 4));
    out = enforce_connectivity(out, min_size);
  }
  result.labeling = std::move(out);
  return result;
}

SuperpixelLabeling slic(const ImageRGB& image, const SlicConfig& cfg) { return slic_detailed(image, cfg).labeling; }

SuperpixelLabeling grid_baseline(int height, int width, int d) {
  if (d < 1) throw ConfigError("grid_baseline: d must be >= 1");
  const int kw = (width + d - 1) / d;
  std::vector<std::int32_t> labels(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) labels[static_cast<std::size_t>(y) * width + x] = (y / d) * kw + x / d;
  return make_labeling(height, width, std::move(labels));
}

}  // namespace cds
