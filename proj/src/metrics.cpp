// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0

#include "cds/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "cds/errors.hpp"

namespace cds {
namespace {

void require_same_size(const SuperpixelLabeling& sp, const LabelMap& gt) {
  if (sp.height != gt.height || sp.width != gt.width) {
    throw DataError("metrics: prediction is " + std::to_string(sp.height) + "x" + std::to_string(sp.width) +
                    " but ground truth is " + std::to_string(gt.height) + "x" + std::to_string(gt.width));
  }
  if (sp.labels.empty()) throw DataError("metrics: empty labeling");
}

// Dense contingency table n[i][j] = |S_i ∩ G_j| over compacted ids.
struct Contingency {
  int ns = 0;
  int ng = 0;
  std::vector<long> n;
  std::vector<long> sp_size;

  long at(int i, int j) const { return n[static_cast<std::size_t>(i) * ng + j]; }
};

Contingency contingency(const SuperpixelLabeling& sp, const LabelMap& gt) {
  std::vector<std::int32_t> s = sp.labels, g = gt.labels;
  Contingency c;
  c.ns = compact_labels(s);
  c.ng = compact_labels(g);
  c.n.assign(static_cast<std::size_t>(c.ns) * c.ng, 0);
  c.sp_size.assign(c.ns, 0);
  for (std::size_t p = 0; p < s.size(); ++p) {
    ++c.n[static_cast<std::size_t>(s[p]) * c.ng + g[p]];
    ++c.sp_size[s[p]];
  }
  return c;
}

// Chebyshev dilation as a separable box max filter.
std::vector<std::uint8_t> dilate(const std::vector<std::uint8_t>& mask, int h, int w, int r) {
  if (r <= 0) return mask;
  std::vector<std::uint8_t> rows(mask.size(), 0), out(mask.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = 0;
      for (int dx = std::max(0, x - r); dx <= std::min(w - 1, x + r) && !v; ++dx) v = mask[y * w + dx];
      rows[y * w + x] = v;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = 0;
      for (int dy = std::max(0, y - r); dy <= std::min(h - 1, y + r) && !v; ++dy) v = rows[dy * w + x];
      out[y * w + x] = v;
    }
  }
  return out;
}

}  // namespace

double asa(const SuperpixelLabeling& sp, const LabelMap& gt) {
  require_same_size(sp, gt);
  const Contingency c = contingency(sp, gt);
  long total = 0;
  for (int i = 0; i < c.ns; ++i) {
    long best = 0;
    for (int j = 0; j < c.ng; ++j) best = std::max(best, c.at(i, j));
    total += best;
  }
  return static_cast<double>(total) / static_cast<double>(sp.labels.size());
}

double ue(const SuperpixelLabeling& sp, const LabelMap& gt) {
  require_same_size(sp, gt);
  const Contingency c = contingency(sp, gt);
  long total = 0;
  for (int j = 0; j < c.ng; ++j) {
    for (int i = 0; i < c.ns; ++i) {
      const long inter = c.at(i, j);
      if (inter > 0) total += std::min(inter, c.sp_size[i] - inter);
    }
  }
  return static_cast<double>(total) / static_cast<double>(sp.labels.size());
}

double co(const SuperpixelLabeling& sp) {
  if (sp.labels.empty()) throw DataError("metrics: empty labeling");
  std::vector<std::int32_t> ids = sp.labels;
  const int n = compact_labels(ids);
  std::vector<long> area(n, 0), perim(n, 0);
  const int h = sp.height, w = sp.width;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const std::int32_t l = ids[i];
      ++area[l];
      perim[l] += (y == 0 || ids[i - w] != l) + (y + 1 == h || ids[i + w] != l) + (x == 0 || ids[i - 1] != l) +
                  (x + 1 == w || ids[i + 1] != l);
    }
  }
  double total = 0.0;
  for (int l = 0; l < n; ++l) {
    const double a = static_cast<double>(area[l]);
    const double p = static_cast<double>(perim[l]);
    total += a * 4.0 * std::numbers::pi * a / (p * p);
  }
  return total / static_cast<double>(ids.size());
}

BoundaryScores br_bp(const SuperpixelLabeling& sp, const LabelMap& gt, int tol) {
  require_same_size(sp, gt);
  if (tol < 0) throw ConfigError("boundary tolerance must be >= 0");
  const int h = sp.height, w = sp.width;
  const auto sb = boundary_mask(sp.labels, h, w);
  const auto gb = boundary_mask(gt.labels, h, w);
  const auto sd = dilate(sb, h, w, tol);
  const auto gd = dilate(gb, h, w, tol);
  long g_total = 0, g_hit = 0, s_total = 0, s_hit = 0;
  for (std::size_t p = 0; p < sb.size(); ++p) {
    if (gb[p]) {
      ++g_total;
      g_hit += sd[p];
    }
    if (sb[p]) {
      ++s_total;
      s_hit += gd[p];
    }
  }
  BoundaryScores r;
  r.recall = g_total == 0 ? 1.0 : static_cast<double>(g_hit) / static_cast<double>(g_total);
  r.precision = s_total == 0 ? 1.0 : static_cast<double>(s_hit) / static_cast<double>(s_total);
  return r;
}

int default_tolerance(int height, int width) {
  return static_cast<int>(std::lround(0.0025 * std::hypot(static_cast<double>(height), static_cast<double>(width))));
}

MetricReport evaluate(const SuperpixelLabeling& sp, const LabelMap& gt, int tol) {
  MetricReport r;
  r.n_superpixels = count_distinct(sp.labels);
  r.asa = asa(sp, gt);
  const BoundaryScores b = br_bp(sp, gt, tol);
  r.br = b.recall;
  r.bp = b.precision;
  r.ue = ue(sp, gt);
  r.co = co(sp);
  return r;
}

std::string format_metrics_row(int count, const MetricReport& report) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%.6f,%.6f", count, report.asa, report.br, report.bp, report.ue,
                report.co);
  return buf;
}

}  // namespace cds
