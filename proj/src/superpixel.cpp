// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0

#include "cds/superpixel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "cds/errors.hpp"

namespace cds {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

GridSpec GridSpec::make(int height, int width, int d) {
  if (!is_power_of_two(d)) throw ConfigError("grid size d=" + std::to_string(d) + " is not a power of two");
  if (height < d || width < d || height % d != 0 || width % d != 0) {
    throw ConfigError("image " + std::to_string(height) + "x" + std::to_string(width) +
                      " is not divisible by d=" + std::to_string(d));
  }
  return GridSpec{d, height / d, width / d};
}

NeighbourIndex grid_index_map(int height, int width, int d) {
  const GridSpec g = GridSpec::make(height, width, d);
  NeighbourIndex idx;
  idx.height = height;
  idx.width = width;
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  idx.ids.assign(plane * kNeighbours, -1);
  idx.valid.assign(plane * kNeighbours, 0);
  for (int k = 0; k < kNeighbours; ++k) {
    for (int y = 0; y < height; ++y) {
      const int r = y / d + neighbour_dr(k);
      for (int x = 0; x < width; ++x) {
        const int c = x / d + neighbour_dc(k);
        if (r < 0 || r >= g.kh || c < 0 || c >= g.kw) continue;
        const std::size_t i = k * plane + static_cast<std::size_t>(y) * width + x;
        idx.ids[i] = r * g.kw + c;
        idx.valid[i] = 1;
      }
    }
  }
  return idx;
}

AssociationMap association_from_tensor(const Tensor<float>& q, std::size_t index) {
  std::size_t n = 1, off = 0;
  if (q.rank() == 4) {
    n = q.dim(0);
    off = 1;
  } else if (q.rank() != 3) {
    throw DimensionError("association map must be [N,9,H,W] or [9,H,W], got " + shape_str(q.shape));
  }
  if (q.dim(off) != kNeighbours) throw DimensionError("association map needs 9 channels, got " + shape_str(q.shape));
  if (index >= n) throw DimensionError("association map index out of range");
  AssociationMap m;
  m.height = static_cast<int>(q.dim(off + 1));
  m.width = static_cast<int>(q.dim(off + 2));
  const std::size_t len = kNeighbours * static_cast<std::size_t>(m.height) * m.width;
  m.q.assign(q.data.begin() + static_cast<long>(index * len), q.data.begin() + static_cast<long>((index + 1) * len));
  return m;
}

int count_distinct(std::span<const std::int32_t> labels) {
  std::vector<std::int32_t> v(labels.begin(), labels.end());
  std::sort(v.begin(), v.end());
  return static_cast<int>(std::unique(v.begin(), v.end()) - v.begin());
}

SuperpixelLabeling make_labeling(int height, int width, std::vector<std::int32_t> labels) {
  if (labels.size() != static_cast<std::size_t>(height) * width) throw DataError("labeling: size mismatch");
  SuperpixelLabeling s{height, width, std::move(labels), 0};
  s.n_used = count_distinct(s.labels);
  return s;
}

SuperpixelLabeling hard_assign(const AssociationMap& q, const GridSpec& grid) {
  if (q.height != grid.height() || q.width != grid.width()) {
    throw DimensionError("hard_assign: association map does not match the grid");
  }
  const NeighbourIndex idx = grid_index_map(q.height, q.width, grid.d);
  const std::size_t plane = static_cast<std::size_t>(q.height) * q.width;
  std::vector<std::int32_t> labels(plane);
  for (std::size_t p = 0; p < plane; ++p) {
    int best = -1;
    float best_q = 0.0f;
    for (int k = 0; k < kNeighbours; ++k) {
      if (!idx.valid[k * plane + p]) continue;
      const float v = q.q[k * plane + p];
      if (best < 0 || v > best_q) {
        best = k;
        best_q = v;
      }
    }
    labels[p] = idx.ids[best * plane + p];
  }
  return make_labeling(q.height, q.width, std::move(labels));
}

int default_min_size(int d) { return std::max(1, d * d / 16); }

namespace {

struct Components {
  std::vector<int> comp;  // per pixel
  std::vector<int> size;
  std::vector<std::int32_t> label;
  std::vector<std::vector<int>> pixels;
};

Components find_components(const std::vector<std::int32_t>& labels, int height, int width) {
  Components c;
  c.comp.assign(labels.size(), -1);
  std::vector<int> stack;
  for (int start = 0; start < static_cast<int>(labels.size()); ++start) {
    if (c.comp[start] >= 0) continue;
    const int id = static_cast<int>(c.size.size());
    const std::int32_t lab = labels[start];
    std::vector<int> members;
    stack.push_back(start);
    c.comp[start] = id;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      members.push_back(p);
      const int y = p / width, x = p % width;
      const int nb[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
      for (const auto& n : nb) {
        if (n[0] < 0 || n[0] >= height || n[1] < 0 || n[1] >= width) continue;
        const int q = n[0] * width + n[1];
        if (c.comp[q] < 0 && labels[q] == lab) {
          c.comp[q] = id;
          stack.push_back(q);
        }
      }
    }
    c.size.push_back(static_cast<int>(members.size()));
    c.label.push_back(lab);
    c.pixels.push_back(std::move(members));
  }
  return c;
}

}  // namespace

SuperpixelLabeling enforce_connectivity(const SuperpixelLabeling& labeling, int min_size) {
  if (min_size < 1) throw ConfigError("enforce_connectivity: min_size must be >= 1");
  const int h = labeling.height, w = labeling.width;
  std::vector<std::int32_t> labels = labeling.labels;
  for (;;) {
    const Components c = find_components(labels, h, w);
    std::map<std::int32_t, int> largest;  // label -> component
    for (int i = 0; i < static_cast<int>(c.size.size()); ++i) {
      auto it = largest.find(c.label[i]);
      if (it == largest.end() || c.size[i] > c.size[it->second]) largest[c.label[i]] = i;
    }
    std::vector<int> bad;
    for (int i = 0; i < static_cast<int>(c.size.size()); ++i) {
      if (c.size[i] < min_size || largest[c.label[i]] != i) bad.push_back(i);
    }
    std::stable_sort(bad.begin(), bad.end(), [&](int a, int b) { return c.size[a] < c.size[b]; });
    bool changed = false;
    for (int i : bad) {
      const std::int32_t own = labels[c.pixels[i].front()];
      std::map<std::int32_t, int> votes;
      for (int p : c.pixels[i]) {
        const int y = p / w, x = p % w;
        const int nb[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
        for (const auto& n : nb) {
          if (n[0] < 0 || n[0] >= h || n[1] < 0 || n[1] >= w) continue;
          const std::int32_t l = labels[n[0] * w + n[1]];
          if (l != own) ++votes[l];
        }
      }
      if (votes.empty()) continue;
      std::int32_t target = votes.begin()->first;
      int best = votes.begin()->second;
      for (const auto& [l, v] : votes) {
        if (v > best) {
          best = v;
          target = l;
        }
      }
      for (int p : c.pixels[i]) labels[p] = target;
      changed = true;
    }
    if (!changed) break;
  }
  return make_labeling(h, w, std::move(labels));
}

std::pair<int, int> plan_resize(int height, int width, int sp_h, int sp_w, int d) {
  if (height < 1 || width < 1) throw DataError("plan_resize: empty image");
  if (sp_h < 2 || sp_w < 2) throw ConfigError("superpixel grid must be at least 2x2");
  if (!is_power_of_two(d)) throw ConfigError("grid size d=" + std::to_string(d) + " is not a power of two");
  return {sp_h * d, sp_w * d};
}

std::pair<int, int> grid_for_count(int height, int width, int k) {
  if (k < 1) throw ConfigError("superpixel count must be positive");
  const int sp_h = std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(k) * height / width))));
  const int sp_w = std::max(1, k / sp_h);
  return {sp_h, sp_w};
}

SuperpixelLabeling grid_tiling(int height, int width, int sp_h, int sp_w) {
  if (sp_h < 1 || sp_w < 1 || sp_h > height || sp_w > width) throw ConfigError("grid_tiling: invalid grid");
  std::vector<std::int32_t> labels(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y) {
    const int r = static_cast<int>(static_cast<long>(y) * sp_h / height);
    for (int x = 0; x < width; ++x) {
      const int c = static_cast<int>(static_cast<long>(x) * sp_w / width);
      labels[static_cast<std::size_t>(y) * width + x] = r * sp_w + c;
    }
  }
  return make_labeling(height, width, std::move(labels));
}

std::vector<std::uint8_t> boundary_mask(std::span<const std::int32_t> labels, int height, int width) {
  std::vector<std::uint8_t> mask(labels.size(), 0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      const std::int32_t l = labels[i];
      if ((y > 0 && labels[i - width] != l) || (y + 1 < height && labels[i + width] != l) ||
          (x > 0 && labels[i - 1] != l) || (x + 1 < width && labels[i + 1] != l)) {
        mask[i] = 1;
      }
    }
  }
  return mask;
}

ImageRGB render_mean_fill(const ImageRGB& image, const SuperpixelLabeling& labeling) {
  if (image.height != labeling.height || image.width != labeling.width) {
    throw DataError("render: image and labels differ in size");
  }
  std::vector<std::int32_t> ids = labeling.labels;
  const int n = compact_labels(ids);
  std::vector<double> sums(static_cast<std::size_t>(n) * 3, 0.0);
  std::vector<long> counts(n, 0);
  for (std::size_t p = 0; p < ids.size(); ++p) {
    ++counts[ids[p]];
    for (int c = 0; c < 3; ++c) sums[ids[p] * 3 + c] += image.pixels[p * 3 + c];
  }
  ImageRGB out(image.height, image.width);
  for (std::size_t p = 0; p < ids.size(); ++p) {
    for (int c = 0; c < 3; ++c) {
      out.pixels[p * 3 + c] = static_cast<float>(sums[ids[p] * 3 + c] / counts[ids[p]]);
    }
  }
  return out;
}

ImageRGB boundary_overlay(const ImageRGB& image, const SuperpixelLabeling& labeling, std::array<float, 3> color) {
  if (image.height != labeling.height || image.width != labeling.width) {
    throw DataError("render: image and labels differ in size");
  }
  const std::vector<std::uint8_t> mask = boundary_mask(labeling.labels, labeling.height, labeling.width);
  ImageRGB out = image;
  for (std::size_t p = 0; p < mask.size(); ++p) {
    if (!mask[p]) continue;
    for (int c = 0; c < 3; ++c) out.pixels[p * 3 + c] = color[c];
  }
  return out;
}

}  // namespace cds
