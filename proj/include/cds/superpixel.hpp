// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Grid geometry, association maps and label post-processing.
//
// Neighbour channel k in [0,9) addresses the grid cell at offset
// (dr, dc) = (k / 3 - 1, k % 3 - 1) from the pixel's own cell, i.e. the order
// NW, N, NE, W, C, E, SW, S, SE. This order is part of the checkpoint format.

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "cds/image.hpp"
#include "cds/tensor.hpp"

namespace cds {

inline constexpr int kNeighbours = 9;
inline constexpr int kCenterChannel = 4;
inline constexpr int neighbour_dr(int k) { return k / 3 - 1; }
inline constexpr int neighbour_dc(int k) { return k % 3 - 1; }

bool is_power_of_two(int v);

struct GridSpec {
  int d = 0;
  int kh = 0;
  int kw = 0;

  int cells() const { return kh * kw; }
  int height() const { return kh * d; }
  int width() const { return kw * d; }

  // Throws ConfigError unless d is a power of two dividing both sides.
  static GridSpec make(int height, int width, int d);
};

// Per-pixel neighbour cell ids, planar [9,H,W]; -1 where the neighbour lies
// off the grid. `valid` mirrors ids != -1 and feeds masked_softmax directly.
struct NeighbourIndex {
  int height = 0;
  int width = 0;
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> valid;

  std::int32_t id(int k, int y, int x) const {
    return ids[(static_cast<std::size_t>(k) * height + y) * width + x];
  }
};

NeighbourIndex grid_index_map(int height, int width, int d);

// Planar [9,H,W] pixel-to-cell probabilities for one image.
struct AssociationMap {
  int height = 0;
  int width = 0;
  std::vector<float> q;

  float at(int y, int x, int k) const { return q[(static_cast<std::size_t>(k) * height + y) * width + x]; }
};

// Slice image `index` out of a [N,9,H,W] (or [9,H,W]) decoder output.
AssociationMap association_from_tensor(const Tensor<float>& q, std::size_t index = 0);

struct SuperpixelLabeling {
  int height = 0;
  int width = 0;
  std::vector<std::int32_t> labels;
  int n_used = 0;

  std::int32_t at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

int count_distinct(std::span<const std::int32_t> labels);
SuperpixelLabeling make_labeling(int height, int width, std::vector<std::int32_t> labels);

// Argmax over valid neighbours; ties go to the lowest channel index.
SuperpixelLabeling hard_assign(const AssociationMap& q, const GridSpec& grid);

// Relabels every 4-connected fragment that is smaller than min_size, or is not
// the largest fragment of its label, to the most frequent 4-adjacent label
// (ties to the smaller id). Smallest fragments go first; repeats until stable.
// Label ids are not renumbered.
SuperpixelLabeling enforce_connectivity(const SuperpixelLabeling& labeling, int min_size);
int default_min_size(int d);

// Network input size for a requested grid of sp_h x sp_w cells.
std::pair<int, int> plan_resize(int height, int width, int sp_h, int sp_w, int d);
// Aspect-preserving grid with roughly k cells.
std::pair<int, int> grid_for_count(int height, int width, int k);
// Cell (i, j) covers rows [i*H/sp_h, (i+1)*H/sp_h) and likewise for columns.
SuperpixelLabeling grid_tiling(int height, int width, int sp_h, int sp_w);

// Pixels with at least one 4-neighbour carrying a different label.
std::vector<std::uint8_t> boundary_mask(std::span<const std::int32_t> labels, int height, int width);

ImageRGB render_mean_fill(const ImageRGB& image, const SuperpixelLabeling& labeling);
ImageRGB boundary_overlay(const ImageRGB& image, const SuperpixelLabeling& labeling,
                          std::array<float, 3> color = {1.0f, 0.0f, 0.0f});

}  // namespace cds
