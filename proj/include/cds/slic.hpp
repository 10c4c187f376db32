// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0
//
// SLIC superpixels over raw CIELAB + pixel coordinates, and a plain grid
// tiling baseline.

#pragma once

#include <vector>

#include "cds/image.hpp"
#include "cds/superpixel.hpp"

namespace cds {

struct SlicConfig {
  int k = 100;
  double m = 10.0;
  int iters = 10;
  bool perturb_seeds = true;
  bool connectivity = true;
  // 0 selects (N/k)/4.
  int min_size = 0;
};

struct SlicResult {
  SuperpixelLabeling labeling;
  // Sum of squared distances D² after each iteration.
  std::vector<double> energy;
};

SlicResult slic_detailed(const ImageRGB& image, const SlicConfig& cfg);
SuperpixelLabeling slic(const ImageRGB& image, const SlicConfig& cfg);

// d x d cells; the last row/column of cells is truncated when d does not divide
// the image.
SuperpixelLabeling grid_baseline(int height, int width, int d);

}  // namespace cds
