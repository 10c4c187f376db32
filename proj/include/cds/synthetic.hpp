// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic segmentation corpus: flat-coloured rectangles and
// convex polygons over a background, with mild pixel noise.

#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>

#include "cds/image.hpp"

namespace cds {

// 3 to 6 regions; labels are contiguous and pixel values are multiples of
// 1/255, so PPM round trips are exact.
std::pair<ImageRGB, LabelMap> make_synthetic_sample(int size, std::uint64_t seed);

// Writes img_XXXX.ppm / lbl_XXXX.pgm pairs and manifest.csv into `dir`
// (created if needed). Returns the manifest path.
std::filesystem::path make_synthetic_dataset(const std::filesystem::path& dir, int n, int size, std::uint64_t seed);

}  // namespace cds
