// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Superpixel quality metrics against a ground-truth partition. N is the pixel
// count, S_i the superpixels and G_j the ground-truth regions.

#pragma once

#include <string>

#include "cds/image.hpp"
#include "cds/superpixel.hpp"

namespace cds {

struct MetricReport {
  int n_superpixels = 0;
  double asa = 0.0;
  double br = 0.0;
  double bp = 0.0;
  double ue = 0.0;
  double co = 0.0;
};

// (1/N) sum_i max_j |S_i ∩ G_j|
double asa(const SuperpixelLabeling& sp, const LabelMap& gt);

// (1/N) sum_j sum_{i : S_i ∩ G_j != ∅} min(|S_i ∩ G_j|, |S_i \ G_j|)
double ue(const SuperpixelLabeling& sp, const LabelMap& gt);

// (1/N) sum_i |S_i| * 4πA / P², A = pixel count, P = pixel edges on the label
// boundary or the image frame.
double co(const SuperpixelLabeling& sp);

struct BoundaryScores {
  double recall = 0.0;
  double precision = 0.0;
};

// Boundary pixels have a 4-neighbour with another label. A boundary pixel is
// matched when the other map has a boundary pixel within Chebyshev distance
// tol. Recall is 1 when gt has no boundary; precision is 1 when sp has none.
BoundaryScores br_bp(const SuperpixelLabeling& sp, const LabelMap& gt, int tol);
int default_tolerance(int height, int width);

MetricReport evaluate(const SuperpixelLabeling& sp, const LabelMap& gt, int tol);

inline constexpr const char* kMetricsCsvHeader = "count,asa,br,bp,ue,co";
// One CSV row, six decimals, no line terminator.
std::string format_metrics_row(int count, const MetricReport& report);

}  // namespace cds
