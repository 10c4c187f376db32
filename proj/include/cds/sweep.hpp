// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Metric-vs-superpixel-count curves over a manifest.

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cds/image.hpp"
#include "cds/metrics.hpp"
#include "cds/model.hpp"
#include "cds/slic.hpp"

namespace cds {

enum class SweepMethod { Cds, Slic, Grid };
SweepMethod parse_sweep_method(std::string_view name);

struct SweepOptions {
  SweepMethod method = SweepMethod::Grid;
  std::vector<int> counts;
  int jobs = 1;
  bool connectivity = true;
  // Negative selects the per-image default tolerance.
  int tol = -1;
  ModelParams<float>* model = nullptr;
  SlicConfig slic;
};

struct SweepRow {
  int requested = 0;
  // Rounded mean of the actual per-image superpixel counts.
  int count = 0;
  MetricReport mean;
  int images = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  // Inputs that could not be read; they are skipped.
  std::vector<std::string> errors;
};

// Superpixels for one image at a requested count.
SuperpixelLabeling superpixels_for_count(const ImageRGB& image, int count, const SweepOptions& opts);

SweepResult sweep(const std::vector<ManifestEntry>& entries, const SweepOptions& opts);
std::string sweep_csv(const SweepResult& result);

// Worker count: jobs, capped by CDS_THREADS when set.
int effective_jobs(int jobs);

}  // namespace cds
