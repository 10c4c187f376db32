// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0

#include "cds/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <thread>

#include "cds/errors.hpp"
#include "cds/inference.hpp"

namespace cds {

SweepMethod parse_sweep_method(std::string_view name) {
  if (name == "cds") return SweepMethod::Cds;
  if (name == "slic") return SweepMethod::Slic;
  if (name == "grid") return SweepMethod::Grid;
  throw ConfigError("unknown method '" + std::string(name) + "' (expected cds|slic|grid)");
}

int effective_jobs(int jobs) {
  int n = std::max(1, jobs);
  if (const char* env = std::getenv("CDS_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

SuperpixelLabeling superpixels_for_count(const ImageRGB& image, int count, const SweepOptions& opts) {
  auto [sp_h, sp_w] = grid_for_count(image.height, image.width, count);
  switch (opts.method) {
    case SweepMethod::Grid: {
      sp_h = std::min(sp_h, image.height);
      sp_w = std::min(sp_w, image.width);
      return grid_tiling(image.height, image.width, sp_h, sp_w);
    }
    case SweepMethod::Slic: {
      SlicConfig cfg = opts.slic;
      cfg.k = count;
      cfg.connectivity = opts.connectivity;
      return slic(image, cfg);
    }
    case SweepMethod::Cds: {
      if (!opts.model) throw ConfigError("method cds needs a model");
      InferenceOptions inf;
      inf.sp_h = std::max(2, sp_h);
      inf.sp_w = std::max(2, sp_w);
      inf.connectivity = opts.connectivity;
      return infer_labels(*opts.model, image, inf);
    }
  }
  throw ConfigError("unknown sweep method");
}

SweepResult sweep(const std::vector<ManifestEntry>& entries, const SweepOptions& opts) {
  if (opts.counts.empty()) throw ConfigError("no superpixel counts requested");
  if (!std::is_sorted(opts.counts.begin(), opts.counts.end())) throw ConfigError("counts must be ascending");
  if (opts.method == SweepMethod::Cds && !opts.model) throw ConfigError("method cds needs --model");

  SweepResult result;
  std::vector<std::optional<std::pair<ImageRGB, LabelMap>>> data;
  for (const auto& e : entries) {
    try {
      ImageRGB img = load_image(e.image);
      LabelMap gt = load_label_map(e.label);
      if (img.height != gt.height || img.width != gt.width) throw DataError(e.image.string() + ": size mismatch");
      data.emplace_back(std::make_pair(std::move(img), std::move(gt)));
    } catch (const std::exception& ex) {
      result.errors.push_back(ex.what());
    }
  }
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data[i]) valid.push_back(i);

  const int jobs = effective_jobs(opts.jobs);
  for (int count : opts.counts) {
    std::vector<MetricReport> reports(valid.size());
    std::vector<std::string> failures(valid.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t k = next++; k < valid.size(); k = next++) {
        const auto& [img, gt] = *data[valid[k]];
        try {
          const SuperpixelLabeling sp = superpixels_for_count(img, count, opts);
          const int tol = opts.tol >= 0 ? opts.tol : default_tolerance(img.height, img.width);
          reports[k] = evaluate(sp, gt, tol);
        } catch (const std::exception& ex) {
          failures[k] = ex.what();
        }
      }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    SweepRow row;
    row.requested = count;
    double n_sum = 0.0;
    for (std::size_t k = 0; k < reports.size(); ++k) {
      if (!failures[k].empty()) {
        result.errors.push_back(failures[k]);
        continue;
      }
      const MetricReport& r = reports[k];
      n_sum += r.n_superpixels;
      row.mean.asa += r.asa;
      row.mean.br += r.br;
      row.mean.bp += r.bp;
      row.mean.ue += r.ue;
      row.mean.co += r.co;
      ++row.images;
    }
    if (row.images > 0) {
      const double inv = 1.0 / row.images;
      row.mean.asa *= inv;
      row.mean.br *= inv;
      row.mean.bp *= inv;
      row.mean.ue *= inv;
      row.mean.co *= inv;
      row.count = static_cast<int>(std::lround(n_sum * inv));
      row.mean.n_superpixels = row.count;
      result.rows.push_back(row);
    }
  }
  return result;
}

std::string sweep_csv(const SweepResult& result) {
  std::string out = std::string(kMetricsCsvHeader) + "\n";
  for (const auto& r : result.rows) out += format_metrics_row(r.count, r.mean) + "\n";
  return out;
}

}  // namespace cds
