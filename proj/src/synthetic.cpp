// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0

#include "cds/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "cds/errors.hpp"
#include "cds/rng.hpp"

namespace cds {
namespace {

using Color = std::array<double, 3>;

Color pick_color(Rng& rng, const std::vector<Color>& used) {
  Color c{};
  for (int attempt = 0; attempt < 64; ++attempt) {
    for (double& v : c) v = rng.uniform(0.05, 0.95);
    bool distinct = true;
    for (const Color& u : used) {
      if (std::abs(u[0] - c[0]) + std::abs(u[1] - c[1]) + std::abs(u[2] - c[2]) < 0.3) distinct = false;
    }
    if (distinct) break;
  }
  return c;
}

// Convex polygon with vertices sorted by angle around (cy, cx).
struct Polygon {
  std::vector<std::array<double, 2>> v;

  bool contains(double y, double x) const {
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto& a = v[i];
      const auto& b = v[(i + 1) % v.size()];
      if ((b[1] - a[1]) * (y - a[0]) - (b[0] - a[0]) * (x - a[1]) < 0.0) return false;
    }
    return true;
  }
};

}  // namespace

std::pair<ImageRGB, LabelMap> make_synthetic_sample(int size, std::uint64_t seed) {
  if (size < 8) throw ConfigError("synthetic images must be at least 8x8");
  Rng rng(seed);
  for (;;) {
    const int regions = rng.uniform_int(3, 6);
    std::vector<Color> colors{pick_color(rng, {})};
    std::vector<std::int32_t> ids(static_cast<std::size_t>(size) * size, 0);
    for (int r = 1; r < regions; ++r) {
      colors.push_back(pick_color(rng, colors));
      if (r % 2 == 1) {
        const int h = rng.uniform_int(size / 5, size / 2), w = rng.uniform_int(size / 5, size / 2);
        const int top = rng.uniform_int(0, size - h), left = rng.uniform_int(0, size - w);
        for (int y = top; y < top + h; ++y)
          for (int x = left; x < left + w; ++x) ids[static_cast<std::size_t>(y) * size + x] = r;
      } else {
        const double cy = rng.uniform(0.2, 0.8) * size, cx = rng.uniform(0.2, 0.8) * size;
        const double radius = rng.uniform(size / 6.0, size / 3.0);
        const int n_vert = rng.uniform_int(3, 6);
        std::vector<double> angles(n_vert);
        for (double& a : angles) a = rng.uniform(0.0, 2.0 * std::numbers::pi);
        std::sort(angles.begin(), angles.end());
        Polygon poly;
        for (double a : angles) {
          const double rr = radius * rng.uniform(0.7, 1.0);
          poly.v.push_back({cy + rr * std::sin(a), cx + rr * std::cos(a)});
        }
        for (int y = 0; y < size; ++y)
          for (int x = 0; x < size; ++x)
            if (poly.contains(y + 0.5, x + 0.5)) ids[static_cast<std::size_t>(y) * size + x] = r;
      }
    }
    LabelMap labels = make_label_map(size, size, ids);
    if (labels.n_regions < 3) continue;
    // Colours follow the original region index so compaction cannot swap them.
    ImageRGB image(size, size);
    for (std::size_t p = 0; p < ids.size(); ++p) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(colors[ids[p]][c] + 0.02 * rng.normal(), 0.0, 1.0);
        image.pixels[p * 3 + c] = static_cast<float>(std::lround(v * 255.0)) / 255.0f;
      }
    }
    return {std::move(image), std::move(labels)};
  }
}

std::filesystem::path make_synthetic_dataset(const std::filesystem::path& dir, int n, int size, std::uint64_t seed) {
  if (n < 1) throw ConfigError("synthetic dataset needs at least one image");
  std::filesystem::create_directories(dir);
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < n; ++i) {
    auto [image, labels] = make_synthetic_sample(size, Rng::derive(seed, static_cast<std::uint64_t>(i)));
    char img_name[32], lbl_name[32];
    std::snprintf(img_name, sizeof img_name, "img_%04d.ppm", i);
    std::snprintf(lbl_name, sizeof lbl_name, "lbl_%04d.pgm", i);
    save_image(dir / img_name, image);
    save_label_map(dir / lbl_name, labels);
    entries.push_back({img_name, lbl_name});
  }
  const std::filesystem::path manifest = dir / "manifest.csv";
  write_manifest(manifest, entries);
  return manifest;
}

}  // namespace cds
