// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "cds/errors.hpp"
#include "cds/image.hpp"

namespace cds {

ImageRGB resize_bilinear(const ImageRGB& image, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw DataError("resize_bilinear: empty target size");
  if (out_h == image.height && out_w == image.width) return image;
  ImageRGB out(out_h, out_w);
  const double sy = out_h > 1 ? static_cast<double>(image.height - 1) / (out_h - 1) : 0.0;
  const double sx = out_w > 1 ? static_cast<double>(image.width - 1) / (out_w - 1) : 0.0;
  for (int y = 0; y < out_h; ++y) {
    const double fy = y * sy;
    const int y0 = std::min(static_cast<int>(fy), image.height - 1);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double ty = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = x * sx;
      const int x0 = std::min(static_cast<int>(fx), image.width - 1);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double tx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - tx) * image.at(y0, x0, c) + tx * image.at(y0, x1, c);
        const double bot = (1.0 - tx) * image.at(y1, x0, c) + tx * image.at(y1, x1, c);
        out.at(y, x, c) = static_cast<float>((1.0 - ty) * top + ty * bot);
      }
    }
  }
  return out;
}

std::vector<std::int32_t> resize_nearest(std::span<const std::int32_t> ids, int height, int width, int out_h,
                                         int out_w) {
  if (ids.size() != static_cast<std::size_t>(height) * width) throw DataError("resize_nearest: size mismatch");
  if (out_h < 1 || out_w < 1) throw DataError("resize_nearest: empty target size");
  std::vector<std::int32_t> out(static_cast<std::size_t>(out_h) * out_w);
  for (int y = 0; y < out_h; ++y) {
    const long sy = static_cast<long>(y) * height / out_h;
    for (int x = 0; x < out_w; ++x) {
      const long sx = static_cast<long>(x) * width / out_w;
      out[static_cast<std::size_t>(y) * out_w + x] = ids[static_cast<std::size_t>(sy) * width + sx];
    }
  }
  return out;
}

ImageRGB flip_horizontal(const ImageRGB& image) {
  ImageRGB out(image.height, image.width);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = image.at(y, image.width - 1 - x, c);
  return out;
}

ImageRGB flip_vertical(const ImageRGB& image) {
  ImageRGB out(image.height, image.width);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = image.at(image.height - 1 - y, x, c);
  return out;
}

AugmentPlan sample_augment(int height, int width, const AugmentConfig& cfg, Rng& rng) {
  if (cfg.crop < 1) throw ConfigError("augment: crop must be positive");
  const double fit = static_cast<double>(cfg.crop) / std::min(height, width);
  const double lo = std::max(cfg.scale_min, fit);
  if (lo > cfg.scale_max) {
    throw DataError("augment: " + std::to_string(height) + "x" + std::to_string(width) +
                    " image is smaller than the crop " + std::to_string(cfg.crop) + " at the largest scale");
  }
  const double scale = rng.uniform(lo, cfg.scale_max);
  AugmentPlan plan;
  plan.resized_h = std::max(cfg.crop, static_cast<int>(std::lround(height * scale)));
  plan.resized_w = std::max(cfg.crop, static_cast<int>(std::lround(width * scale)));
  plan.crop = cfg.crop;
  plan.top = rng.uniform_int(0, plan.resized_h - cfg.crop);
  plan.left = rng.uniform_int(0, plan.resized_w - cfg.crop);
  plan.flip_h = rng.bernoulli(cfg.flip_prob);
  plan.flip_v = rng.bernoulli(cfg.flip_prob);
  return plan;
}

std::pair<ImageRGB, LabelMap> apply_augment(const ImageRGB& image, const LabelMap& labels, const AugmentPlan& plan) {
  if (image.height != labels.height || image.width != labels.width) {
    throw DataError("augment: image and label sizes differ");
  }
  if (plan.top < 0 || plan.left < 0 || plan.top + plan.crop > plan.resized_h ||
      plan.left + plan.crop > plan.resized_w) {
    throw DataError("augment: crop window outside the resized image");
  }
  const ImageRGB resized = resize_bilinear(image, plan.resized_h, plan.resized_w);
  const std::vector<std::int32_t> rl =
      resize_nearest(labels.labels, labels.height, labels.width, plan.resized_h, plan.resized_w);

  const int n = plan.crop;
  ImageRGB img(n, n);
  std::vector<std::int32_t> ids(static_cast<std::size_t>(n) * n);
  for (int y = 0; y < n; ++y) {
    const int sy = plan.top + (plan.flip_v ? n - 1 - y : y);
    for (int x = 0; x < n; ++x) {
      const int sx = plan.left + (plan.flip_h ? n - 1 - x : x);
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = resized.at(sy, sx, c);
      ids[static_cast<std::size_t>(y) * n + x] = rl[static_cast<std::size_t>(sy) * plan.resized_w + sx];
    }
  }
  return {std::move(img), make_label_map(n, n, std::move(ids))};
}

std::pair<ImageRGB, LabelMap> augment(const ImageRGB& image, const LabelMap& labels, const AugmentConfig& cfg,
                                      Rng& rng) {
  return apply_augment(image, labels, sample_augment(image.height, image.width, cfg, rng));
}

}  // namespace cds
