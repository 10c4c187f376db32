// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <atomic>
#include <cmath>

#include "cds/errors.hpp"
#include "cds/image.hpp"

namespace cds {
namespace {

std::atomic<std::uint64_t> g_aux_constructions{0};

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

}  // namespace

void minmax_normalize(std::vector<float>& pixels) {
  const std::size_t n = pixels.size() / 3;
  for (int c = 0; c < 3; ++c) {
    float lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < n; ++i) {
      lo = std::min(lo, pixels[i * 3 + c]);
      hi = std::max(hi, pixels[i * 3 + c]);
    }
    const float range = hi - lo;
    for (std::size_t i = 0; i < n; ++i) {
      float& v = pixels[i * 3 + c];
      v = range > 0.0f ? (v - lo) / range : 0.0f;
    }
  }
}

AuxModal rgb_to_hsv(const ImageRGB& image) {
  AuxModal out{ModalityKind::Hsv, image.height, image.width, std::vector<float>(image.pixels.size())};
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    const float r = image.pixels[i * 3], g = image.pixels[i * 3 + 1], b = image.pixels[i * 3 + 2];
    const float mx = std::max({r, g, b});
    const float mn = std::min({r, g, b});
    const float delta = mx - mn;
    float h = 0.0f;
    if (delta > 0.0f) {
      if (mx == r) {
        h = (g - b) / delta;
        if (h < 0.0f) h += 6.0f;
      } else if (mx == g) {
        h = (b - r) / delta + 2.0f;
      } else {
        h = (r - g) / delta + 4.0f;
      }
      h /= 6.0f;
    }
    out.pixels[i * 3] = h;
    out.pixels[i * 3 + 1] = mx > 0.0f ? delta / mx : 0.0f;
    out.pixels[i * 3 + 2] = mx;
  }
  return out;
}

std::array<double, 3> srgb_to_lab(double r, double g, double b) {
  const double rl = srgb_to_linear(r), gl = srgb_to_linear(g), bl = srgb_to_linear(b);
  const double x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
  const double y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
  const double z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;
  const double fx = lab_f(x / 0.95047), fy = lab_f(y / 1.0), fz = lab_f(z / 1.08883);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

LabImage rgb_to_lab_raw(const ImageRGB& image) {
  LabImage out{image.height, image.width, std::vector<double>(image.pixels.size())};
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    const auto lab = srgb_to_lab(image.pixels[i * 3], image.pixels[i * 3 + 1], image.pixels[i * 3 + 2]);
    std::copy(lab.begin(), lab.end(), out.lab.begin() + static_cast<long>(i * 3));
  }
  return out;
}

AuxModal rgb_to_lab(const ImageRGB& image) {
  const LabImage raw = rgb_to_lab_raw(image);
  AuxModal out{ModalityKind::Lab, image.height, image.width, std::vector<float>(raw.lab.begin(), raw.lab.end())};
  minmax_normalize(out.pixels);
  return out;
}

std::vector<double> sobel_magnitude(const ImageRGB& image) {
  const int h = image.height, w = image.width;
  std::vector<int> q(image.pixels.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    q[i] = static_cast<int>(std::lround(std::clamp(image.pixels[i], 0.0f, 1.0f) * 255.0f));
  }
  auto at = [&](int y, int x, int c) {
    y = std::clamp(y, 0, h - 1);
    x = std::clamp(x, 0, w - 1);
    return q[(static_cast<std::size_t>(y) * w + x) * 3 + c];
  };
  constexpr double kLuma[3] = {0.299, 0.587, 0.114};
  std::vector<double> mag(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double gx = 0.0, gy = 0.0;
      for (int c = 0; c < 3; ++c) {
        const int sx = (at(y - 1, x + 1, c) + 2 * at(y, x + 1, c) + at(y + 1, x + 1, c)) -
                       (at(y - 1, x - 1, c) + 2 * at(y, x - 1, c) + at(y + 1, x - 1, c));
        const int sy = (at(y + 1, x - 1, c) + 2 * at(y + 1, x, c) + at(y + 1, x + 1, c)) -
                       (at(y - 1, x - 1, c) + 2 * at(y - 1, x, c) + at(y - 1, x + 1, c));
        gx += kLuma[c] * sx;
        gy += kLuma[c] * sy;
      }
      mag[static_cast<std::size_t>(y) * w + x] = std::sqrt(gx * gx + gy * gy) / 255.0;
    }
  }
  return mag;
}

AuxModal gradient_map(const ImageRGB& image) {
  const std::vector<double> mag = sobel_magnitude(image);
  double hi = 0.0, lo = INFINITY;
  for (double v : mag) {
    hi = std::max(hi, v);
    lo = std::min(lo, v);
  }
  AuxModal out{ModalityKind::Gradient, image.height, image.width, std::vector<float>(image.pixels.size())};
  const double range = hi - lo;
  for (std::size_t i = 0; i < mag.size(); ++i) {
    const float v = range > 0.0 ? static_cast<float>((mag[i] - lo) / range) : 0.0f;
    out.pixels[i * 3] = out.pixels[i * 3 + 1] = out.pixels[i * 3 + 2] = v;
  }
  return out;
}

AuxModal make_aux(const ImageRGB& image, ModalityKind kind) {
  g_aux_constructions.fetch_add(1, std::memory_order_relaxed);
  switch (kind) {
    case ModalityKind::Gradient:
      return gradient_map(image);
    case ModalityKind::Hsv:
      return rgb_to_hsv(image);
    case ModalityKind::Lab:
      return rgb_to_lab(image);
  }
  throw ConfigError("unknown modality kind");
}

std::uint64_t aux_construction_count() { return g_aux_constructions.load(std::memory_order_relaxed); }

ModalityKind parse_modality(std::string_view name) {
  if (name == "gradient" || name == "grad") return ModalityKind::Gradient;
  if (name == "hsv") return ModalityKind::Hsv;
  if (name == "lab") return ModalityKind::Lab;
  throw ConfigError("unknown modality '" + std::string(name) + "' (expected grad|hsv|lab)");
}

std::string_view modality_name(ModalityKind kind) {
  switch (kind) {
    case ModalityKind::Gradient:
      return "grad";
    case ModalityKind::Hsv:
      return "hsv";
    case ModalityKind::Lab:
      return "lab";
  }
  return "?";
}

ImageRGB aux_to_image(const AuxModal& aux) {
  ImageRGB img(aux.height, aux.width);
  img.pixels = aux.pixels;
  return img;
}

}  // namespace cds
