// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0
//
// RGB rasters, label rasters, netpbm IO, auxiliary modalities and training
// augmentation.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cds/rng.hpp"

namespace cds {

// H x W x 3 interleaved, values in [0,1].
struct ImageRGB {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  ImageRGB() = default;
  ImageRGB(int h, int w, float fill = 0.0f)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, fill) {}

  float& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  float at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
};

// Ground-truth partition with ids contiguous in [0, n_regions).
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<std::int32_t> labels;
  int n_regions = 0;

  std::int32_t at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

enum class ModalityKind { Gradient, Hsv, Lab };

struct AuxModal {
  ModalityKind kind = ModalityKind::Gradient;
  int height = 0;
  int width = 0;
  std::vector<float> pixels;  // H x W x 3
};

// ---------------------------------------------------------------------------
// IO

// Binary PPM (P6, maxval <= 255).
ImageRGB load_image(const std::filesystem::path& path);
void save_image(const std::filesystem::path& path, const ImageRGB& image);

struct RawLabels {
  int height = 0;
  int width = 0;
  std::vector<std::int32_t> ids;
};

// Binary PGM (P5), 8- or 16-bit.
RawLabels read_pgm(const std::filesystem::path& path);
// 16-bit big-endian P5; ids must lie in [0, 65535].
void write_pgm16(const std::filesystem::path& path, int height, int width, std::span<const std::int32_t> ids);

// Renumbers ids to 0..n-1 preserving their relative order; returns n.
int compact_labels(std::vector<std::int32_t>& ids);
LabelMap make_label_map(int height, int width, std::vector<std::int32_t> ids);
LabelMap load_label_map(const std::filesystem::path& path);
void save_label_map(const std::filesystem::path& path, const LabelMap& labels);

struct ManifestEntry {
  std::filesystem::path image;
  std::filesystem::path label;
};

// UTF-8 CSV with header `image,label`; relative paths resolve against the
// manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

// ---------------------------------------------------------------------------
// Auxiliary modalities

// Hexcone HSV with H scaled to [0,1].
AuxModal rgb_to_hsv(const ImageRGB& image);

// sRGB -> linear -> XYZ (D65) -> CIELAB, unnormalized.
std::array<double, 3> srgb_to_lab(double r, double g, double b);
struct LabImage {
  int height = 0;
  int width = 0;
  std::vector<double> lab;  // H x W x 3 raw L,a,b
};
LabImage rgb_to_lab_raw(const ImageRGB& image);
// Raw CIELAB min-max normalized per channel to [0,1].
AuxModal rgb_to_lab(const ImageRGB& image);

// Sobel magnitude of the luminance, in intensity units (before normalization).
// Channels are quantized to 8 bits first, which makes the map exactly
// invariant under color inversion.
std::vector<double> sobel_magnitude(const ImageRGB& image);
AuxModal gradient_map(const ImageRGB& image);

AuxModal make_aux(const ImageRGB& image, ModalityKind kind);
// Number of make_aux() calls made by this process.
std::uint64_t aux_construction_count();

ModalityKind parse_modality(std::string_view name);
std::string_view modality_name(ModalityKind kind);
ImageRGB aux_to_image(const AuxModal& aux);

// Per-channel min-max normalization of an interleaved 3-channel buffer;
// constant channels map to 0.
void minmax_normalize(std::vector<float>& pixels);

// ---------------------------------------------------------------------------
// Resampling and augmentation

// Corner-aligned bilinear resize.
ImageRGB resize_bilinear(const ImageRGB& image, int out_h, int out_w);
// Nearest-neighbour resize: source index floor(dst * in / out).
std::vector<std::int32_t> resize_nearest(std::span<const std::int32_t> ids, int height, int width, int out_h,
                                         int out_w);
ImageRGB flip_horizontal(const ImageRGB& image);
ImageRGB flip_vertical(const ImageRGB& image);

struct AugmentConfig {
  int crop = 208;
  double scale_min = 0.8;
  double scale_max = 1.2;
  double flip_prob = 0.5;
};

struct AugmentPlan {
  int resized_h = 0;
  int resized_w = 0;
  int top = 0;
  int left = 0;
  int crop = 0;
  bool flip_h = false;
  bool flip_v = false;
};

// Draws a resize scale (clamped from below so the crop always fits), a crop
// offset and the two flips.
AugmentPlan sample_augment(int height, int width, const AugmentConfig& cfg, Rng& rng);
// Same geometry for both: bilinear for the image, nearest for the labels.
std::pair<ImageRGB, LabelMap> apply_augment(const ImageRGB& image, const LabelMap& labels, const AugmentPlan& plan);
std::pair<ImageRGB, LabelMap> augment(const ImageRGB& image, const LabelMap& labels, const AugmentConfig& cfg,
                                      Rng& rng);

}  // namespace cds
