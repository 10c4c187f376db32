// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <fstream>

#include "cds/errors.hpp"
#include "cds/image.hpp"
#include "testkit/testkit.hpp"

using namespace cds;
using testkit::TempDir;

namespace {

void write_raw(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

ImageRGB random_image(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  ImageRGB img(h, w);
  for (float& v : img.pixels) v = static_cast<float>(rng.uniform_int(0, 255)) / 255.0f;
  return img;
}

ImageRGB gray(int h, int w, const std::function<double(int, int)>& f) {
  ImageRGB img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>(f(y, x));
  return img;
}

// Independent sRGB (D65) to CIELAB.
std::array<double, 3> reference_lab(double r, double g, double b) {
  auto lin = [](double c) { return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); };
  const double R = lin(r), G = lin(g), B = lin(b);
  const double X = (0.4124564 * R + 0.3575761 * G + 0.1804375 * B) / 0.95047;
  const double Y = 0.2126729 * R + 0.7151522 * G + 0.0721750 * B;
  const double Z = (0.0193339 * R + 0.1191920 * G + 0.9503041 * B) / 1.08883;
  auto f = [](double t) { return t > 216.0 / 24389.0 ? std::cbrt(t) : (24389.0 / 27.0 * t + 16.0) / 116.0; };
  return {116.0 * f(Y) - 16.0, 500.0 * (f(X) - f(Y)), 200.0 * (f(Y) - f(Z))};
}

}  // namespace

TEST_CASE("PPM reading and writing") {
  TempDir dir("ppm");
  SUBCASE("single red pixel") {
    write_raw(dir.path() / "red.ppm", std::string("P6\n1 1\n255\n") + '\xff' + '\0' + '\0');
    const ImageRGB img = load_image(dir.path() / "red.ppm");
    CHECK(img.height == 1);
    CHECK(img.width == 1);
    CHECK(img.pixels == std::vector<float>{1.0f, 0.0f, 0.0f});
  }
  SUBCASE("round trip is bit-exact for 8-bit data") {
    const ImageRGB img = random_image(7, 5, 1);
    save_image(dir.path() / "a.ppm", img);
    CHECK(load_image(dir.path() / "a.ppm").pixels == img.pixels);
  }
  SUBCASE("header comments are skipped") {
    write_raw(dir.path() / "c.ppm", std::string("P6 # comment\n1 # w\n1\n255\n") + '\x80' + '\x80' + '\x80');
    CHECK(load_image(dir.path() / "c.ppm").pixels[0] == doctest::Approx(128.0 / 255.0));
  }
  SUBCASE("truncated and malformed files are rejected") {
    write_raw(dir.path() / "t.ppm", std::string("P6\n2 2\n255\n") + "abc");
    CHECK_THROWS_AS(load_image(dir.path() / "t.ppm"), DataError);
    write_raw(dir.path() / "m.ppm", "P3\n1 1\n255\n0 0 0\n");
    CHECK_THROWS_AS(load_image(dir.path() / "m.ppm"), DataError);
    CHECK_THROWS_AS(load_image(dir.path() / "missing.ppm"), DataError);
  }
}

TEST_CASE("label maps") {
  TempDir dir("pgm");
  std::vector<std::int32_t> ids{7, 7, 300, 2, 300, 7};
  const LabelMap lm = make_label_map(2, 3, ids);
  CHECK(lm.n_regions == 3);
  CHECK(lm.labels == std::vector<std::int32_t>{1, 1, 2, 0, 2, 1});

  save_label_map(dir.path() / "l.pgm", lm);
  const LabelMap back = load_label_map(dir.path() / "l.pgm");
  CHECK(back.labels == lm.labels);

  write_pgm16(dir.path() / "big.pgm", 1, 2, std::vector<std::int32_t>{0, 1000});
  CHECK(read_pgm(dir.path() / "big.pgm").ids == std::vector<std::int32_t>{0, 1000});

  write_raw(dir.path() / "eight.pgm", std::string("P5\n2 1\n255\n") + '\x05' + '\x09');
  CHECK(read_pgm(dir.path() / "eight.pgm").ids == std::vector<std::int32_t>{5, 9});
}

TEST_CASE("manifest paths resolve against the manifest directory") {
  TempDir dir("manifest");
  std::filesystem::create_directories(dir.path() / "sub");
  write_raw(dir.path() / "sub" / "m.csv", "image,label\na.ppm,a.pgm\n");
  const auto entries = read_manifest(dir.path() / "sub" / "m.csv");
  REQUIRE(entries.size() == 1);
  CHECK(entries[0].image == dir.path() / "sub" / "a.ppm");
  write_raw(dir.path() / "bad.csv", "img,lbl\n");
  CHECK_THROWS_AS(read_manifest(dir.path() / "bad.csv"), DataError);
}

TEST_CASE("HSV") {
  ImageRGB img(1, 3);
  const float px[] = {1, 0, 0, 0.5f, 0.5f, 0.5f, 0, 1, 0};
  std::copy(std::begin(px), std::end(px), img.pixels.begin());
  const AuxModal hsv = rgb_to_hsv(img);
  CHECK(hsv.pixels[0] == doctest::Approx(0.0));
  CHECK(hsv.pixels[1] == doctest::Approx(1.0));
  CHECK(hsv.pixels[2] == doctest::Approx(1.0));
  CHECK(hsv.pixels[4] == doctest::Approx(0.0));
  CHECK(hsv.pixels[5] == doctest::Approx(0.5));
  CHECK(hsv.pixels[6] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("CIELAB") {
  const auto white = srgb_to_lab(1, 1, 1);
  CHECK(white[0] == doctest::Approx(100.0).epsilon(1e-6));
  CHECK(std::abs(white[1]) < 1e-3);
  CHECK(std::abs(white[2]) < 1e-3);
  const auto black = srgb_to_lab(0, 0, 0);
  for (double v : black) CHECK(std::abs(v) < 1e-9);
  for (auto rgb : {std::array{1.0, 0.0, 0.0}, std::array{0.2, 0.7, 0.4}, std::array{0.05, 0.01, 0.9}}) {
    const auto got = srgb_to_lab(rgb[0], rgb[1], rgb[2]);
    const auto ref = reference_lab(rgb[0], rgb[1], rgb[2]);
    for (int c = 0; c < 3; ++c) CHECK(std::abs(got[c] - ref[c]) < 0.1);
  }
  // Published value for sRGB red.
  const auto red = srgb_to_lab(1, 0, 0);
  CHECK(std::abs(red[0] - 53.24) < 0.1);
  CHECK(std::abs(red[1] - 80.09) < 0.1);
  CHECK(std::abs(red[2] - 67.20) < 0.1);

  const AuxModal lab = rgb_to_lab(random_image(6, 6, 2));
  for (float v : lab.pixels) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("gradient map") {
  SUBCASE("constant image has no gradient") {
    const AuxModal g = gradient_map(gray(5, 6, [](int, int) { return 0.4; }));
    for (float v : g.pixels) CHECK(v == 0.0f);
  }
  SUBCASE("ramp interior Sobel response") {
    const ImageRGB ramp = gray(6, 16, [](int, int x) { return x / 255.0; });
    const auto mag = sobel_magnitude(ramp);
    for (int y = 1; y < 5; ++y)
      for (int x = 1; x < 15; ++x) CHECK(mag[static_cast<std::size_t>(y) * 16 + x] == doctest::Approx(8.0 / 255.0));
  }
  SUBCASE("step edge maxima sit on the two adjacent columns") {
    const ImageRGB step = gray(6, 8, [](int, int x) { return x < 4 ? 0.0 : 1.0; });
    const AuxModal g = gradient_map(step);
    for (int y = 0; y < 6; ++y) {
      for (int x = 0; x < 8; ++x) {
        const float v = g.pixels[(static_cast<std::size_t>(y) * 8 + x) * 3];
        if (x == 3 || x == 4)
          CHECK(v == 1.0f);
        else
          CHECK(v == 0.0f);
      }
    }
  }
  SUBCASE("invariant under colour inversion") {
    const ImageRGB img = random_image(9, 11, 3);
    ImageRGB inv = img;
    for (float& v : inv.pixels) v = 1.0f - v;
    CHECK(gradient_map(img).pixels == gradient_map(inv).pixels);
  }
  SUBCASE("three identical channels") {
    const AuxModal g = gradient_map(random_image(4, 4, 4));
    for (std::size_t p = 0; p < 16; ++p) {
      CHECK(g.pixels[p * 3] == g.pixels[p * 3 + 1]);
      CHECK(g.pixels[p * 3] == g.pixels[p * 3 + 2]);
    }
  }
}

TEST_CASE("make_aux dispatch") {
  const ImageRGB img = random_image(5, 7, 5);
  const std::uint64_t before = aux_construction_count();
  CHECK(make_aux(img, ModalityKind::Hsv).pixels == rgb_to_hsv(img).pixels);
  CHECK(make_aux(img, ModalityKind::Lab).pixels == rgb_to_lab(img).pixels);
  CHECK(make_aux(img, ModalityKind::Gradient).pixels == gradient_map(img).pixels);
  CHECK(aux_construction_count() == before + 3);
  for (auto kind : {ModalityKind::Hsv, ModalityKind::Lab, ModalityKind::Gradient}) {
    const AuxModal a = make_aux(img, kind);
    CHECK(a.height == img.height);
    CHECK(a.width == img.width);
    CHECK(a.pixels == make_aux(img, kind).pixels);
    for (float v : a.pixels) CHECK(std::isfinite(v));
  }
  CHECK(parse_modality("gradient") == ModalityKind::Gradient);
  CHECK(parse_modality("grad") == ModalityKind::Gradient);
  CHECK(parse_modality("lab") == ModalityKind::Lab);
  CHECK_THROWS_AS(parse_modality("rgb"), ConfigError);
}

TEST_CASE("resampling and flips") {
  const ImageRGB img = random_image(5, 6, 6);
  CHECK(resize_bilinear(img, 5, 6).pixels == img.pixels);
  CHECK(flip_horizontal(flip_horizontal(img)).pixels == img.pixels);
  CHECK(flip_vertical(flip_vertical(img)).pixels == img.pixels);
  const ImageRGB fh = flip_horizontal(img);
  for (int y = 0; y < 5; ++y)
    for (int c = 0; c < 3; ++c) CHECK(fh.at(y, 5, c) == img.at(y, 0, c));

  const std::vector<std::int32_t> ids{0, 1, 2, 3};
  CHECK(resize_nearest(ids, 2, 2, 4, 4) ==
        std::vector<std::int32_t>{0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 3, 3, 2, 2, 3, 3});
}

TEST_CASE("augmentation") {
  // Channel 0 encodes the row, channel 1 the column, labels the raster index.
  const int h = 20, w = 24;
  ImageRGB probe(h, w);
  std::vector<std::int32_t> ids;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      probe.at(y, x, 0) = static_cast<float>(y) / 255.0f;
      probe.at(y, x, 1) = static_cast<float>(x) / 255.0f;
      ids.push_back(y * w + x);
    }
  const LabelMap labels = make_label_map(h, w, ids);

  SUBCASE("unit scale centred crop without flips is a sub-window") {
    AugmentPlan plan{h, w, 4, 6, 12, false, false};
    auto [im, lm] = apply_augment(probe, labels, plan);
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 12; ++x)
        for (int c = 0; c < 3; ++c) CHECK(im.at(y, x, c) == probe.at(y + 4, x + 6, c));
    CHECK(lm.n_regions == 144);
  }
  SUBCASE("flips move image and labels together") {
    for (int f = 0; f < 4; ++f) {
      AugmentPlan plan{h, w, 2, 3, 16, (f & 1) != 0, (f & 2) != 0};
      auto [im, lm] = apply_augment(probe, labels, plan);
      // Labels were compacted in raster order of the source, so ordering of
      // label ids must agree with the source raster index read from the image.
      for (int p = 0; p + 1 < 16 * 16; ++p) {
        const int y0 = p / 16, x0 = p % 16, y1 = (p + 1) / 16, x1 = (p + 1) % 16;
        const long s0 = std::lround(im.at(y0, x0, 0) * 255) * w + std::lround(im.at(y0, x0, 1) * 255);
        const long s1 = std::lround(im.at(y1, x1, 0) * 255) * w + std::lround(im.at(y1, x1, 1) * 255);
        CHECK((s0 < s1) == (lm.at(y0, x0) < lm.at(y1, x1)));
      }
      if (plan.flip_h) CHECK(std::lround(im.at(0, 0, 1) * 255) == 3 + 15);
    }
  }
  SUBCASE("sampled plans always fit the crop") {
    AugmentConfig cfg;
    cfg.crop = 16;
    for (std::uint64_t s = 0; s < 200; ++s) {
      Rng rng(s);
      const AugmentPlan plan = sample_augment(h, w, cfg, rng);
      CHECK(plan.resized_h >= 16);
      CHECK(plan.resized_w >= 16);
      CHECK(plan.top + 16 <= plan.resized_h);
      CHECK(plan.left + 16 <= plan.resized_w);
      auto [im, lm] = augment(probe, labels, cfg, rng);
      CHECK(im.height == 16);
      CHECK(lm.width == 16);
    }
  }
  SUBCASE("same rng seed gives the same sample") {
    AugmentConfig cfg;
    cfg.crop = 16;
    Rng a(9), b(9);
    CHECK(augment(probe, labels, cfg, a).first.pixels == augment(probe, labels, cfg, b).first.pixels);
  }
  SUBCASE("image smaller than the crop") {
    AugmentConfig cfg;
    cfg.crop = 64;
    Rng rng(1);
    CHECK_THROWS_AS(augment(probe, labels, cfg, rng), DataError);
  }
}
