// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

#include "cds/checkpoint.hpp"
#include "cds/image.hpp"
#include "cds/superpixel.hpp"
#include "cds/synthetic.hpp"
#include "testkit/testkit.hpp"

using namespace cds;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run cds_run(const fs::path& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string(CDS_BINARY) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = testkit::read_bytes(out);
  r.err = testkit::read_bytes(err);
  return r;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("train") {
  testkit::TempDir dir("cli_train");
  const Run none = cds_run(dir.path(), "train");
  CHECK(none.code == 1);
  CHECK(none.err.find("--config") != std::string::npos);
  CHECK(cds_run(dir.path(), "train --config " + (dir.path() / "absent.cfg").string()).code == 1);
  CHECK(cds_run(dir.path(), "train --preset huge --manifest x.csv").code == 1);
  CHECK(cds_run(dir.path(), "train --preset desk --manifest " + (dir.path() / "absent.csv").string() +
                                " --out " + (dir.path() / "run").string())
            .code == 2);
}

TEST_CASE("infer") {
  testkit::TempDir dir("cli_infer");
  const auto [img, gt] = make_synthetic_sample(48, 2);
  save_image(dir.path() / "img.ppm", img);
  ModelParams<float> p = init_params<float>(1, ModelConfig{8, 4, 8});
  save_checkpoint(dir.path() / "m.cdsp", p);
  const std::string base = "infer --model " + (dir.path() / "m.cdsp").string() + " --image " +
                           (dir.path() / "img.ppm").string() + " --out " + (dir.path() / "sp.pgm").string();

  REQUIRE(cds_run(dir.path(), base + " --sp 4,4").code == 0);
  const LabelMap sp = load_label_map(dir.path() / "sp.pgm");
  CHECK(sp.height == 48);
  CHECK(sp.width == 48);
  CHECK(sp.n_regions <= 16);
  CHECK(testkit::all_regions_connected(sp.labels, 48, 48));

  CHECK(cds_run(dir.path(), base + " --k 16").code == 0);
  CHECK(cds_run(dir.path(), base).code == 1);
  CHECK(cds_run(dir.path(), base + " --sp 4,4 --d 16").code == 2);
  CHECK(cds_run(dir.path(), "infer --model " + (dir.path() / "none.cdsp").string() + " --image " +
                                (dir.path() / "img.ppm").string() + " --sp 4,4 --out " +
                                (dir.path() / "x.pgm").string())
            .code == 2);
}

TEST_CASE("eval") {
  testkit::TempDir dir("cli_eval");
  const auto [img, gt] = make_synthetic_sample(32, 4);
  save_label_map(dir.path() / "gt.pgm", gt);
  save_label_map(dir.path() / "small.pgm", make_label_map(16, 16, std::vector<std::int32_t>(256, 0)));
  const Run same = cds_run(dir.path(), "eval --header --pred " + (dir.path() / "gt.pgm").string() + " --gt " +
                                           (dir.path() / "gt.pgm").string());
  REQUIRE(same.code == 0);
  const auto out = lines(same.out);
  REQUIRE(out.size() == 2);
  CHECK(out[0] == "count,asa,br,bp,ue,co");
  CHECK(out[1].find(",1.000000,1.000000,1.000000,0.000000,") != std::string::npos);
  CHECK(cds_run(dir.path(), "eval --pred " + (dir.path() / "small.pgm").string() + " --gt " +
                                (dir.path() / "gt.pgm").string())
            .code == 2);
}

TEST_CASE("bench") {
  testkit::TempDir dir("cli_bench");
  const fs::path manifest = make_synthetic_dataset(dir.path() / "data", 2, 32, 5);
  const Run grid = cds_run(dir.path(), "bench --manifest " + manifest.string() + " --method grid --counts 16,64");
  REQUIRE(grid.code == 0);
  CHECK(lines(grid.out).size() == 3);
  CHECK(cds_run(dir.path(), "bench --manifest " + manifest.string() + " --method cds --counts 16").code == 1);
  CHECK(cds_run(dir.path(), "bench --manifest " + manifest.string() + " --method grid --counts 64,16").code == 1);
  CHECK(cds_run(dir.path(), "bench --manifest " + manifest.string() + " --method kmeans --counts 16").code == 1);
}

TEST_CASE("render, modality, slic and synth") {
  testkit::TempDir dir("cli_misc");
  const auto [img, gt] = make_synthetic_sample(24, 6);
  const fs::path ip = dir.path() / "img.ppm";
  save_image(ip, img);
  std::vector<std::int32_t> own(24 * 24);
  for (std::size_t i = 0; i < own.size(); ++i) own[i] = static_cast<std::int32_t>(i);
  save_label_map(dir.path() / "own.pgm", make_label_map(24, 24, own));

  REQUIRE(cds_run(dir.path(), "render --image " + ip.string() + " --labels " + (dir.path() / "own.pgm").string() +
                                  " --mode mean --out " + (dir.path() / "mean.ppm").string())
              .code == 0);
  CHECK(load_image(dir.path() / "mean.ppm").pixels == img.pixels);
  CHECK(cds_run(dir.path(), "render --image " + ip.string() + " --labels " + (dir.path() / "own.pgm").string() +
                                " --mode sketch --out " + (dir.path() / "bad.ppm").string())
            .code == 1);

  save_image(dir.path() / "flat.ppm", ImageRGB(16, 16, 0.6f));
  REQUIRE(cds_run(dir.path(), "modality --kind grad --image " + (dir.path() / "flat.ppm").string() + " --out " +
                                  (dir.path() / "g.ppm").string())
              .code == 0);
  for (float v : load_image(dir.path() / "g.ppm").pixels) CHECK(v == 0.0f);

  REQUIRE(cds_run(dir.path(), "slic --k 4 --image " + (dir.path() / "flat.ppm").string() + " --out " +
                                  (dir.path() / "s.pgm").string())
              .code == 0);
  CHECK(load_label_map(dir.path() / "s.pgm").labels == grid_tiling(16, 16, 2, 2).labels);

  for (const char* sub : {"a", "b"}) {
    REQUIRE(cds_run(dir.path(), "synth --n 2 --size 16 --seed 3 --out " + (dir.path() / sub).string()).code == 0);
  }
  CHECK(testkit::read_bytes(dir.path() / "a" / "img_0001.ppm") == testkit::read_bytes(dir.path() / "b" / "img_0001.ppm"));
  CHECK(testkit::read_bytes(dir.path() / "a" / "lbl_0001.pgm") == testkit::read_bytes(dir.path() / "b" / "lbl_0001.pgm"));
}

TEST_CASE("help lists flags with defaults") {
  testkit::TempDir dir("cli_help");
  const Run top = cds_run(dir.path(), "--help");
  CHECK(top.code == 0);
  for (const char* sub : {"train", "infer", "eval", "bench", "render", "modality", "slic", "synth"})
    CHECK(top.out.find(sub) != std::string::npos);
  const Run slic = cds_run(dir.path(), "slic --help");
  CHECK(slic.code == 0);
  CHECK(slic.out.find("--k INT [100]") != std::string::npos);
  CHECK(slic.out.find("--no-connectivity") != std::string::npos);
  CHECK(cds_run(dir.path(), "frobnicate").code == 1);
}
