// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "cds/checkpoint.hpp"
#include "cds/errors.hpp"
#include "cds/optim.hpp"
#include "cds/synthetic.hpp"
#include "cds/training.hpp"
#include "testkit/testkit.hpp"

using namespace cds;

namespace {

std::vector<std::vector<float>> snapshot(const std::vector<Tensor<float>*>& ts) {
  std::vector<std::vector<float>> out;
  for (const Tensor<float>* t : ts) out.push_back(t->data);
  return out;
}

TrainConfig tiny_config(const std::filesystem::path& dir) {
  TrainConfig cfg = preset_config("desk");
  cfg.crop = 32;
  cfg.batch = 2;
  cfg.channels = 8;
  cfg.iters = 2;
  cfg.log_every = 1;
  cfg.manifest = make_synthetic_dataset(dir / "data", 4, 40, 3);
  cfg.out_dir = dir / "run";
  return cfg;
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

}  // namespace

TEST_CASE("Adam") {
  SUBCASE("first step moves by the learning rate") {
    Tensor<float> w({2}, {1.0f, -3.0f});
    w.grad = {2.0f, -0.5f};
    Adam<float> opt({&w});
    opt.step(0.1);
    CHECK(w.data[0] == doctest::Approx(0.9f).epsilon(1e-5));
    CHECK(w.data[1] == doctest::Approx(-2.9f).epsilon(1e-5));
    CHECK(opt.steps() == 1);
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    Tensor<float> w({3}, {0.5f, 0.25f, -1.0f});
    Adam<float> opt({&w});
    for (int i = 0; i < 5; ++i) opt.step(0.01);
    CHECK(w.data == std::vector<float>{0.5f, 0.25f, -1.0f});
  }
  SUBCASE("groups are independent") {
    Tensor<float> a({1}, 1.0f), b({1}, 1.0f);
    a.grad = {1.0f};
    b.grad = {1.0f};
    Adam<float> oa({&a});
    Adam<float> ob({&b});
    oa.step(0.1);
    CHECK(b.data[0] == 1.0f);
    oa.zero_grad();
    CHECK(a.grad.empty());
    CHECK(b.grad[0] == 1.0f);
    CHECK(ob.steps() == 0);
  }
  SUBCASE("converges on a quadratic") {
    Tensor<double> w({1}, 4.0);
    Adam<double> opt({&w});
    for (int i = 0; i < 2000; ++i) {
      w.grad = {2.0 * (w.data[0] - 1.5)};
      opt.step(0.01);
    }
    CHECK(w.data[0] == doctest::Approx(1.5).epsilon(1e-3));
  }
}

TEST_CASE("poly learning rate") {
  CHECK(poly_lr(5e-4, 0, 2000, 0.9) == 5e-4);
  CHECK(poly_lr(5e-4, 2000, 2000, 0.9) == 0.0);
  CHECK(poly_lr(5e-4, 1000, 2000, 0.9) == doctest::Approx(2.679e-4).epsilon(1e-3));
  CHECK(poly_lr(5e-4, 5000, 2000, 0.9) == 0.0);
  double prev = INFINITY;
  for (long i = 0; i <= 100; ++i) {
    const double lr = poly_lr(1.0, i, 100, 0.9);
    CHECK(lr <= prev);
    prev = lr;
  }
}

TEST_CASE("configuration") {
  const TrainConfig desk = preset_config("desk");
  CHECK(desk.crop == 64);
  CHECK(desk.d == 8);
  CHECK(desk.iters == 2000);
  CHECK(preset_config("paper").d == 16);
  CHECK_THROWS_AS(preset_config("huge"), ConfigError);

  TrainConfig cfg = desk;
  apply_config_text(cfg, "# comment\n  iters = 10  # trailing\n\nw_align = 0\nmanifest = data/m.csv\nmodality = lab\n",
                    "/base");
  CHECK(cfg.iters == 10);
  CHECK(cfg.weights.align == 0.0);
  CHECK(cfg.manifest == std::filesystem::path("/base/data/m.csv"));
  CHECK(cfg.modality == ModalityKind::Lab);

  CHECK_THROWS_WITH_AS(apply_config_text(cfg, "itres = 3"), doctest::Contains("unknown key 'itres'"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(cfg, "batch = two"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(cfg, "batch"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(cfg, "batch = "), ConfigError);

  TrainConfig bad = desk;
  bad.crop = 60;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = desk;
  bad.d = 6;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  // Serialized text parses back to the same configuration.
  TrainConfig round = preset_config("paper");
  apply_config_text(round, config_to_text(cfg));
  CHECK(config_to_text(round) == config_to_text(cfg));
}

TEST_CASE("checkpoint") {
  testkit::TempDir dir("ckpt");
  ModelParams<float> p = init_params<float>(21, ModelConfig{8, 4, 4});
  const auto file = dir.path() / "m.cdsp";
  save_checkpoint(file, p);
  const std::string bytes = testkit::read_bytes(file);
  CHECK(bytes.rfind("CDSP1", 0) == 0);

  ModelParams<float> q = load_checkpoint(file);
  const auto a = named_tensors(p), b = named_tensors(q);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(a[i].tensor->shape == b[i].tensor->shape);
    CHECK(a[i].tensor->data == b[i].tensor->data);
  }
  CHECK(q.config.d == 4);

  save_checkpoint(dir.path() / "again.cdsp", q);
  CHECK(testkit::read_bytes(dir.path() / "again.cdsp") == bytes);

  std::string corrupt = bytes;
  corrupt[0] = 'X';
  write_bytes(dir.path() / "magic.cdsp", corrupt);
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "magic.cdsp"), DataError);

  write_bytes(dir.path() / "short.cdsp", bytes.substr(0, bytes.size() - 7));
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "short.cdsp"), DataError);

  // Header claims d = 8: the decoder record list no longer matches.
  std::string other_d = bytes;
  other_d[5 + 8] = 8;
  write_bytes(dir.path() / "d.cdsp", other_d);
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "d.cdsp"), DataError);

  // Header claims 16 channels: record shapes no longer match.
  std::string other_c = bytes;
  other_c[5] = 16;
  write_bytes(dir.path() / "c.cdsp", other_c);
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "c.cdsp"), DataError);

  CHECK_THROWS_AS(load_checkpoint(dir.path() / "absent.cdsp"), DataError);
}

TEST_CASE("synthetic corpus") {
  const auto [img, lbl] = make_synthetic_sample(48, 5);
  const auto [img2, lbl2] = make_synthetic_sample(48, 5);
  CHECK(img.pixels == img2.pixels);
  CHECK(lbl.labels == lbl2.labels);
  CHECK(make_synthetic_sample(48, 6).first.pixels != img.pixels);
  CHECK(lbl.n_regions >= 3);
  CHECK(lbl.n_regions <= 6);
  CHECK(count_distinct(lbl.labels) == lbl.n_regions);
  CHECK(*std::max_element(lbl.labels.begin(), lbl.labels.end()) == lbl.n_regions - 1);
  for (float v : img.pixels) CHECK(std::abs(v * 255.0f - std::round(v * 255.0f)) < 1e-3f);

  testkit::TempDir dir("synth");
  const auto m = make_synthetic_dataset(dir.path(), 3, 32, 9);
  const auto entries = read_manifest(m);
  REQUIRE(entries.size() == 3);
  const auto [i0, l0] = make_synthetic_sample(32, 9);
  (void)i0;
  CHECK(load_label_map(entries[0].label).labels.size() == l0.labels.size());
}

TEST_CASE("two-step training") {
  testkit::TempDir dir("train");
  const TrainConfig cfg = tiny_config(dir.path());
  const std::vector<Sample> data = load_dataset(cfg.manifest);

  SUBCASE("each step only touches its own group") {
    TrainConfig longer = cfg;
    longer.iters = 100;
    Trainer tr(longer);
    for (long it = 0; it < 3; ++it) {
      const auto batch = tr.make_batch(data, it);
      const auto h0 = snapshot(tr.variational_parameters());
      const auto m0 = snapshot(tr.main_parameters());
      const MainStepResult r = tr.main_step(batch, it);
      CHECK(snapshot(tr.variational_parameters()) == h0);
      CHECK(snapshot(tr.main_parameters()) != m0);

      const auto m1 = snapshot(tr.main_parameters());
      tr.variational_step(r.style_i, r.style_a);
      CHECK(snapshot(tr.main_parameters()) == m1);
      CHECK(snapshot(tr.variational_parameters()) != h0);
      CHECK(std::isfinite(r.record.l_sp_i));
      CHECK(std::isfinite(r.record.l_mi));
    }
  }
  SUBCASE("batches depend only on seed and iteration") {
    Trainer a(cfg), b(cfg);
    const auto x = a.make_batch(data, 5), y = b.make_batch(data, 5);
    REQUIRE(x.size() == 2);
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(x[i].image.pixels == y[i].image.pixels);
      CHECK(x[i].image.height == 32);
    }
    CHECK(a.make_batch(data, 6)[0].image.pixels != x[0].image.pixels);
  }
  SUBCASE("train loop writes a loadable checkpoint and a reproducible log") {
    std::ostringstream log;
    const TrainResult r = train_loop(cfg, &log);
    CHECK(r.records.size() == 2);
    const ModelParams<float> m = load_checkpoint(r.checkpoint);
    CHECK(m.config.d == cfg.d);
    const std::string csv = testkit::read_bytes(r.loss_csv);
    CHECK(csv.rfind(std::string(kLossCsvHeader) + "\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

    TrainConfig again = cfg;
    again.out_dir = dir.path() / "run2";
    const TrainResult r2 = train_loop(again);
    CHECK(testkit::read_bytes(r2.loss_csv) == csv);
    CHECK(testkit::read_bytes(r2.checkpoint) == testkit::read_bytes(r.checkpoint));
  }
}
