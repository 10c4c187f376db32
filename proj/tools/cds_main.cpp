// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0
//
// cds: train, infer, eval, bench, render, modality, slic, synth.
// Exit codes: 0 success, 1 usage/config, 2 data, 3 numeric failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <tuple>

#include "cds/checkpoint.hpp"
#include "cds/errors.hpp"
#include "cds/image.hpp"
#include "cds/inference.hpp"
#include "cds/metrics.hpp"
#include "cds/slic.hpp"
#include "cds/superpixel.hpp"
#include "cds/sweep.hpp"
#include "cds/synthetic.hpp"
#include "cds/training.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::pair<int, int> parse_pair(const std::string& s, const char* flag) {
  const auto comma = s.find(',');
  try {
    if (comma == std::string::npos) throw std::invalid_argument("missing comma");
    std::size_t a = 0, b = 0;
    const int h = std::stoi(s.substr(0, comma), &a);
    const int w = std::stoi(s.substr(comma + 1), &b);
    if (a != comma || b != s.size() - comma - 1) throw std::invalid_argument("trailing characters");
    return {h, w};
  } catch (const std::exception&) {
    throw UsageError(std::string(flag) + " expects H,W, got '" + s + "'");
  }
}

std::vector<int> parse_list(const std::string& s, const char* flag) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw UsageError(std::string(flag) + " expects a comma-separated integer list, got '" + s + "'");
    }
  }
  if (out.empty()) throw UsageError(std::string(flag) + " is empty");
  return out;
}

cds::SuperpixelLabeling read_labels(const fs::path& path) {
  const cds::RawLabels raw = cds::read_pgm(path);
  return cds::make_labeling(raw.height, raw.width, raw.ids);
}

void write_labels(const fs::path& path, const cds::SuperpixelLabeling& labels) {
  cds::write_pgm16(path, labels.height, labels.width, labels.labels);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Content-disentangled superpixels: training, inference and evaluation", "cds"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Two-step alternating training");
  std::string train_config, train_preset, train_manifest, train_out;
  std::uint64_t train_seed = 0;
  long train_iters = 0;
  bool train_quiet = false;
  train->add_option("--config", train_config, "key = value config file (required unless --preset is given)");
  train->add_option("--preset", train_preset, "Base configuration: desk|paper");
  train->add_option("--seed", train_seed, "Random seed (overrides the config)");
  train->add_option("--manifest", train_manifest, "Training manifest CSV (overrides the config)");
  train->add_option("--out", train_out, "Output directory for model.cdsp and losses.csv");
  train->add_option("--iters", train_iters, "Iteration count override (0 keeps the config value)");
  train->add_flag("--quiet", train_quiet, "Suppress progress lines");

  // infer
  auto* infer = app.add_subcommand("infer", "Superpixels for one image (RGB branch only)");
  std::string infer_model, infer_image, infer_sp, infer_out;
  int infer_k = 0, infer_d = 0, infer_min_size = 0;
  bool infer_no_conn = false;
  infer->add_option("--model", infer_model, "Checkpoint file")->required();
  infer->add_option("--image", infer_image, "Input PPM")->required();
  infer->add_option("--sp", infer_sp, "Superpixel grid as H,W cells");
  infer->add_option("--k", infer_k, "Approximate superpixel count, mapped to an aspect-preserving grid");
  infer->add_option("--d", infer_d, "Expected grid size of the checkpoint (0 = take it from the checkpoint)");
  infer->add_option("--min-size", infer_min_size, "Connectivity minimum fragment size (0 = d*d/16)");
  infer->add_flag("--no-connectivity", infer_no_conn, "Skip connectivity enforcement");
  infer->add_option("--out", infer_out, "Output 16-bit PGM label map")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Metrics of a label map against ground truth");
  std::string eval_pred, eval_gt;
  int eval_tol = -1;
  bool eval_header = false;
  eval->add_option("--pred", eval_pred, "Predicted label PGM")->required();
  eval->add_option("--gt", eval_gt, "Ground-truth label PGM")->required();
  eval->add_option("--tol", eval_tol, "Boundary tolerance in pixels (-1 = round(0.0025 * diagonal))");
  eval->add_flag("--header", eval_header, "Print the CSV header first");

  // bench
  auto* bench = app.add_subcommand("bench", "Metric curves over superpixel counts");
  std::string bench_manifest, bench_method = "grid", bench_counts, bench_model, bench_out;
  int bench_jobs = 1, bench_tol = -1;
  bool bench_no_conn = false;
  bench->add_option("--manifest", bench_manifest, "Evaluation manifest CSV")->required();
  bench->add_option("--method", bench_method, "cds|slic|grid");
  bench->add_option("--counts", bench_counts, "Ascending comma-separated superpixel counts")->required();
  bench->add_option("--model", bench_model, "Checkpoint (required for cds)");
  bench->add_option("--jobs", bench_jobs, "Worker threads (capped by CDS_THREADS)");
  bench->add_option("--tol", bench_tol, "Boundary tolerance (-1 = per-image default)");
  bench->add_flag("--no-connectivity", bench_no_conn, "Skip connectivity enforcement");
  bench->add_option("--out", bench_out, "Output CSV (default: standard output)");

  // render
  auto* render = app.add_subcommand("render", "Mean-fill or boundary rendering of a labeling");
  std::string render_image, render_labels, render_mode = "mean", render_out;
  render->add_option("--image", render_image, "Input PPM")->required();
  render->add_option("--labels", render_labels, "Label PGM")->required();
  render->add_option("--mode", render_mode, "mean|boundary");
  render->add_option("--out", render_out, "Output PPM")->required();

  // modality
  auto* modality = app.add_subcommand("modality", "Auxiliary modality of an image");
  std::string mod_image, mod_kind = "grad", mod_out;
  modality->add_option("--image", mod_image, "Input PPM")->required();
  modality->add_option("--kind", mod_kind, "grad|hsv|lab");
  modality->add_option("--out", mod_out, "Output PPM")->required();

  // slic
  auto* slic_cmd = app.add_subcommand("slic", "SLIC superpixels");
  std::string slic_image, slic_out;
  cds::SlicConfig slic_cfg;
  bool slic_no_conn = false;
  slic_cmd->add_option("--image", slic_image, "Input PPM")->required();
  slic_cmd->add_option("--k", slic_cfg.k, "Target superpixel count");
  slic_cmd->add_option("--m", slic_cfg.m, "Compactness weight");
  slic_cmd->add_option("--iters", slic_cfg.iters, "Iterations");
  slic_cmd->add_flag("--no-connectivity", slic_no_conn, "Skip connectivity enforcement");
  slic_cmd->add_option("--out", slic_out, "Output 16-bit PGM label map")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "Synthetic segmentation corpus");
  std::string synth_out;
  int synth_n = 64, synth_size = 64;
  std::uint64_t synth_seed = 7;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--n", synth_n, "Number of images");
  synth->add_option("--size", synth_size, "Image side in pixels");
  synth->add_option("--seed", synth_seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (train->parsed()) {
      if (train_config.empty() && train_preset.empty()) {
        throw UsageError("train needs --config or --preset\n" + train->help());
      }
      if (!train_config.empty() && !fs::exists(train_config)) {
        throw UsageError("config file not found: " + train_config + "\n" + train->help());
      }
      cds::TrainConfig cfg = cds::preset_config(train_preset.empty() ? "paper" : train_preset);
      if (!train_config.empty()) cds::apply_config_file(cfg, train_config);
      if (train->count("--seed")) cfg.seed = train_seed;
      if (!train_manifest.empty()) cfg.manifest = train_manifest;
      if (!train_out.empty()) cfg.out_dir = train_out;
      if (train_iters > 0) cfg.iters = train_iters;
      const cds::TrainResult r = cds::train_loop(cfg, train_quiet ? nullptr : &std::cout);
      std::cout << "checkpoint " << r.checkpoint.string() << "\nlosses " << r.loss_csv.string() << '\n';
    } else if (infer->parsed()) {
      if (infer_sp.empty() == (infer_k == 0)) throw UsageError("infer needs exactly one of --sp or --k");
      cds::ModelParams<float> params = cds::load_checkpoint(infer_model);
      if (infer_d != 0 && infer_d != params.config.d) {
        throw cds::DataError("checkpoint was trained with d=" + std::to_string(params.config.d) + " but --d " +
                             std::to_string(infer_d) + " was requested");
      }
      const cds::ImageRGB image = cds::load_image(infer_image);
      cds::InferenceOptions opts;
      if (!infer_sp.empty()) {
        std::tie(opts.sp_h, opts.sp_w) = parse_pair(infer_sp, "--sp");
      } else {
        std::tie(opts.sp_h, opts.sp_w) = cds::grid_for_count(image.height, image.width, infer_k);
        opts.sp_h = std::max(2, opts.sp_h);
        opts.sp_w = std::max(2, opts.sp_w);
      }
      opts.connectivity = !infer_no_conn;
      opts.min_size = infer_min_size;
      write_labels(infer_out, cds::infer_labels(params, image, opts));
    } else if (eval->parsed()) {
      const cds::SuperpixelLabeling pred = read_labels(eval_pred);
      const cds::LabelMap gt = cds::load_label_map(eval_gt);
      const int tol = eval_tol >= 0 ? eval_tol : cds::default_tolerance(gt.height, gt.width);
      const cds::MetricReport r = cds::evaluate(pred, gt, tol);
      if (eval_header) std::cout << cds::kMetricsCsvHeader << '\n';
      std::cout << cds::format_metrics_row(r.n_superpixels, r) << '\n';
    } else if (bench->parsed()) {
      cds::SweepOptions opts;
      opts.method = cds::parse_sweep_method(bench_method);
      opts.counts = parse_list(bench_counts, "--counts");
      opts.jobs = bench_jobs;
      opts.tol = bench_tol;
      opts.connectivity = !bench_no_conn;
      std::optional<cds::ModelParams<float>> model;
      if (opts.method == cds::SweepMethod::Cds) {
        if (bench_model.empty()) throw UsageError("--method cds requires --model");
        model = cds::load_checkpoint(bench_model);
        opts.model = &*model;
      }
      const cds::SweepResult r = cds::sweep(cds::read_manifest(bench_manifest), opts);
      for (const auto& e : r.errors) std::cerr << "error: data: " << e << '\n';
      const std::string csv = cds::sweep_csv(r);
      if (bench_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream f(bench_out, std::ios::binary);
        if (!f) throw cds::DataError("cannot write " + bench_out);
        f << csv;
      }
      if (r.rows.empty()) throw cds::DataError("no image could be evaluated");
    } else if (render->parsed()) {
      if (render_mode != "mean" && render_mode != "boundary") {
        throw UsageError("--mode must be mean or boundary, got '" + render_mode + "'");
      }
      const cds::ImageRGB image = cds::load_image(render_image);
      const cds::SuperpixelLabeling labels = read_labels(render_labels);
      cds::save_image(render_out, render_mode == "mean" ? cds::render_mean_fill(image, labels)
                                                        : cds::boundary_overlay(image, labels));
    } else if (modality->parsed()) {
      const cds::ModalityKind kind = cds::parse_modality(mod_kind);
      cds::save_image(mod_out, cds::aux_to_image(cds::make_aux(cds::load_image(mod_image), kind)));
    } else if (slic_cmd->parsed()) {
      slic_cfg.connectivity = !slic_no_conn;
      write_labels(slic_out, cds::slic(cds::load_image(slic_image), slic_cfg));
    } else if (synth->parsed()) {
      std::cout << cds::make_synthetic_dataset(synth_out, synth_n, synth_size, synth_seed).string() << '\n';
    }
  } catch (const UsageError& e) {
    std::cerr << "error: usage: " << e.what() << '\n';
    return kUsage;
  } catch (const cds::ConfigError& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return kUsage;
  } catch (const cds::NumericError& e) {
    std::cerr << "error: numeric: " << e.what() << '\n';
    return kNumeric;
  } catch (const cds::DataError& e) {
    std::cerr << "error: data: " << e.what() << '\n';
    return kData;
  } catch (const cds::DimensionError& e) {
    std::cerr << "error: data: " << e.what() << '\n';
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: data: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
