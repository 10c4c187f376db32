// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Two-step alternating training. Step 1 updates encoders, gate and decoder
// with h frozen; step 2 updates h alone on detached style vectors.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "cds/image.hpp"
#include "cds/losses.hpp"
#include "cds/model.hpp"
#include "cds/optim.hpp"

namespace cds {

struct TrainConfig {
  double lr_main = 5e-4;
  double lr_h = 5e-3;
  long iters = 150000;
  int batch = 8;
  int crop = 208;
  int d = 16;
  double poly_power = 0.9;
  std::uint64_t seed = 0;
  ModalityKind modality = ModalityKind::Gradient;
  LossWeights weights;
  double lambda_pos = kDefaultLambdaPos;
  int channels = 32;
  int gate_reduction = 4;
  int max_regions = kDefaultMaxRegions;
  double scale_min = 0.8;
  double scale_max = 1.2;
  double flip_prob = 0.5;
  long log_every = 50;
  long checkpoint_every = 500;
  std::filesystem::path manifest;
  std::filesystem::path out_dir = ".";

  ModelConfig model_config() const { return {channels, gate_reduction, d}; }
  AugmentConfig augment_config() const { return {crop, scale_min, scale_max, flip_prob}; }
  void validate() const;
};

// "desk": crop 64, d 8, 2000 iterations, batch 4. "paper": the defaults above.
TrainConfig preset_config(std::string_view name);

// UTF-8 `key = value` lines with `#` comments. Unknown keys and malformed
// values throw ConfigError. Relative paths resolve against `base`.
void apply_config_text(TrainConfig& cfg, std::string_view text, const std::filesystem::path& base = {},
                       std::string_view source = "config");
void apply_config_file(TrainConfig& cfg, const std::filesystem::path& path);
std::string config_to_text(const TrainConfig& cfg);

struct LossRecord {
  long iter = 0;
  double lr = 0.0;
  double l_sp_i = 0.0;
  double l_sp_a = 0.0;
  double l_align = 0.0;
  double l_mi = 0.0;
  double l_theta = 0.0;
};

inline constexpr const char* kLossCsvHeader = "iter,lr,l_sp_i,l_sp_a,l_align,l_mi,l_theta";
std::string format_loss_row(const LossRecord& r);

struct Sample {
  ImageRGB image;
  LabelMap labels;
};

std::vector<Sample> load_dataset(const std::filesystem::path& manifest);

struct MainStepResult {
  LossRecord record;
  Tensor<float> style_i;  // detached [N,C]
  Tensor<float> style_a;
};

class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);
  Trainer(const TrainConfig& cfg, ModelParams<float> params);
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  // Augmented batch for an iteration; depends only on (seed, iter, dataset).
  std::vector<Sample> make_batch(const std::vector<Sample>& dataset, long iter) const;

  // Step 1 on a prepared batch.
  MainStepResult main_step(const std::vector<Sample>& batch, long iter);
  // Step 2; returns L(theta) before the update.
  double variational_step(const Tensor<float>& style_i, const Tensor<float>& style_a);
  LossRecord step(const std::vector<Sample>& batch, long iter);

  ModelParams<float>& params() { return params_; }
  const TrainConfig& config() const { return cfg_; }
  std::vector<Tensor<float>*> main_parameters();
  std::vector<Tensor<float>*> variational_parameters();

 private:
  TrainConfig cfg_;
  ModelParams<float> params_;
  Adam<float> main_opt_;
  Adam<float> var_opt_;
};

struct TrainResult {
  std::filesystem::path checkpoint;
  std::filesystem::path loss_csv;
  std::vector<LossRecord> records;
};

// Runs cfg.iters steps, writing <out>/losses.csv (one row per iteration) and
// <out>/model.cdsp (every checkpoint_every iterations and at the end). Progress
// lines go to `log` when non-null. Throws NumericError on non-finite losses.
TrainResult train_loop(const TrainConfig& cfg, std::ostream* log = nullptr);

}  // namespace cds
