// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0

#include "cds/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "cds/checkpoint.hpp"
#include "cds/errors.hpp"
#include "cds/rng.hpp"

namespace cds {
namespace {

std::vector<Tensor<float>*> group(ModelParams<float>& params, ParamGroup g) {
  std::vector<Tensor<float>*> out;
  for (const auto& r : named_tensors(params))
    if (r.group == g) out.push_back(r.tensor);
  return out;
}

void require_finite(double v, const char* what, long iter) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string("non-finite ") + what + " at iteration " + std::to_string(iter), iter);
  }
}

}  // namespace

std::string format_loss_row(const LossRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%ld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", r.iter, r.lr, r.l_sp_i, r.l_sp_a, r.l_align,
                r.l_mi, r.l_theta);
  return buf;
}

std::vector<Sample> load_dataset(const std::filesystem::path& manifest) {
  const std::vector<ManifestEntry> entries = read_manifest(manifest);
  if (entries.empty()) throw DataError(manifest.string() + ": manifest lists no images");
  std::vector<Sample> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    Sample s{load_image(e.image), load_label_map(e.label)};
    if (s.image.height != s.labels.height || s.image.width != s.labels.width) {
      throw DataError(e.image.string() + ": image and label sizes differ");
    }
    out.push_back(std::move(s));
  }
  return out;
}

Trainer::Trainer(const TrainConfig& cfg) : Trainer(cfg, init_params<float>(cfg.seed, cfg.model_config())) {}

Trainer::Trainer(const TrainConfig& cfg, ModelParams<float> params)
    : cfg_(cfg),
      params_(std::move(params)),
      main_opt_(group(params_, ParamGroup::Main)),
      var_opt_(group(params_, ParamGroup::Variational)) {
  cfg_.validate();
  if (params_.config.channels != cfg_.channels || params_.config.d != cfg_.d ||
      params_.config.gate_reduction != cfg_.gate_reduction) {
    throw ConfigError("model architecture does not match the training configuration");
  }
}

std::vector<Tensor<float>*> Trainer::main_parameters() { return group(params_, ParamGroup::Main); }
std::vector<Tensor<float>*> Trainer::variational_parameters() { return group(params_, ParamGroup::Variational); }

std::vector<Sample> Trainer::make_batch(const std::vector<Sample>& dataset, long iter) const {
  if (dataset.empty()) throw DataError("empty dataset");
  const AugmentConfig aug = cfg_.augment_config();
  std::vector<Sample> batch;
  batch.reserve(cfg_.batch);
  for (int slot = 0; slot < cfg_.batch; ++slot) {
    Rng rng(Rng::derive(cfg_.seed, static_cast<std::uint64_t>(iter), static_cast<std::uint64_t>(slot)));
    const Sample& src = dataset[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(dataset.size()) - 1))];
    auto [image, labels] = augment(src.image, src.labels, aug, rng);
    batch.push_back({std::move(image), std::move(labels)});
  }
  return batch;
}

MainStepResult Trainer::main_step(const std::vector<Sample>& batch, long iter) {
  if (batch.empty()) throw DataError("empty batch");
  std::vector<ImageRGB> images;
  std::vector<AuxModal> aux;
  std::vector<LabelMap> labels;
  for (const Sample& s : batch) {
    images.push_back(s.image);
    aux.push_back(make_aux(s.image, cfg_.modality));
    labels.push_back(s.labels);
  }
  const std::size_t n = batch.size(), h = images[0].height, w = images[0].width;
  const Tensor<float> semantic = semantic_onehot<float>(labels, cfg_.max_regions);
  const Tensor<float> position = position_features<float>(n, h, w);

  MainStepResult res;
  res.record.iter = iter;
  res.record.lr = poly_lr(cfg_.lr_main, iter, cfg_.iters, cfg_.poly_power);

  Tape<float> tape;
  ParamBinder<float> main(tape, true);
  ParamBinder<float> frozen(tape, false);
  const Var<float> x_i = tape.constant(to_tensor(images));
  const Var<float> x_a = tape.constant(to_tensor(aux));
  ForwardOptions fwd;
  const BranchOutput<float> bi = branch_forward(main, params_.enc_rgb, params_, x_i, fwd);
  const BranchOutput<float> ba = branch_forward(main, params_.enc_aux, params_, x_a, fwd);

  LossParts<float> parts;
  parts.sp_i = superpixel_loss(bi.q, semantic, position, cfg_.d, cfg_.lambda_pos);
  parts.sp_a = superpixel_loss(ba.q, semantic, position, cfg_.d, cfg_.lambda_pos);
  parts.align = alignment_loss(bi.gated.content, ba.gated.content, cfg_.d);
  parts.mi = mi_loss(frozen, params_.var, bi.gated.style, ba.gated.style);
  const Var<float> total = total_loss(parts, cfg_.weights);

  res.record.l_sp_i = parts.sp_i.value()[0];
  res.record.l_sp_a = parts.sp_a.value()[0];
  res.record.l_align = parts.align.value()[0];
  res.record.l_mi = parts.mi.value()[0];
  require_finite(total.value()[0], "training loss", iter);
  res.style_i = bi.gated.style.value();
  res.style_a = ba.gated.style.value();
  res.style_i.grad.clear();
  res.style_a.grad.clear();

  main_opt_.zero_grad();
  tape.backward(total);
  for (Tensor<float>* p : main_opt_.params())
    for (float g : p->grad) require_finite(g, "gradient", iter);
  main_opt_.step(res.record.lr);
  return res;
}

double Trainer::variational_step(const Tensor<float>& style_i, const Tensor<float>& style_a) {
  Tape<float> tape;
  ParamBinder<float> bind(tape, true);
  const Var<float> nll = variational_nll(bind, params_.var, style_i, style_a);
  const double value = nll.value()[0];
  var_opt_.zero_grad();
  tape.backward(nll);
  var_opt_.step(cfg_.lr_h);
  return value;
}

LossRecord Trainer::step(const std::vector<Sample>& batch, long iter) {
  MainStepResult r = main_step(batch, iter);
  r.record.l_theta = variational_step(r.style_i, r.style_a);
  require_finite(r.record.l_theta, "variational loss", iter);
  return r.record;
}

TrainResult train_loop(const TrainConfig& cfg, std::ostream* log) {
  cfg.validate();
  if (cfg.manifest.empty()) throw ConfigError("no training manifest configured");
  const std::vector<Sample> dataset = load_dataset(cfg.manifest);
  Trainer trainer(cfg);

  std::filesystem::create_directories(cfg.out_dir);
  TrainResult result;
  result.checkpoint = cfg.out_dir / "model.cdsp";
  result.loss_csv = cfg.out_dir / "losses.csv";
  std::ofstream csv(result.loss_csv, std::ios::binary | std::ios::trunc);
  if (!csv) throw DataError("cannot write " + result.loss_csv.string());
  csv << kLossCsvHeader << '\n';

  for (long it = 0; it < cfg.iters; ++it) {
    const LossRecord rec = trainer.step(trainer.make_batch(dataset, it), it);
    csv << format_loss_row(rec) << '\n';
    result.records.push_back(rec);
    if (log && (it % cfg.log_every == 0 || it + 1 == cfg.iters)) {
      char line[256];
      std::snprintf(line, sizeof line,
                    "iter %6ld  lr %.3e  sp_i %.4f  sp_a %.4f  align %.5f  mi %.5f  theta %.4f\n", it, rec.lr,
                    rec.l_sp_i, rec.l_sp_a, rec.l_align, rec.l_mi, rec.l_theta);
      *log << line << std::flush;
    }
    if ((it + 1) % cfg.checkpoint_every == 0 || it + 1 == cfg.iters) {
      csv.flush();
      save_checkpoint(result.checkpoint, trainer.params());
    }
  }
  if (!csv) throw DataError("write failed for " + result.loss_csv.string());
  return result;
}

}  // namespace cds
