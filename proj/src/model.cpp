// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0

#include "cds/model.hpp"

#include <cmath>
#include <numbers>

#include "cds/errors.hpp"
#include "cds/rng.hpp"
#include "cds/superpixel.hpp"

namespace cds {

int ModelConfig::levels() const {
  int n = 0;
  while ((1 << n) < d) ++n;
  return std::max(1, n);
}

void ModelConfig::validate() const {
  if (channels < 1) throw ConfigError("channels must be >= 1");
  if (gate_reduction < 1) throw ConfigError("gate_reduction must be >= 1");
  if (!is_power_of_two(d)) throw ConfigError("d=" + std::to_string(d) + " is not a power of two");
}

namespace {

template <typename T>
Tensor<T> kaiming(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor<T> t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

template <typename T>
ConvParams<T> make_conv(std::size_t out, std::size_t in, std::size_t k, Rng& rng) {
  return {kaiming<T>({out, in, k, k}, in * k * k, rng), Tensor<T>({out})};
}

template <typename T>
LinearParams<T> make_linear(std::size_t out, std::size_t in, Rng& rng) {
  return {kaiming<T>({out, in}, in, rng), Tensor<T>({out})};
}

template <typename T>
BatchNormParams<T> make_bn(std::size_t c) {
  return {Tensor<T>({c}, T(1)), Tensor<T>({c}), Tensor<T>({c}), Tensor<T>({c}, T(1))};
}

template <typename T>
EncoderParams<T> make_encoder(std::size_t c, Rng& rng) {
  EncoderParams<T> e;
  e.phi[0] = make_conv<T>(c, 3, 3, rng);
  e.phi[1] = make_conv<T>(c, c, 3, rng);
  e.phi[2] = {Tensor<T>({3, c, 3, 3}), Tensor<T>({3})};
  e.bn[0] = make_bn<T>(c);
  e.bn[1] = make_bn<T>(c);
  e.bn[2] = make_bn<T>(3);
  e.proj[0] = make_conv<T>(c, 3, 3, rng);
  e.proj[1] = make_conv<T>(c, c, 3, rng);
  return e;
}

template <typename T>
void push_conv(std::vector<ParamRef<T>>& out, ConvParams<T>& p, const std::string& name, ParamGroup g) {
  out.push_back({name + ".weight", &p.weight, g});
  out.push_back({name + ".bias", &p.bias, g});
}

template <typename T>
void push_linear(std::vector<ParamRef<T>>& out, LinearParams<T>& p, const std::string& name, ParamGroup g) {
  out.push_back({name + ".weight", &p.weight, g});
  out.push_back({name + ".bias", &p.bias, g});
}

void check_unit_range(const std::vector<float>& v) {
  for (float x : v)
    if (!(x >= 0.0f && x <= 1.0f)) throw DataError("encoder input outside [0,1]");
}
void check_unit_range(const std::vector<double>& v) {
  for (double x : v)
    if (!(x >= 0.0 && x <= 1.0)) throw DataError("encoder input outside [0,1]");
}

template <typename Img>
Tensor<float> hwc_batch_to_tensor(const std::vector<Img>& images) {
  if (images.empty()) throw DataError("to_tensor: empty batch");
  const std::size_t h = images[0].height, w = images[0].width, n = images.size();
  Tensor<float> t({n, 3, h, w});
  for (std::size_t b = 0; b < n; ++b) {
    if (static_cast<std::size_t>(images[b].height) != h || static_cast<std::size_t>(images[b].width) != w) {
      throw DataError("to_tensor: batch images differ in size");
    }
    const auto& px = images[b].pixels;
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t p = 0; p < h * w; ++p) t.data[(b * 3 + c) * h * w + p] = px[p * 3 + c];
  }
  return t;
}

}  // namespace

template <typename T>
std::vector<ParamRef<T>> named_tensors(EncoderParams<T>& p, const std::string& prefix) {
  std::vector<ParamRef<T>> out;
  for (int i = 0; i < 3; ++i) {
    const std::string k = std::to_string(i);
    push_conv(out, p.phi[i], prefix + ".phi" + k, ParamGroup::Main);
    out.push_back({prefix + ".bn" + k + ".gamma", &p.bn[i].gamma, ParamGroup::Main});
    out.push_back({prefix + ".bn" + k + ".beta", &p.bn[i].beta, ParamGroup::Main});
    out.push_back({prefix + ".bn" + k + ".running_mean", &p.bn[i].running_mean, ParamGroup::Buffer});
    out.push_back({prefix + ".bn" + k + ".running_var", &p.bn[i].running_var, ParamGroup::Buffer});
  }
  push_conv(out, p.proj[0], prefix + ".proj0", ParamGroup::Main);
  push_conv(out, p.proj[1], prefix + ".proj1", ParamGroup::Main);
  return out;
}

template <typename T>
std::vector<ParamRef<T>> named_tensors(VariationalParams<T>& p, const std::string& prefix) {
  std::vector<ParamRef<T>> out;
  push_linear(out, p.fc1, prefix + ".fc1", ParamGroup::Variational);
  push_linear(out, p.fc2, prefix + ".fc2", ParamGroup::Variational);
  return out;
}

template <typename T>
std::vector<ParamRef<T>> named_tensors(ModelParams<T>& params) {
  std::vector<ParamRef<T>> out = named_tensors(params.enc_rgb, "enc_rgb");
  for (auto& r : named_tensors(params.enc_aux, "enc_aux")) out.push_back(std::move(r));
  push_linear(out, params.gate.fc1, "gate.fc1", ParamGroup::Main);
  push_linear(out, params.gate.fc2, "gate.fc2", ParamGroup::Main);
  for (std::size_t i = 0; i < params.decoder.levels.size(); ++i) {
    push_conv(out, params.decoder.levels[i], "decoder.level" + std::to_string(i), ParamGroup::Main);
  }
  push_conv(out, params.decoder.head, "decoder.head", ParamGroup::Main);
  for (auto& r : named_tensors(params.var, "var")) out.push_back(std::move(r));
  return out;
}

template <typename T>
VariationalParams<T> init_variational(std::uint64_t seed, int channels) {
  Rng rng(seed);
  const std::size_t c = static_cast<std::size_t>(channels);
  return {make_linear<T>(2 * c, c, rng), make_linear<T>(2 * c, 2 * c, rng)};
}

template <typename T>
ModelParams<T> init_params(std::uint64_t seed, const ModelConfig& cfg) {
  cfg.validate();
  ModelParams<T> p;
  p.config = cfg;
  const std::size_t c = static_cast<std::size_t>(cfg.channels);
  const std::size_t hidden = static_cast<std::size_t>(cfg.gate_hidden());
  Rng rng_rgb(Rng::derive(seed, 1)), rng_aux(Rng::derive(seed, 2)), rng_gate(Rng::derive(seed, 3)),
      rng_dec(Rng::derive(seed, 4));
  p.enc_rgb = make_encoder<T>(c, rng_rgb);
  p.enc_aux = make_encoder<T>(c, rng_aux);
  p.gate.fc1 = make_linear<T>(hidden, c, rng_gate);
  p.gate.fc2 = make_linear<T>(c, hidden, rng_gate);
  std::fill(p.gate.fc2.bias.data.begin(), p.gate.fc2.bias.data.end(), T(2));
  p.decoder.levels.push_back(make_conv<T>(c, c, 3, rng_dec));
  for (int i = 1; i < cfg.levels(); ++i) p.decoder.levels.push_back(make_conv<T>(c, 2 * c, 3, rng_dec));
  p.decoder.head = make_conv<T>(kNeighbours, c, 1, rng_dec);
  p.var = init_variational<T>(Rng::derive(seed, 5), cfg.channels);
  return p;
}

template <typename T>
Var<T> encode(ParamBinder<T>& bind, EncoderParams<T>& p, const Var<T>& x, const ForwardOptions& opts) {
  if (x.value().rank() != 4 || x.dim(1) != 3) {
    throw DimensionError("encode: expected [N,3,H,W], got " + shape_str(x.shape()));
  }
  if (opts.checked) check_unit_range(x.value().data);
  BatchNormOptions bn;
  bn.training = opts.training;
  bn.update_running = opts.training && opts.update_running;
  Var<T> h = x;
  for (int i = 0; i < 3; ++i) {
    h = conv2d(h, bind(p.phi[i].weight), bind(p.phi[i].bias), 1, 1);
    h = batch_norm(h, bind(p.bn[i].gamma), bind(p.bn[i].beta), p.bn[i].running_mean, p.bn[i].running_var, bn);
    h = relu(h);
  }
  h = add(h, x);
  h = relu(conv2d(h, bind(p.proj[0].weight), bind(p.proj[0].bias), 1, 1));
  return relu(conv2d(h, bind(p.proj[1].weight), bind(p.proj[1].bias), 1, 1));
}

template <typename T>
GateOutput<T> gate_forward(ParamBinder<T>& bind, GateParams<T>& p, const Var<T>& features) {
  const Var<T> pooled = spatial_mean(features);
  const Var<T> hidden = relu(linear(pooled, bind(p.fc1.weight), bind(p.fc1.bias)));
  const Var<T> g = sigmoid(linear(hidden, bind(p.fc2.weight), bind(p.fc2.bias)));
  const Var<T> rest = add_scalar(mul_scalar(g, T(-1)), T(1));
  return {scale_channels(features, g), spatial_mean(scale_channels(features, rest)), g};
}

template <typename T>
Var<T> decode(ParamBinder<T>& bind, DecoderParams<T>& p, const Var<T>& content, int d) {
  if (content.value().rank() != 4) throw DimensionError("decode: expected [N,C,H,W]");
  const std::size_t h = content.dim(2), w = content.dim(3);
  const GridSpec grid = GridSpec::make(static_cast<int>(h), static_cast<int>(w), d);
  const std::size_t n_levels = p.levels.size();
  if (n_levels == 0) throw DimensionError("decode: decoder has no levels");

  std::vector<Var<T>> feats{content};
  for (std::size_t i = 1; i < n_levels; ++i) {
    const std::size_t div = std::size_t{1} << i;
    if (h % div != 0 || w % div != 0) throw DimensionError("decode: feature size not divisible by 2^level");
    feats.push_back(bilinear_resize(content, h / div, w / div));
  }
  Var<T> x = relu(conv2d(feats.back(), bind(p.levels[0].weight), bind(p.levels[0].bias), 1, 1));
  for (std::size_t lvl = 1; lvl < n_levels; ++lvl) {
    const Var<T>& skip = feats[n_levels - 1 - lvl];
    x = bilinear_resize(x, skip.dim(2), skip.dim(3));
    x = relu(conv2d(concat_channels(skip, x), bind(p.levels[lvl].weight), bind(p.levels[lvl].bias), 1, 1));
  }
  const Var<T> logits = conv2d(x, bind(p.head.weight), bind(p.head.bias), 1, 0);
  return masked_softmax(logits, grid_index_map(grid.height(), grid.width(), d).valid);
}

template <typename T>
Var<T> variational_loglik(ParamBinder<T>& bind, VariationalParams<T>& p, const Var<T>& v_i, const Var<T>& v_a) {
  if (v_i.shape() != v_a.shape() || v_i.value().rank() != 2) {
    throw DimensionError("variational_loglik: expected matching [N,C] inputs, got " + shape_str(v_i.shape()) +
                         " and " + shape_str(v_a.shape()));
  }
  const std::size_t c = v_i.dim(1);
  const Var<T> hidden = relu(linear(v_a, bind(p.fc1.weight), bind(p.fc1.bias)));
  const Var<T> out = linear(hidden, bind(p.fc2.weight), bind(p.fc2.bias));
  if (out.dim(1) != 2 * c) throw DimensionError("variational_loglik: network output must have 2C entries");
  const Var<T> mu = narrow_last(out, 0, c);
  const Var<T> logvar = tanh(narrow_last(out, c, c));
  const Var<T> diff = sub(v_i, mu);
  const Var<T> sq = mul(mul(diff, diff), exp(mul_scalar(logvar, T(-1))));
  const T log2pi = static_cast<T>(std::log(2.0 * std::numbers::pi));
  const Var<T> per = add_scalar(mul_scalar(add(logvar, sq), T(-0.5)), T(-0.5) * log2pi);
  return sum_last(per);
}

template <typename T>
BranchOutput<T> branch_forward(ParamBinder<T>& bind, EncoderParams<T>& enc, ModelParams<T>& params,
                               const Var<T>& x, const ForwardOptions& opts) {
  BranchOutput<T> out;
  out.features = encode(bind, enc, x, opts);
  out.gated = gate_forward(bind, params.gate, out.features);
  out.q = decode(bind, params.decoder, out.gated.content, params.config.d);
  return out;
}

Tensor<float> to_tensor(const std::vector<ImageRGB>& images) { return hwc_batch_to_tensor(images); }
Tensor<float> to_tensor(const std::vector<AuxModal>& images) { return hwc_batch_to_tensor(images); }

#define CDS_INSTANTIATE_MODEL(T)                                                                              \
  template std::vector<ParamRef<T>> named_tensors(ModelParams<T>&);                                           \
  template std::vector<ParamRef<T>> named_tensors(EncoderParams<T>&, const std::string&);                     \
  template std::vector<ParamRef<T>> named_tensors(VariationalParams<T>&, const std::string&);                 \
  template ModelParams<T> init_params<T>(std::uint64_t, const ModelConfig&);                                  \
  template VariationalParams<T> init_variational<T>(std::uint64_t, int);                                      \
  template Var<T> encode(ParamBinder<T>&, EncoderParams<T>&, const Var<T>&, const ForwardOptions&);           \
  template GateOutput<T> gate_forward(ParamBinder<T>&, GateParams<T>&, const Var<T>&);                        \
  template Var<T> decode(ParamBinder<T>&, DecoderParams<T>&, const Var<T>&, int);                             \
  template Var<T> variational_loglik(ParamBinder<T>&, VariationalParams<T>&, const Var<T>&, const Var<T>&);   \
  template BranchOutput<T> branch_forward(ParamBinder<T>&, EncoderParams<T>&, ModelParams<T>&, const Var<T>&, \
                                          const ForwardOptions&);

CDS_INSTANTIATE_MODEL(float)
CDS_INSTANTIATE_MODEL(double)

}  // namespace cds
