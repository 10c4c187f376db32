// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Network components: the per-modality encoders, the shared content gate, the
// shared superpixel decoder and the variational density network h.
//
// All image tensors are batched [N,C,H,W].

#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "cds/image.hpp"
#include "cds/ops.hpp"
#include "cds/tensor.hpp"

namespace cds {

struct ModelConfig {
  int channels = 32;
  int gate_reduction = 4;
  int d = 8;

  int gate_hidden() const { return std::max(1, channels / gate_reduction); }
  // Number of decoder feature levels, log2(d) (at least one).
  int levels() const;
  void validate() const;
};

template <typename T>
struct ConvParams {
  Tensor<T> weight;  // [out, in, k, k]
  Tensor<T> bias;    // [out]
};

template <typename T>
struct LinearParams {
  Tensor<T> weight;  // [out, in]
  Tensor<T> bias;    // [out]
};

template <typename T>
struct BatchNormParams {
  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
};

// Phi: three conv3x3-BN-relu blocks with widths (C, C, 3); P: conv3x3 3->C,
// relu, conv3x3 C->C, relu. Output = P(Phi(x) + x).
template <typename T>
struct EncoderParams {
  ConvParams<T> phi[3];
  BatchNormParams<T> bn[3];
  ConvParams<T> proj[2];
};

template <typename T>
struct GateParams {
  LinearParams<T> fc1;  // C -> C/r
  LinearParams<T> fc2;  // C/r -> C
};

// levels[0] is the deepest conv (C -> C); levels[i > 0] fuse the upsampled
// path with the skip feature (2C -> C). head is the 1x1 projection to 9.
template <typename T>
struct DecoderParams {
  std::vector<ConvParams<T>> levels;
  ConvParams<T> head;
};

// C -> 2C (relu) -> 2C, split into mean and log-variance; the log-variance
// passes through tanh, so sigma^2 stays within [1/e, e].
template <typename T>
struct VariationalParams {
  LinearParams<T> fc1;
  LinearParams<T> fc2;
};

template <typename T>
struct ModelParams {
  ModelConfig config;
  EncoderParams<T> enc_rgb;
  EncoderParams<T> enc_aux;
  GateParams<T> gate;
  DecoderParams<T> decoder;
  VariationalParams<T> var;
};

enum class ParamGroup { Main, Variational, Buffer };

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* tensor;
  ParamGroup group;
};

// Stable, named enumeration of every array in the model (checkpoint order).
template <typename T>
std::vector<ParamRef<T>> named_tensors(ModelParams<T>& params);
template <typename T>
std::vector<ParamRef<T>> named_tensors(EncoderParams<T>& p, const std::string& prefix);
template <typename T>
std::vector<ParamRef<T>> named_tensors(VariationalParams<T>& p, const std::string& prefix);

// Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases, BN gamma 1
// and beta 0, zero final conv in Phi, gate output bias +2.
template <typename T>
ModelParams<T> init_params(std::uint64_t seed, const ModelConfig& cfg);

template <typename T>
VariationalParams<T> init_variational(std::uint64_t seed, int channels);

struct ForwardOptions {
  bool training = true;
  bool update_running = true;
  // Reject inputs outside [0,1].
  bool checked = false;
};

template <typename T>
Var<T> encode(ParamBinder<T>& bind, EncoderParams<T>& p, const Var<T>& x, const ForwardOptions& opts);

template <typename T>
struct GateOutput {
  Var<T> content;  // g * F
  Var<T> style;    // spatial mean of (1 - g) * F, [N,C]
  Var<T> gate;     // [N,C]
};

template <typename T>
GateOutput<T> gate_forward(ParamBinder<T>& bind, GateParams<T>& p, const Var<T>& features);

// Association map [N,9,H,W]; invalid neighbours are exactly zero.
template <typename T>
Var<T> decode(ParamBinder<T>& bind, DecoderParams<T>& p, const Var<T>& content, int d);

// Per-sample diagonal Gaussian log density log h(v_i | v_a), shape [N].
template <typename T>
Var<T> variational_loglik(ParamBinder<T>& bind, VariationalParams<T>& p, const Var<T>& v_i, const Var<T>& v_a);

template <typename T>
struct BranchOutput {
  Var<T> features;
  GateOutput<T> gated;
  Var<T> q;
};

// encode -> gate -> decode for one modality.
template <typename T>
BranchOutput<T> branch_forward(ParamBinder<T>& bind, EncoderParams<T>& enc, ModelParams<T>& params,
                               const Var<T>& x, const ForwardOptions& opts);

// Interleaved H x W x 3 rasters -> [N,3,H,W]. All inputs must share a size.
Tensor<float> to_tensor(const std::vector<ImageRGB>& images);
Tensor<float> to_tensor(const std::vector<AuxModal>& images);

}  // namespace cds
