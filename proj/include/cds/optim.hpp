// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "cds/tensor.hpp"

namespace cds {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a fixed parameter group. Gradients are read from
// Tensor::grad; a parameter without a gradient is treated as having a zero
// gradient.
template <typename T>
class Adam {
 public:
  explicit Adam(std::vector<Tensor<T>*> params, AdamConfig cfg = {});

  void step(double lr);
  void zero_grad();

  long steps() const { return t_; }
  const std::vector<Tensor<T>*>& params() const { return params_; }
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }

 private:
  std::vector<Tensor<T>*> params_;
  AdamConfig cfg_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  long t_ = 0;
};

// lr0 * (1 - iter/iters)^power, with iter clamped to [0, iters].
double poly_lr(double lr0, long iter, long iters, double power);

}  // namespace cds
