// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0

#include "cds/optim.hpp"

#include <algorithm>
#include <cmath>

#include "cds/errors.hpp"

namespace cds {

template <typename T>
Adam<T>::Adam(std::vector<Tensor<T>*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const Tensor<T>* p : params_) {
    m_.emplace_back(p->size(), T(0));
    v_.emplace_back(p->size(), T(0));
  }
}

template <typename T>
void Adam<T>::step(double lr) {
  ++t_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor<T>& p = *params_[i];
    if (p.size() != m_[i].size()) throw DimensionError("adam: parameter " + std::to_string(i) + " changed shape");
    if (p.has_grad() && p.grad.size() != p.size()) {
      throw DimensionError("adam: gradient shape does not match parameter " + std::to_string(i));
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double g = p.has_grad() ? static_cast<double>(p.grad[j]) : 0.0;
      const double m = b1 * m_[i][j] + (1.0 - b1) * g;
      const double v = b2 * v_[i][j] + (1.0 - b2) * g * g;
      m_[i][j] = static_cast<T>(m);
      v_[i][j] = static_cast<T>(v);
      const double mhat = m / c1, vhat = v / c2;
      p.data[j] = static_cast<T>(p.data[j] - lr * mhat / (std::sqrt(vhat) + cfg_.eps));
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (Tensor<T>* p : params_) p->zero_grad();
}

double poly_lr(double lr0, long iter, long iters, double power) {
  if (iters <= 0) throw ConfigError("poly_lr: iters must be positive");
  const long i = std::clamp(iter, 0L, iters);
  return lr0 * std::pow(1.0 - static_cast<double>(i) / static_cast<double>(iters), power);
}

template class Adam<float>;
template class Adam<double>;

}  // namespace cds
