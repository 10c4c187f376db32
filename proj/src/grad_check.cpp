// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0

#include "cds/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace cds {
namespace {

double evaluate(const Objective& objective) {
  Tape<double> tape;
  Var<double> v = objective(tape);
  if (v.size() != 1) throw DimensionError("grad_check: objective must be scalar, got " + shape_str(v.shape()));
  return v.value().data[0];
}

}  // namespace

std::vector<std::size_t> sample_coords(std::size_t size, std::size_t max_samples) {
  std::vector<std::size_t> coords;
  if (max_samples == 0 || max_samples >= size) {
    coords.resize(size);
    for (std::size_t i = 0; i < size; ++i) coords[i] = i;
    return coords;
  }
  coords.reserve(max_samples);
  for (std::size_t s = 0; s < max_samples; ++s) coords.push_back(s * size / max_samples);
  return coords;
}

std::vector<double> numeric_gradient(const Objective& objective, Tensor<double>& x,
                                     const std::vector<std::size_t>& coords, double eps) {
  std::vector<double> out;
  out.reserve(coords.size());
  for (std::size_t i : coords) {
    const double saved = x.data[i];
    x.data[i] = saved + eps;
    const double up = evaluate(objective);
    x.data[i] = saved - eps;
    const double down = evaluate(objective);
    x.data[i] = saved;
    out.push_back((up - down) / (2.0 * eps));
  }
  return out;
}

double max_relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric,
                          double floor) {
  if (analytic.size() != numeric.size()) throw DimensionError("max_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i], n = numeric[i];
    if (!std::isfinite(a) || !std::isfinite(n)) return INFINITY;
    const double denom = std::max({std::abs(a), std::abs(n), floor});
    worst = std::max(worst, std::abs(a - n) / denom);
  }
  return worst;
}

double grad_check_tensor(const Objective& objective, Tensor<double>& x, const GradCheckOptions& opts) {
  x.grad.assign(x.size(), 0.0);
  {
    Tape<double> tape;
    Var<double> loss = objective(tape);
    tape.backward(loss);
  }
  const std::vector<std::size_t> coords = sample_coords(x.size(), opts.max_samples);
  std::vector<double> analytic;
  analytic.reserve(coords.size());
  for (std::size_t i : coords) analytic.push_back(x.grad[i]);
  const std::vector<double> numeric = numeric_gradient(objective, x, coords, opts.eps);
  return max_relative_error(analytic, numeric, opts.floor);
}

double grad_check(const std::function<Var<double>(Var<double>)>& f, Tensor<double>& x, double eps) {
  GradCheckOptions opts;
  opts.eps = eps;
  // The numeric pass needs x on the tape too; binding it as a leaf there is
  // harmless because backward() is never called on those tapes.
  return grad_check_tensor([&](Tape<double>& tape) { return f(tape.leaf(x)); }, x, opts);
}

}  // namespace cds
