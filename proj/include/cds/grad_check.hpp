// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference gradient verification (64-bit only).

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "cds/tensor.hpp"

namespace cds {

struct GradCheckOptions {
  double eps = 1e-5;
  // Denominator floor for the relative error, so that entries where both the
  // analytic and numeric derivative vanish do not amplify round-off.
  double floor = 1e-6;
  // Check at most this many coordinates (evenly strided); 0 = all.
  std::size_t max_samples = 0;
};

// Scalar objective evaluated on a fresh tape. It must bind the tensor under
// test with tape.leaf() so that backward() fills its gradient.
using Objective = std::function<Var<double>(Tape<double>&)>;

// Central differences of `objective` with respect to the entries of x at the
// given coordinates. x is perturbed in place and restored.
std::vector<double> numeric_gradient(const Objective& objective, Tensor<double>& x,
                                     const std::vector<std::size_t>& coords, double eps);

double max_relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric,
                          double floor = 1e-6);

// Compares backward() gradients of x against central differences. x.grad is
// overwritten. Returns the max relative error over the checked coordinates.
double grad_check_tensor(const Objective& objective, Tensor<double>& x, const GradCheckOptions& opts = {});

// Convenience form for f(x): the leaf for x is created by the checker.
double grad_check(const std::function<Var<double>(Var<double>)>& f, Tensor<double>& x, double eps = 1e-5);

std::vector<std::size_t> sample_coords(std::size_t size, std::size_t max_samples);

}  // namespace cds
