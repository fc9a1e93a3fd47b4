// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "loom/rng.hpp"
#include "loom/tensor.hpp"

namespace loom {

// Diagonal Gaussian stored as mean and log-variance. Log-variance keeps the
// parameterization unconstrained; variance is positive by construction.
struct DiagonalGaussian {
  Tensor mean;
  Tensor log_var;

  DiagonalGaussian() = default;
  DiagonalGaussian(Tensor m, Tensor lv);

  int dim() const { return static_cast<int>(mean.size()); }
  static DiagonalGaussian standard(int dim);
};

// sum_i [ -0.5 log(2*pi) - 0.5 lv_i - 0.5 (x_i-mu_i)^2 / exp(lv_i) ]
double gaussian_log_density(const Tensor& x, const DiagonalGaussian& g);

// analytic KL(q || p); >= 0, and exactly 0 for q == p
double gaussian_kl(const DiagonalGaussian& q, const DiagonalGaussian& p);

// mu + exp(0.5 lv) * noise, noise injected by the caller
Tensor reparameterized_sample(const DiagonalGaussian& g, const Tensor& noise);

}  // namespace loom
