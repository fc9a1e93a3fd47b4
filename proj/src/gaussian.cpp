// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#include "loom/gaussian.hpp"

#include <cmath>
#include <stdexcept>

namespace loom {

namespace {
constexpr double kLn2Pi = 1.8378770664093454836;
}

DiagonalGaussian::DiagonalGaussian(Tensor m, Tensor lv)
    : mean(std::move(m)), log_var(std::move(lv)) {
  if (mean.size() != log_var.size()) {
    throw std::invalid_argument("DiagonalGaussian: mean/log_var length mismatch");
  }
  require_finite(log_var, "DiagonalGaussian log_var");
}

DiagonalGaussian DiagonalGaussian::standard(int dim) {
  return DiagonalGaussian(Tensor::zeros({dim}), Tensor::zeros({dim}));
}

double gaussian_log_density(const Tensor& x, const DiagonalGaussian& g) {
  if (x.size() != g.mean.size()) {
    throw std::invalid_argument("gaussian_log_density: dimension mismatch");
  }
  require_finite(x, "gaussian_log_density x");
  double total = 0.0;
  for (std::int64_t i = 0; i < x.size(); ++i) {
    double d = x.data[i] - g.mean.data[i];
    total += -0.5 * kLn2Pi - 0.5 * g.log_var.data[i] - 0.5 * d * d * std::exp(-g.log_var.data[i]);
  }
  return total;
}

double gaussian_kl(const DiagonalGaussian& q, const DiagonalGaussian& p) {
  if (q.dim() != p.dim()) throw std::invalid_argument("gaussian_kl: dimension mismatch");
  double total = 0.0;
  for (std::int64_t i = 0; i < q.mean.size(); ++i) {
    double d = q.mean.data[i] - p.mean.data[i];
    total += 0.5 * ((std::exp(q.log_var.data[i]) + d * d) * std::exp(-p.log_var.data[i]) - 1.0 +
                    p.log_var.data[i] - q.log_var.data[i]);
  }
  return total;
}

Tensor reparameterized_sample(const DiagonalGaussian& g, const Tensor& noise) {
  if (noise.size() != g.mean.size()) {
    throw std::invalid_argument("reparameterized_sample: dimension mismatch");
  }
  Tensor out = g.mean;
  for (std::int64_t i = 0; i < out.size(); ++i) {
    out.data[i] += std::exp(0.5 * g.log_var.data[i]) * noise.data[i];
  }
  return out;
}

}  // namespace loom
