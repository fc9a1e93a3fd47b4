// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#include "loom/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace loom {

int Rng::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
  // rejection sampling on the top bits, unbiased
  std::uint64_t un = static_cast<std::uint64_t>(n);
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return static_cast<int>(x % un);
}

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; 1-u keeps log() away from zero
  const double two_pi = 6.283185307179586476925286766559;
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(two_pi * u2);
  has_spare_ = true;
  return r * std::cos(two_pi * u2);
}

Tensor Rng::gaussian_vector(int n) {
  Tensor t = Tensor::zeros({n});
  for (int i = 0; i < n; ++i) t.at(i) = gaussian();
  return t;
}

Tensor Rng::gaussian_tensor(const std::vector<int>& shape, double stddev) {
  Tensor t = Tensor::zeros(shape);
  for (auto& v : t.data) v = gaussian() * stddev;
  return t;
}

}  // namespace loom
