// Copyright (c) 2026 the loom authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "loom/tensor.hpp"

namespace loom {

// splitmix64; used both as a mixer for derived seeds and as the generator core.
// Standard-library distributions are implementation-defined, so all draws are
// constructed by hand to keep runs bit-identical across platforms.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t seed_mix(std::uint64_t a, std::uint64_t b) { return mix64(a ^ mix64(b)); }

// Deterministic noise source. Also serves as the injectable noise stream the
// sampling and latent-variable code paths take by reference.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x853c49e6748fea9bULL) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n)
  int uniform_int(int n);

  // standard normal via Box-Muller with a cached spare
  double gaussian();

  Tensor gaussian_vector(int n);
  Tensor gaussian_tensor(const std::vector<int>& shape, double stddev);

  // independent stream derived from this stream's seed lineage and a tag
  Rng derive(std::uint64_t tag) const { return Rng(seed_mix(state_, tag)); }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace loom
