// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace adode {

// Seedable random stream. Every stochastic operation takes one of these by
// reference; there is no global or wall-clock seeded state anywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }
  double rademacher() { return (engine_() >> 63) != 0 ? 1.0 : -1.0; }
  std::uint64_t next_u64() { return engine_(); }

  void fill_normal(std::span<double> out) {
    for (double& v : out) v = normal();
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// Derives an independent child seed from a base seed and a stream index.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

// Derives a child seed from the bytes of a label or payload.
std::uint64_t derive_seed(std::uint64_t base, std::string_view bytes);

}  // namespace adode
