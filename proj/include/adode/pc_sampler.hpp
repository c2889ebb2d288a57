// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "adode/rng.hpp"
#include "adode/score_model.hpp"
#include "adode/sde.hpp"

namespace adode {

struct SamplerConfig {
  std::size_t n_steps = 500;  // predictor steps over the full [t_min, t_max] range
  double snr = 0.16;
  std::size_t corrector_steps = 1;  // Langevin steps after each predictor step
  double t_start = 0.5;             // noise-injection time for reconstruction

  void validate(const VpSdeConfig& sde) const;
};

// Corrector step size used when the score vanishes.
inline constexpr double kCorrectorStepCap = 1e-2;

// Euler-Maruyama step of the reverse SDE from t_i to t_i - dt:
// (1 + b/2) z + b s(z, t_i) + sqrt(b) eps with b = beta(t_i) dt.
std::vector<double> predictor_step(const ScoreNetwork& model, const VpSdeConfig& sde,
                                   std::span<const double> z, double t_i, double dt, Rng& rng);

// Langevin step z + h g + sqrt(2h) eps with g = s(z, t) and
// h = 2 (snr sqrt(d) / |g|)^2.
std::vector<double> corrector_step(const ScoreNetwork& model, const VpSdeConfig& sde,
                                   std::span<const double> z, double t, double snr, Rng& rng);

// h for a given score vector (capped when |g| < 1e-12).
double corrector_step_size(std::span<const double> g, double snr);

// Number of predictor steps when starting at t_start.
std::size_t denoise_steps(const SamplerConfig& cfg, const VpSdeConfig& sde, double t_start);

// Runs the predictor-corrector chain from t_start down to t_min on a uniform
// grid, one predictor step followed by cfg.corrector_steps corrector steps.
std::vector<double> denoise(const ScoreNetwork& model, const VpSdeConfig& sde,
                            std::span<const double> z_at_t_start, double t_start,
                            const SamplerConfig& cfg, Rng& rng);

// Forward-diffuses z0 (a state at t_min) to cfg.t_start and denoises it back.
std::vector<double> reconstruct(const ScoreNetwork& model, const VpSdeConfig& sde,
                                std::span<const double> z0, const SamplerConfig& cfg, Rng& rng);

}  // namespace adode
