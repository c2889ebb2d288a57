// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

#include "adode/pc_sampler.hpp"

#include <cmath>
#include <sstream>

#include "adode/error.hpp"

namespace adode {
namespace {

void check_finite(std::span<const double> v, const char* where, double t) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      std::ostringstream os;
      os << where << ": non-finite state at t=" << t;
      throw NumericalError(os.str());
    }
  }
}

}  // namespace

void SamplerConfig::validate(const VpSdeConfig& sde) const {
  if (n_steps < 1) throw ConfigError("sampler: n_steps must be >= 1");
  if (!(snr > 0.0 && snr < 1.0)) throw ConfigError("sampler: snr must lie in (0, 1)");
  if (!(t_start >= sde.t_min && t_start <= sde.t_max)) {
    throw ConfigError("sampler: t_start must lie in [t_min, t_max]");
  }
}

std::vector<double> predictor_step(const ScoreNetwork& model, const VpSdeConfig& sde,
                                   std::span<const double> z, double t_i, double dt, Rng& rng) {
  if (dt < 0.0) throw ConfigError("predictor_step: dt must be non-negative");
  const std::size_t d = z.size();
  std::vector<double> s(d);
  model.evaluate(z, t_i, s);
  const double b = beta(sde, t_i) * dt;
  const double sb = std::sqrt(b);
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) {
    out[i] = (1.0 + 0.5 * b) * z[i] + b * s[i] + sb * rng.normal();
  }
  check_finite(out, "predictor_step", t_i);
  return out;
}

double corrector_step_size(std::span<const double> g, double snr) {
  double sq = 0.0;
  for (double v : g) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm < 1e-12) return kCorrectorStepCap;
  const double ratio = snr * std::sqrt(static_cast<double>(g.size())) / norm;
  return 2.0 * ratio * ratio;
}

std::vector<double> corrector_step(const ScoreNetwork& model, const VpSdeConfig& sde,
                                   std::span<const double> z, double t, double snr, Rng& rng) {
  (void)beta(sde, t);  // domain check
  const std::size_t d = z.size();
  std::vector<double> g(d);
  model.evaluate(z, t, g);
  check_finite(g, "corrector_step", t);
  const double h = corrector_step_size(g, snr);
  const double noise_scale = std::sqrt(2.0 * h);
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = z[i] + h * g[i] + noise_scale * rng.normal();
  check_finite(out, "corrector_step", t);
  return out;
}

std::size_t denoise_steps(const SamplerConfig& cfg, const VpSdeConfig& sde, double t_start) {
  const double frac = (t_start - sde.t_min) / (sde.t_max - sde.t_min);
  return static_cast<std::size_t>(std::llround(static_cast<double>(cfg.n_steps) * frac));
}

std::vector<double> denoise(const ScoreNetwork& model, const VpSdeConfig& sde,
                            std::span<const double> z_at_t_start, double t_start,
                            const SamplerConfig& cfg, Rng& rng) {
  SamplerConfig local = cfg;
  local.t_start = t_start;
  local.validate(sde);
  std::vector<double> z(z_at_t_start.begin(), z_at_t_start.end());
  const std::size_t steps = denoise_steps(cfg, sde, t_start);
  if (steps == 0) return z;
  const double dt = (t_start - sde.t_min) / static_cast<double>(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double t_i = t_start - static_cast<double>(i) * dt;
    const double t_next = i + 1 == steps ? sde.t_min : t_start - static_cast<double>(i + 1) * dt;
    z = predictor_step(model, sde, z, t_i, dt, rng);
    for (std::size_t c = 0; c < cfg.corrector_steps; ++c) {
      z = corrector_step(model, sde, z, t_next, cfg.snr, rng);
    }
  }
  return z;
}

std::vector<double> reconstruct(const ScoreNetwork& model, const VpSdeConfig& sde,
                                std::span<const double> z0, const SamplerConfig& cfg, Rng& rng) {
  cfg.validate(sde);
  // z0 is treated as a state at t_min, where every other process starts.
  const PerturbedSample noisy = sample_transition(sde, z0, sde.t_min, cfg.t_start, rng);
  return denoise(model, sde, noisy.z_t, cfg.t_start, cfg, rng);
}

}  // namespace adode
