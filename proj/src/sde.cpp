// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

#include "adode/sde.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "adode/error.hpp"

namespace adode {
namespace {

void check_time(const VpSdeConfig& cfg, double t) {
  if (!(t >= 0.0 && t <= cfg.t_max)) {
    std::ostringstream os;
    os << "time " << t << " outside [0, " << cfg.t_max << "]";
    throw ConfigError(os.str());
  }
}

}  // namespace

void VpSdeConfig::validate() const {
  if (!(beta_min > 0.0 && beta_min < beta_max && std::isfinite(beta_max))) {
    throw ConfigError("sde: require 0 < beta_min < beta_max");
  }
  if (!(t_min > 0.0 && t_min < t_max && std::isfinite(t_max))) {
    throw ConfigError("sde: require 0 < t_min < t_max");
  }
}

double beta(const VpSdeConfig& cfg, double t) {
  check_time(cfg, t);
  return cfg.beta_min + t * (cfg.beta_max - cfg.beta_min);
}

double integral_beta(const VpSdeConfig& cfg, double t) {
  check_time(cfg, t);
  return cfg.beta_min * t + 0.5 * (cfg.beta_max - cfg.beta_min) * t * t;
}

double drift_diffusion(const VpSdeConfig& cfg, std::span<const double> z, double t,
                       std::span<double> drift) {
  if (drift.size() != z.size()) throw ConfigError("drift_diffusion: output size mismatch");
  const double b = beta(cfg, t);
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!std::isfinite(z[i])) throw DataError("drift_diffusion: non-finite input");
    drift[i] = -0.5 * b * z[i];
  }
  return std::sqrt(b);
}

PerturbParams perturb_params(const VpSdeConfig& cfg, double t) {
  const double ib = integral_beta(cfg, t);
  // -expm1 keeps the std accurate for tiny t.
  return {std::exp(-0.5 * ib), std::sqrt(-std::expm1(-ib))};
}

PerturbParams transition_params(const VpSdeConfig& cfg, double s, double t) {
  if (s > t) throw ConfigError("transition_params: require s <= t");
  const double ib = integral_beta(cfg, t) - integral_beta(cfg, s);
  return {std::exp(-0.5 * ib), std::sqrt(-std::expm1(-ib))};
}

namespace {

PerturbedSample apply_kernel(const PerturbParams& p, std::span<const double> z0, Rng& rng) {
  PerturbedSample out;
  out.noise.resize(z0.size());
  out.z_t.resize(z0.size());
  rng.fill_normal(out.noise);
  for (std::size_t i = 0; i < z0.size(); ++i) {
    out.z_t[i] = p.mean_coeff * z0[i] + p.std * out.noise[i];
  }
  return out;
}

}  // namespace

PerturbedSample sample_perturbation(const VpSdeConfig& cfg, std::span<const double> z0, double t,
                                    Rng& rng) {
  return apply_kernel(perturb_params(cfg, t), z0, rng);
}

PerturbedSample sample_transition(const VpSdeConfig& cfg, std::span<const double> z_s, double s,
                                  double t, Rng& rng) {
  return apply_kernel(transition_params(cfg, s, t), z_s, rng);
}

double prior_logpdf(std::span<const double> z) {
  double sq = 0.0;
  for (double v : z) sq += v * v;
  const double d = static_cast<double>(z.size());
  return -0.5 * sq - 0.5 * d * std::log(2.0 * std::numbers::pi);
}

void analytic_gaussian_score(const VpSdeConfig& cfg, std::span<const double> z, double t,
                             std::span<const double> data_mean, double data_std,
                             std::span<double> out) {
  if (!(data_std > 0.0)) throw ConfigError("analytic_gaussian_score: data_std must be positive");
  if (data_mean.size() != z.size() || out.size() != z.size()) {
    throw ConfigError("analytic_gaussian_score: dimension mismatch");
  }
  const PerturbParams p = perturb_params(cfg, t);
  const double var = p.mean_coeff * p.mean_coeff * data_std * data_std + p.std * p.std;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = -(z[i] - p.mean_coeff * data_mean[i]) / var;
  }
}

}  // namespace adode
