// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "adode/rng.hpp"

namespace adode {

// Variance-preserving diffusion dz = -1/2 beta(t) z dt + sqrt(beta(t)) dw
// with the affine schedule beta(t) = beta_min + t (beta_max - beta_min).
//
// Integration, training and sampling all start at t_min instead of 0: the
// perturbation std vanishes at t = 0 and the denoising target -noise/std
// is singular there.
struct VpSdeConfig {
  double beta_min = 0.1;
  double beta_max = 20.0;
  double t_min = 1e-5;
  double t_max = 1.0;

  // Throws ConfigError unless 0 < beta_min < beta_max and 0 < t_min < t_max.
  void validate() const;
};

// Gaussian perturbation kernel p_0t(z_t | z_0) = N(mean_coeff z_0, std^2 I).
struct PerturbParams {
  double mean_coeff = 1.0;
  double std = 0.0;
};

double beta(const VpSdeConfig& cfg, double t);

// Closed form of the integral of beta over [0, t].
double integral_beta(const VpSdeConfig& cfg, double t);

// Writes the forward drift -1/2 beta(t) z into `drift`; returns the scalar
// diffusion coefficient sqrt(beta(t)).
double drift_diffusion(const VpSdeConfig& cfg, std::span<const double> z, double t,
                       std::span<double> drift);

PerturbParams perturb_params(const VpSdeConfig& cfg, double t);

// Kernel of the forward process between two times s <= t.
PerturbParams transition_params(const VpSdeConfig& cfg, double s, double t);

struct PerturbedSample {
  std::vector<double> z_t;
  std::vector<double> noise;
};

// z_t = mean_coeff * z0 + std * noise with noise ~ N(0, I).
PerturbedSample sample_perturbation(const VpSdeConfig& cfg, std::span<const double> z0, double t,
                                    Rng& rng);

// Same as sample_perturbation but starting from a state already at time s.
PerturbedSample sample_transition(const VpSdeConfig& cfg, std::span<const double> z_s, double s,
                                  double t, Rng& rng);

// Standard normal log-density: -|z|^2/2 - d/2 ln(2 pi).
double prior_logpdf(std::span<const double> z);

// Exact marginal score at time t for data distributed as N(data_mean, data_std^2 I).
void analytic_gaussian_score(const VpSdeConfig& cfg, std::span<const double> z, double t,
                             std::span<const double> data_mean, double data_std,
                             std::span<double> out);

}  // namespace adode
