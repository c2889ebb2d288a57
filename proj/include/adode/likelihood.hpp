// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adode/ode.hpp"
#include "adode/rng.hpp"
#include "adode/score_model.hpp"
#include "adode/sde.hpp"

namespace adode {

enum class ProbeDistribution { kRademacher, kGaussian };

std::string_view to_string(ProbeDistribution p);
ProbeDistribution probe_distribution_from_string(std::string_view name);

struct HutchinsonConfig {
  ProbeDistribution probe_distribution = ProbeDistribution::kRademacher;
  std::size_t n_probes = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LikelihoodResult {
  double log_likelihood = 0.0;  // nats
  double bpd = 0.0;
  std::size_t n_function_evals = 0;
  double final_state_norm = 0.0;  // |z(t_max)|, should look like a prior draw
};

// Probability-flow drift -1/2 beta(t) (z + s(z, t)).
void ode_drift(const ScoreNetwork& model, const VpSdeConfig& sde, std::span<const double> z,
               double t, std::span<double> out);

// n_probes x d probe matrix packed row by row.
std::vector<double> draw_probes(const HutchinsonConfig& cfg, std::size_t dim, Rng& rng);

// Mean over probes of eps^T (d drift / dz) eps, i.e. an unbiased estimate of
// the drift divergence. Also writes the drift into `drift` when non-empty.
double divergence_estimate(const ScoreNetwork& model, const VpSdeConfig& sde,
                           std::span<const double> z, double t, std::span<const double> probes,
                           std::span<double> drift = {});

// log p(z0) = log N(z(t_max); 0, I) + integral of the divergence, obtained by
// integrating the augmented state (z, accumulated divergence) from t_min to
// t_max. Probes are drawn once from hutch.seed and held fixed over the solve.
LikelihoodResult log_likelihood(const ScoreNetwork& model, const VpSdeConfig& sde,
                                std::span<const double> z0, const OdeSolverConfig& solver,
                                const HutchinsonConfig& hutch);

// -log_likelihood / (ln 2 * d1 d2 d3).
double bpd(double log_likelihood, std::array<std::size_t, 3> dims);
double bpd(double log_likelihood, std::size_t total_dim);

struct BatchLikelihoodEntry {
  std::optional<LikelihoodResult> result;
  std::string error;  // set when result is empty
};

// Seed used for one sample of a batch: derived from the base seed and the
// sample's bytes, so results do not depend on the sample's batch position.
std::uint64_t sample_probe_seed(std::uint64_t base_seed, std::span<const double> z0);

// Per-sample log_likelihood with sample_probe_seed seeds. Failures are
// recorded per entry instead of aborting the batch. Output order matches input.
std::vector<BatchLikelihoodEntry> batch_log_likelihood(
    const ScoreNetwork& model, const VpSdeConfig& sde,
    std::span<const std::vector<double>> samples, const OdeSolverConfig& solver,
    const HutchinsonConfig& hutch, std::size_t threads = 1);

}  // namespace adode
