// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

#include "adode/likelihood.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "adode/error.hpp"
#include "parallel.hpp"

namespace adode {

std::string_view to_string(ProbeDistribution p) {
  return p == ProbeDistribution::kRademacher ? "rademacher" : "gaussian";
}

ProbeDistribution probe_distribution_from_string(std::string_view name) {
  if (name == "rademacher") return ProbeDistribution::kRademacher;
  if (name == "gaussian") return ProbeDistribution::kGaussian;
  throw ConfigError("unknown probe distribution '" + std::string(name) + "'");
}

void HutchinsonConfig::validate() const {
  if (n_probes < 1) throw ConfigError("hutchinson: n_probes must be >= 1");
}

namespace {

void check_finite(std::span<const double> v, double t) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      std::ostringstream os;
      os << "non-finite score network output at t=" << t;
      throw NumericalError(os.str());
    }
  }
}

}  // namespace

void ode_drift(const ScoreNetwork& model, const VpSdeConfig& sde, std::span<const double> z,
               double t, std::span<double> out) {
  model.evaluate(z, t, out);
  check_finite(out, t);
  const double b = beta(sde, t);
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = -0.5 * b * (z[i] + out[i]);
}

std::vector<double> draw_probes(const HutchinsonConfig& cfg, std::size_t dim, Rng& rng) {
  cfg.validate();
  std::vector<double> probes(cfg.n_probes * dim);
  for (double& e : probes) {
    e = cfg.probe_distribution == ProbeDistribution::kRademacher ? rng.rademacher()
                                                                 : rng.normal();
  }
  return probes;
}

double divergence_estimate(const ScoreNetwork& model, const VpSdeConfig& sde,
                           std::span<const double> z, double t, std::span<const double> probes,
                           std::span<double> drift) {
  const std::size_t d = z.size();
  if (d == 0 || probes.empty() || probes.size() % d != 0) {
    throw ConfigError("divergence_estimate: probes must be a non-empty multiple of the dimension");
  }
  const std::size_t k = probes.size() / d;
  std::vector<double> score(d);
  std::vector<double> vjps(probes.size());
  model.evaluate_and_vjp(z, t, probes, score, vjps);
  check_finite(score, t);
  check_finite(vjps, t);
  const double b = beta(sde, t);
  if (!drift.empty()) {
    for (std::size_t i = 0; i < d; ++i) drift[i] = -0.5 * b * (z[i] + score[i]);
  }
  // eps^T (-1/2 beta (I + ds/dz)) eps
  double total = 0.0;
  for (std::size_t p = 0; p < k; ++p) {
    double quad = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double e = probes[p * d + i];
      quad += e * e + vjps[p * d + i] * e;
    }
    total += -0.5 * b * quad;
  }
  return total / static_cast<double>(k);
}

LikelihoodResult log_likelihood(const ScoreNetwork& model, const VpSdeConfig& sde,
                                std::span<const double> z0, const OdeSolverConfig& solver,
                                const HutchinsonConfig& hutch) {
  sde.validate();
  hutch.validate();
  const std::size_t d = z0.size();
  if (d == 0 || d != model.input_dim()) {
    throw ConfigError("log_likelihood: sample dimension does not match the model");
  }
  for (double v : z0) {
    if (!std::isfinite(v)) throw DataError("log_likelihood: non-finite input");
  }
  Rng rng(hutch.seed);
  const std::vector<double> probes = draw_probes(hutch, d, rng);

  std::vector<double> y0(d + 1, 0.0);
  std::copy(z0.begin(), z0.end(), y0.begin());
  const OdeRhs rhs = [&](double t, std::span<const double> y, std::span<double> dy) {
    dy[d] = divergence_estimate(model, sde, y.first(d), t, probes, dy.first(d));
  };
  const OdeSolution sol = solve_dopri5(rhs, sde.t_min, sde.t_max, y0, solver);

  const std::span<const double> z_end(sol.y.data(), d);
  LikelihoodResult res;
  res.log_likelihood = prior_logpdf(z_end) + sol.y[d];
  res.bpd = bpd(res.log_likelihood, d);
  // Each rhs call is one score evaluation (plus its vjp).
  res.n_function_evals = sol.n_function_evals;
  double sq = 0.0;
  for (double v : z_end) sq += v * v;
  res.final_state_norm = std::sqrt(sq);
  return res;
}

double bpd(double log_likelihood, std::array<std::size_t, 3> dims) {
  if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0) {
    throw ConfigError("bpd: dimensions must be positive");
  }
  return bpd(log_likelihood, dims[0] * dims[1] * dims[2]);
}

double bpd(double log_likelihood, std::size_t total_dim) {
  if (total_dim == 0) throw ConfigError("bpd: dimensions must be positive");
  return -log_likelihood / (std::numbers::ln2 * static_cast<double>(total_dim));
}

std::uint64_t sample_probe_seed(std::uint64_t base_seed, std::span<const double> z0) {
  return derive_seed(base_seed, std::string_view(reinterpret_cast<const char*>(z0.data()),
                                                 z0.size() * sizeof(double)));
}

std::vector<BatchLikelihoodEntry> batch_log_likelihood(
    const ScoreNetwork& model, const VpSdeConfig& sde,
    std::span<const std::vector<double>> samples, const OdeSolverConfig& solver,
    const HutchinsonConfig& hutch, std::size_t threads) {
  std::vector<BatchLikelihoodEntry> out(samples.size());
  detail::parallel_for(samples.size(), threads, [&](std::size_t i) {
    HutchinsonConfig h = hutch;
    h.seed = sample_probe_seed(hutch.seed, samples[i]);
    try {
      out[i].result = log_likelihood(model, sde, samples[i], solver, h);
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
  });
  return out;
}

}  // namespace adode
