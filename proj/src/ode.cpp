// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

#include "adode/ode.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "adode/error.hpp"

namespace adode {
namespace {

// Dormand-Prince 5(4) tableau.
constexpr std::array<double, 7> kC{0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0};
constexpr double kA21 = 1.0 / 5.0;
constexpr double kA31 = 3.0 / 40.0, kA32 = 9.0 / 40.0;
constexpr double kA41 = 44.0 / 45.0, kA42 = -56.0 / 15.0, kA43 = 32.0 / 9.0;
constexpr double kA51 = 19372.0 / 6561.0, kA52 = -25360.0 / 2187.0, kA53 = 64448.0 / 6561.0,
                 kA54 = -212.0 / 729.0;
constexpr double kA61 = 9017.0 / 3168.0, kA62 = -355.0 / 33.0, kA63 = 46732.0 / 5247.0,
                 kA64 = 49.0 / 176.0, kA65 = -5103.0 / 18656.0;
constexpr double kB1 = 35.0 / 384.0, kB3 = 500.0 / 1113.0, kB4 = 125.0 / 192.0,
                 kB5 = -2187.0 / 6784.0, kB6 = 11.0 / 84.0;
// Difference between the 5th order and embedded 4th order weights.
constexpr double kE1 = 71.0 / 57600.0, kE3 = -71.0 / 16695.0, kE4 = 71.0 / 1920.0,
                 kE5 = -17253.0 / 339200.0, kE6 = 22.0 / 525.0, kE7 = -1.0 / 40.0;

// PI controller gains (Hairer & Wanner, order 5).
constexpr double kBeta = 0.04;
constexpr double kAlpha = 0.2 - 0.75 * kBeta;
constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 10.0;

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void OdeSolverConfig::validate() const {
  if (!(rtol > 0.0) || !(atol > 0.0)) throw ConfigError("ode: tolerances must be positive");
  if (!(initial_step > 0.0)) throw ConfigError("ode: initial_step must be positive");
  if (max_steps == 0) throw ConfigError("ode: max_steps must be >= 1");
}

OdeSolution solve_dopri5(const OdeRhs& rhs, double t0, double t1, std::span<const double> y0,
                         const OdeSolverConfig& cfg) {
  cfg.validate();
  if (!(t1 > t0)) throw ConfigError("ode: require t1 > t0");
  const std::size_t n = y0.size();
  OdeSolution sol;
  std::vector<double> y(y0.begin(), y0.end());
  std::vector<double> y_new(n), tmp(n);
  std::array<std::vector<double>, 7> k;
  for (auto& ki : k) ki.resize(n);

  if (!all_finite(y)) throw NumericalError("ode: non-finite initial state");
  rhs(t0, y, k[0]);
  ++sol.n_function_evals;

  double t = t0;
  double h = std::min(cfg.initial_step, t1 - t0);
  double err_prev = 1e-4;
  std::size_t steps = 0;

  while (t < t1) {
    if (steps >= cfg.max_steps) {
      std::ostringstream os;
      os << "ode: step budget of " << cfg.max_steps << " exhausted at t=" << t << " (target "
         << t1 << ")";
      throw NumericalError(os.str());
    }
    ++steps;
    const bool last = t + h >= t1;
    if (last) h = t1 - t;

    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * kA21 * k[0][i];
    rhs(t + kC[1] * h, tmp, k[1]);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (kA31 * k[0][i] + kA32 * k[1][i]);
    rhs(t + kC[2] * h, tmp, k[2]);
    for (std::size_t i = 0; i < n; ++i) {
      tmp[i] = y[i] + h * (kA41 * k[0][i] + kA42 * k[1][i] + kA43 * k[2][i]);
    }
    rhs(t + kC[3] * h, tmp, k[3]);
    for (std::size_t i = 0; i < n; ++i) {
      tmp[i] = y[i] + h * (kA51 * k[0][i] + kA52 * k[1][i] + kA53 * k[2][i] + kA54 * k[3][i]);
    }
    rhs(t + kC[4] * h, tmp, k[4]);
    for (std::size_t i = 0; i < n; ++i) {
      tmp[i] = y[i] + h * (kA61 * k[0][i] + kA62 * k[1][i] + kA63 * k[2][i] + kA64 * k[3][i] +
                           kA65 * k[4][i]);
    }
    rhs(t + h, tmp, k[5]);
    for (std::size_t i = 0; i < n; ++i) {
      y_new[i] = y[i] + h * (kB1 * k[0][i] + kB3 * k[2][i] + kB4 * k[3][i] + kB5 * k[4][i] +
                             kB6 * k[5][i]);
    }
    rhs(t + h, y_new, k[6]);
    sol.n_function_evals += 6;

    double err_sq = 0.0;
    bool finite = all_finite(y_new);
    for (std::size_t i = 0; i < n && finite; ++i) {
      const double e = h * (kE1 * k[0][i] + kE3 * k[2][i] + kE4 * k[3][i] + kE5 * k[4][i] +
                            kE6 * k[5][i] + kE7 * k[6][i]);
      const double scale = cfg.atol + cfg.rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
      err_sq += (e / scale) * (e / scale);
    }
    const double err = n > 0 ? std::sqrt(err_sq / static_cast<double>(n)) : 0.0;

    if (finite && std::isfinite(err) && err <= 1.0) {
      t = last ? t1 : t + h;
      y.swap(y_new);
      std::swap(k[0], k[6]);  // FSAL
      ++sol.accepted_steps;
      double factor = err == 0.0 ? kMaxFactor
                                 : kSafety * std::pow(err, -kAlpha) * std::pow(err_prev, kBeta);
      factor = std::clamp(factor, kMinFactor, kMaxFactor);
      err_prev = std::max(err, 1e-4);
      h *= factor;
    } else {
      ++sol.rejected_steps;
      if (!finite || !std::isfinite(err)) {
        h *= kMinFactor;
      } else {
        h *= std::max(kMinFactor, kSafety * std::pow(err, -kAlpha));
      }
      if (h < 1e-14 * std::max(1.0, std::abs(t))) {
        std::ostringstream os;
        os << "ode: step size underflow at t=" << t
           << (finite ? "" : " (non-finite state)");
        throw NumericalError(os.str());
      }
    }
  }
  sol.y = std::move(y);
  return sol;
}

}  // namespace adode
