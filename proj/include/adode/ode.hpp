// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace adode {

struct OdeSolverConfig {
  double rtol = 1e-5;
  double atol = 1e-5;
  std::size_t max_steps = 100000;
  double initial_step = 1e-3;

  void validate() const;
};

struct OdeSolution {
  std::vector<double> y;
  std::size_t n_function_evals = 0;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
};

// dy/dt = rhs(t, y); rhs writes the derivative into its third argument.
using OdeRhs = std::function<void(double, std::span<const double>, std::span<double>)>;

// Integrates from t0 to t1 (t1 > t0) with the Dormand-Prince 5(4) pair,
// local extrapolation, FSAL reuse and a PI step-size controller. The error
// norm is the RMS over components of err_i / (atol + rtol max(|y_i|, |y_new_i|)).
//
// Throws NumericalError when the state becomes non-finite or when
// max_steps is exhausted (the message reports the time reached).
OdeSolution solve_dopri5(const OdeRhs& rhs, double t0, double t1, std::span<const double> y0,
                         const OdeSolverConfig& cfg);

}  // namespace adode
