// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

// Reference score networks and helpers shared by the test binaries.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "adode/rng.hpp"
#include "adode/score_model.hpp"

namespace adode::testing {

// s(z) = A z + b, time independent, exact vjp.
class LinearScore final : public ScoreNetwork {
 public:
  explicit LinearScore(Eigen::MatrixXd a) : a_(std::move(a)), b_(Eigen::VectorXd::Zero(a_.rows())) {}
  LinearScore(Eigen::MatrixXd a, Eigen::VectorXd b) : a_(std::move(a)), b_(std::move(b)) {}

  std::size_t input_dim() const noexcept override { return static_cast<std::size_t>(a_.rows()); }
  void evaluate(std::span<const double> z, double, std::span<double> out) const override {
    Eigen::Map<Eigen::VectorXd>(out.data(), a_.rows()) =
        a_ * Eigen::Map<const Eigen::VectorXd>(z.data(), a_.cols()) + b_;
  }
  void vjp(std::span<const double>, double, std::span<const double> v,
           std::span<double> out) const override {
    Eigen::Map<Eigen::VectorXd>(out.data(), a_.cols()) =
        a_.transpose() * Eigen::Map<const Eigen::VectorXd>(v.data(), a_.rows());
  }
  const Eigen::MatrixXd& matrix() const { return a_; }

 private:
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
};

inline LinearScore zero_score(std::size_t d) {
  return LinearScore(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)));
}

// MLP whose first layer copies z and whose output layer negates it: s = -z.
inline MlpScoreNetwork minus_identity_mlp(std::size_t d, std::size_t embed = 8) {
  MlpScoreConfig cfg;
  cfg.input_dim = d;
  cfg.hidden_dims = {d};
  cfg.time_embed_dim = embed;
  cfg.activation = Activation::kIdentity;
  cfg.head = ScoreHead::kDirect;
  MlpScoreNetwork net(cfg);
  const auto n = static_cast<Eigen::Index>(d);
  net.weight(0).leftCols(n) = Eigen::MatrixXd::Identity(n, n);
  net.weight(1) = -Eigen::MatrixXd::Identity(n, n);
  return net;
}

inline std::vector<double> normal_vector(std::size_t d, Rng& rng, double scale = 1.0) {
  std::vector<double> v(d);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace adode::testing
