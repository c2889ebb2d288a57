// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "adode/rng.hpp"
#include "adode/sde.hpp"

namespace adode {

// Time-conditioned score function s(z, t) ~ grad_z log p_t(z).
//
// Implementations must be deterministic and safe to call concurrently from
// several threads: evaluation never mutates the network.
class ScoreNetwork {
 public:
  virtual ~ScoreNetwork() = default;

  virtual std::size_t input_dim() const noexcept = 0;

  virtual void evaluate(std::span<const double> z, double t, std::span<double> out) const = 0;

  // Row-vector Jacobian product v^T (ds/dz).
  virtual void vjp(std::span<const double> z, double t, std::span<const double> v,
                   std::span<double> out) const = 0;

  // Evaluates s(z, t) and the vjp of each probe. `probes` and `vjps` hold
  // k = probes.size() / input_dim() vectors packed back to back. The default
  // calls evaluate and vjp separately; networks that can share one forward
  // pass override it.
  virtual void evaluate_and_vjp(std::span<const double> z, double t,
                                std::span<const double> probes, std::span<double> out,
                                std::span<double> vjps) const;

  // Column-wise evaluation of a d x B batch with per-column times.
  virtual Eigen::MatrixXd evaluate_batch(const Eigen::MatrixXd& z,
                                         std::span<const double> t) const;
};

// Sinusoidal embedding of t scaled by 1000: entry 2k is sin(1000 t w_k) and
// entry 2k+1 is cos(1000 t w_k) with w_k = 10000^(-k / (dim/2 - 1)).
void time_embedding(double t, std::span<double> out);
std::vector<double> time_embedding(double t, std::size_t dim);

inline constexpr double kTimeEmbeddingScale = 1000.0;

enum class Activation { kSilu, kIdentity };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

// How the last layer's output f becomes a score. kDirect: s = f.
// kPriorResidual: s = -z + f / sigma_t, with sigma_t from MlpScoreConfig::sde;
// f = 0 gives the score of the standard normal prior.
enum class ScoreHead { kDirect, kPriorResidual };

std::string_view to_string(ScoreHead s);
ScoreHead score_head_from_string(std::string_view name);

struct MlpScoreConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims{256, 256};
  std::size_t time_embed_dim = 64;
  Activation activation = Activation::kSilu;
  ScoreHead head = ScoreHead::kPriorResidual;
  VpSdeConfig sde;  // consulted only for kPriorResidual

  void validate() const;
  std::size_t num_layers() const { return hidden_dims.size() + 1; }
  std::size_t layer_in(std::size_t layer) const;
  std::size_t layer_out(std::size_t layer) const;
  std::size_t param_count() const;
};

// Multilayer perceptron over concat(z, time_embedding(t)), linear output of
// width input_dim, mapped to a score by the configured head. Parameters live in one flat vector; each layer stores its
// weight matrix (out x in, column major) followed by its bias.
class MlpScoreNetwork final : public ScoreNetwork {
 public:
  // All parameters zero.
  explicit MlpScoreNetwork(MlpScoreConfig cfg);
  MlpScoreNetwork(MlpScoreConfig cfg, std::vector<double> params);

  // Hidden layers U(-sqrt(3/fan_in), sqrt(3/fan_in)), zero biases, final layer zero.
  static MlpScoreNetwork initialized(MlpScoreConfig cfg, Rng& rng);

  const MlpScoreConfig& config() const noexcept { return cfg_; }
  std::span<const double> params() const noexcept { return params_; }
  std::span<double> mutable_params() noexcept { return params_; }

  Eigen::Map<Eigen::MatrixXd> weight(std::size_t layer);
  Eigen::Map<Eigen::VectorXd> bias(std::size_t layer);
  Eigen::Map<const Eigen::MatrixXd> weight(std::size_t layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;

  std::size_t input_dim() const noexcept override { return cfg_.input_dim; }
  void evaluate(std::span<const double> z, double t, std::span<double> out) const override;
  void vjp(std::span<const double> z, double t, std::span<const double> v,
           std::span<double> out) const override;
  void evaluate_and_vjp(std::span<const double> z, double t, std::span<const double> probes,
                        std::span<double> out, std::span<double> vjps) const override;
  Eigen::MatrixXd evaluate_batch(const Eigen::MatrixXd& z,
                                 std::span<const double> t) const override;

  // Activations kept from a batched forward pass for the backward pass.
  struct Cache {
    std::vector<Eigen::MatrixXd> inputs;       // input to each layer
    std::vector<Eigen::MatrixXd> pre_activations;  // hidden layers only
    Eigen::RowVectorXd output_scale;               // 1/sigma_t per column, or 1
  };

  Eigen::MatrixXd forward(const Eigen::MatrixXd& z, std::span<const double> t,
                          Cache* cache) const;

  // Backpropagates `out_grad` (dLoss/dOutput, d x B) through a cached pass.
  // Adds the parameter gradient into `param_grad` when it is non-empty and
  // returns dLoss/dz (d x B).
  Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& out_grad,
                           std::span<double> param_grad) const;

 private:
  std::size_t offset(std::size_t layer) const { return offsets_[layer]; }

  MlpScoreConfig cfg_;
  std::vector<double> params_;
  std::vector<std::size_t> offsets_;
};

// Exact parameter gradient of a batch loss whose output gradient is known.
std::vector<double> mlp_param_grad(const MlpScoreNetwork& net, const Eigen::MatrixXd& z,
                                   std::span<const double> t, const Eigen::MatrixXd& out_grad);

// Closed-form score of the VP marginals of N(mean, std^2 I) data.
class GaussianOracleScore final : public ScoreNetwork {
 public:
  GaussianOracleScore(VpSdeConfig sde, std::vector<double> data_mean, double data_std);

  std::size_t input_dim() const noexcept override { return mean_.size(); }
  void evaluate(std::span<const double> z, double t, std::span<double> out) const override;
  void vjp(std::span<const double> z, double t, std::span<const double> v,
           std::span<double> out) const override;

 private:
  VpSdeConfig sde_;
  std::vector<double> mean_;
  double std_;
};

// Central-difference vjp for score functions without reverse mode:
// out_j = v . (s(z + h e_j) - s(z - h e_j)) / (2h), h = 1e-3 (1 + |z|_inf).
void finite_difference_vjp(const ScoreNetwork& net, std::span<const double> z, double t,
                           std::span<const double> v, std::span<double> out);

// Adapts an arbitrary callable to ScoreNetwork using finite_difference_vjp.
class FunctionScore final : public ScoreNetwork {
 public:
  using Fn = std::function<void(std::span<const double>, double, std::span<double>)>;
  FunctionScore(std::size_t dim, Fn fn) : dim_(dim), fn_(std::move(fn)) {}

  std::size_t input_dim() const noexcept override { return dim_; }
  void evaluate(std::span<const double> z, double t, std::span<double> out) const override {
    fn_(z, t, out);
  }
  void vjp(std::span<const double> z, double t, std::span<const double> v,
           std::span<double> out) const override {
    finite_difference_vjp(*this, z, t, v, out);
  }

 private:
  std::size_t dim_;
  Fn fn_;
};

}  // namespace adode
