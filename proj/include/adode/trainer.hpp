// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "adode/feature_store.hpp"
#include "adode/rng.hpp"
#include "adode/score_model.hpp"
#include "adode/sde.hpp"

namespace adode {

// lambda(t) in the denoising objective.
enum class LossWeighting { kSigmaSquared, kUnit };

std::string_view to_string(LossWeighting w);
LossWeighting loss_weighting_from_string(std::string_view s);

struct TrainProgress {
  std::size_t step = 0;
  double loss = 0.0;
  double smoothed_loss = 0.0;
  double wall_seconds = 0.0;
};

struct TrainConfig {
  std::size_t epochs = 1;
  // When non-zero, overrides epochs: run exactly this many optimizer steps,
  // reshuffling at every pass over the data.
  std::size_t steps = 0;
  std::size_t batch_size = 128;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
  LossWeighting weighting = LossWeighting::kSigmaSquared;
  std::size_t log_every = 0;  // 0 = silent
  std::function<void(const TrainProgress&)> on_progress;

  void validate() const;
};

// Per-channel standardization statistics.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;

  static constexpr double kStdFloor = 1e-6;

  std::size_t channels() const noexcept { return mean.size(); }
  // (raw - mean_c) / std_c over a (h, w, c) row-major tensor.
  std::vector<double> normalize(std::span<const float> raw) const;
  std::vector<double> normalize(std::span<const double> raw) const;
  std::vector<double> denormalize(std::span<const double> z) const;
  // log |d raw / d z| = (values / channels) * sum_c log std_c.
  double log_abs_det(std::size_t n_values) const;
};

NormStats fit_norm_stats(std::span<const FeatureTensor> train_features);

struct TrainingMetadata {
  std::size_t epochs_run = 0;
  std::size_t steps_run = 0;
  double final_loss = 0.0;
  std::uint64_t seed = 0;
};

struct ScoreModelCheckpoint {
  VpSdeConfig sde;
  ScaleDescriptor scale;
  MlpScoreNetwork net;
  NormStats norm;
  TrainingMetadata meta;

  void validate() const;
};

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// Noisy inputs of one denoising step. Sample j uses t_j ~ U(t_min, t_max)
// and noise_j ~ N(0, I) from a stream keyed by the step seed and the sample's
// contents, so the batch loss does not depend on sample order.
struct DsmDraw {
  Eigen::MatrixXd z_t;
  Eigen::MatrixXd noise;
  std::vector<double> t;
  std::vector<double> sigma;
};

DsmDraw draw_dsm_inputs(const VpSdeConfig& sde, const Eigen::MatrixXd& batch, Rng& rng);

// Batch mean of lambda(t) |s(z_t, t) + noise / sigma_t|^2. With
// lambda = sigma^2 this is |sigma_t s(z_t, t) + noise|^2.
double dsm_loss(const ScoreNetwork& model, const VpSdeConfig& sde, const Eigen::MatrixXd& batch,
                LossWeighting weighting, Rng& rng);

LossAndGrad dsm_loss_and_grad(const MlpScoreNetwork& model, const VpSdeConfig& sde,
                              const Eigen::MatrixXd& batch, LossWeighting weighting, Rng& rng);

// Adam with beta1 = 0.9, beta2 = 0.999, eps = 1e-8 and bias correction.
class AdamState {
 public:
  explicit AdamState(std::size_t n_params) : m_(n_params, 0.0), v_(n_params, 0.0) {}

  // Throws NumericalError (with the step index) on a non-finite gradient.
  void step(std::span<double> params, std::span<const double> grad, double lr);
  std::size_t steps_taken() const noexcept { return t_; }

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

// Trains a score network on one scale of normal features. The returned
// parameters are rounded to float32, the precision of the checkpoint file.
ScoreModelCheckpoint train(std::span<const FeatureTensor> dataset, const VpSdeConfig& sde,
                           MlpScoreConfig net_cfg, const TrainConfig& train_cfg);

// Checkpoint file: "ADODECKP", u32 version (1), u32 header length, UTF-8 JSON
// header, then the parameters as little-endian float32 in declaration order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const ScoreModelCheckpoint& ckpt);
ScoreModelCheckpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const ScoreModelCheckpoint& ckpt, const std::filesystem::path& path);
ScoreModelCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace adode
