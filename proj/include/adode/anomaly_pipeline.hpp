// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adode/eval_metrics.hpp"
#include "adode/feature_store.hpp"
#include "adode/likelihood.hpp"
#include "adode/pc_sampler.hpp"
#include "adode/trainer.hpp"

namespace adode {

// One trained score model per feature scale, sharing a diffusion config.
struct MultiScaleModel {
  VpSdeConfig sde;
  std::vector<ScoreModelCheckpoint> scales;

  // Throws ConfigError when empty, when labels repeat or when the
  // checkpoints disagree on the diffusion config.
  void validate() const;
  const ScoreModelCheckpoint& at(const std::string& label) const;
  std::vector<std::string> labels() const;
  // Label of the scale with the most spatial positions (ties: first).
  std::string largest_spatial_scale() const;
};

MultiScaleModel make_multiscale(std::vector<ScoreModelCheckpoint> checkpoints);

struct ScoringConfig {
  OdeSolverConfig solver;
  HutchinsonConfig hutch;
};

struct ScaleScore {
  std::string scale;
  double bpd = 0.0;
  double log_likelihood = 0.0;
  std::size_t nfe = 0;
};

struct AnomalyReport {
  std::string sample_id;
  std::vector<ScaleScore> scales;  // model order
  double score = 0.0;              // mean of the per-scale bpd
  std::optional<SampleLabel> label;
  std::optional<Image> heatmap;

  const ScaleScore* find(const std::string& scale) const;
};

// Log-likelihood of raw features under one scale model: standardize with the
// checkpoint's statistics, integrate in normalized space, then subtract the
// log-determinant of the standardization so the result refers to raw space.
LikelihoodResult feature_log_likelihood(const ScoreModelCheckpoint& ckpt,
                                        const FeatureTensor& features, const ScoringConfig& cfg);

double mean_score(std::span<const double> bpds);

// Scores one sample. The features must cover exactly the model's scales.
// Each scale's probe seed is derived from cfg.hutch.seed and the scale label.
AnomalyReport score_sample(const MultiScaleModel& models, std::span<const FeatureTensor> features,
                           const ScoringConfig& cfg, std::string sample_id = {});

// Maps features at one or more scales back to an image.
class Decoder {
 public:
  virtual ~Decoder() = default;
  virtual std::size_t image_h() const noexcept = 0;
  virtual std::size_t image_w() const noexcept = 0;
  virtual std::vector<std::string> scales() const = 0;
  virtual Image decode(std::span<const FeatureTensor> features) const = 0;
};

struct DecoderConfig {
  std::vector<std::string> scales;  // empty: every scale of the first sample
  std::size_t upsample = 1;         // nearest-neighbour factor applied to each patch
  std::size_t iterations = 200;     // conjugate-gradient passes over the data
  std::uint64_t seed = 0;
};

// Per scale, a linear map (shared by all cells) from the c feature channels
// of a cell to a pixel patch, nearest-neighbour upsampled to the cell's
// footprint; the per-scale images are averaged.
class LinearPatchDecoder final : public Decoder {
 public:
  struct ScaleLayout {
    ScaleDescriptor scale;
    std::size_t cell_h = 0, cell_w = 0;    // image pixels per cell
    std::size_t patch_h = 0, patch_w = 0;  // decoded patch before upsampling
    std::size_t param_offset = 0;          // weights (patch x c, row major) then biases
    std::size_t param_count() const { return patch_h * patch_w * (scale.c + 1); }
  };

  LinearPatchDecoder(std::size_t image_h, std::size_t image_w, std::vector<ScaleDescriptor> scales,
                     std::size_t upsample);

  std::size_t image_h() const noexcept override { return image_h_; }
  std::size_t image_w() const noexcept override { return image_w_; }
  std::vector<std::string> scales() const override;
  Image decode(std::span<const FeatureTensor> features) const override;

  std::size_t upsample() const noexcept { return upsample_; }
  const std::vector<ScaleLayout>& layouts() const noexcept { return layouts_; }
  std::span<const double> params() const noexcept { return params_; }
  std::span<double> mutable_params() noexcept { return params_; }

  // Decodes with an explicit parameter vector (linear in params).
  void decode_into(std::span<const FeatureTensor> features, std::span<const double> params,
                   std::span<double> image) const;
  // Adjoint of decode_into with respect to params: grad += A^T residual.
  void accumulate_adjoint(std::span<const FeatureTensor> features, std::span<const double> residual,
                          std::span<double> grad) const;

  void save(const std::filesystem::path& path) const;
  static LinearPatchDecoder load(const std::filesystem::path& path);

 private:
  std::vector<const FeatureTensor*> select(std::span<const FeatureTensor> features) const;

  std::size_t image_h_, image_w_, upsample_;
  std::vector<ScaleLayout> layouts_;
  std::vector<double> params_;
};

struct DecoderSample {
  std::vector<FeatureTensor> features;
  Image image;
};

struct DecoderTrainingResult {
  LinearPatchDecoder decoder;
  double final_mse = 0.0;
  std::size_t iterations_run = 0;
};

// Least-squares fit by conjugate gradients on the normal equations (CGLS),
// starting from a small seeded random initialization.
DecoderTrainingResult train_decoder(std::span<const DecoderSample> data, const DecoderConfig& cfg);

// Elementwise (x - x')^2.
Image squared_error_heatmap(const Image& x, const Image& x_rec);

struct LocalizationResult {
  Image reconstruction;
  Image heatmap;
  std::vector<FeatureTensor> reconstructed_features;
};

// Extracts features, reconstructs the designated scales through the
// diffusion model (other scales pass through), decodes and compares.
// `scales` empty selects the largest-spatial-resolution scale.
LocalizationResult localize(const MultiScaleModel& models, const Decoder& decoder,
                            const Image& image, std::span<const ExtractorScale> extractor,
                            const SamplerConfig& sampler, std::span<const std::string> scales,
                            Rng& rng);

struct AblationRow {
  std::vector<std::string> subset;
  MetricSummary metrics;
};

// Re-scores every report with the mean bpd over each subset of scales and
// evaluates it; no likelihoods are recomputed.
std::vector<AblationRow> scale_ablation(std::span<const AnomalyReport> reports,
                                        std::span<const std::vector<std::string>> subsets);

double subset_score(const AnomalyReport& report, std::span<const std::string> subset);
LabeledScores labeled_scores(std::span<const AnomalyReport> reports);

// Report files hold one JSON object per line:
// {"id":..., "label":..., "scales":[{"scale":..., "bpd":..., "log_likelihood":..., "nfe":...}],
//  "score": S}. Doubles are written with round-trip precision.
std::string report_to_json_line(const AnomalyReport& r);
AnomalyReport report_from_json_line(const std::string& line);
void write_reports(const std::filesystem::path& path, std::span<const AnomalyReport> reports);
std::vector<AnomalyReport> read_reports(const std::filesystem::path& path);

}  // namespace adode
