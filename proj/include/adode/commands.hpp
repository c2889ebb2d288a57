// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "adode/anomaly_pipeline.hpp"
#include "adode/feature_store.hpp"
#include "adode/likelihood.hpp"
#include "adode/pc_sampler.hpp"
#include "adode/trainer.hpp"

namespace adode {

// Fully resolved configuration shared by all subcommands.
struct RunConfig {
  std::uint64_t seed = 0;
  VpSdeConfig sde;
  MlpScoreConfig net;
  TrainConfig train;
  OdeSolverConfig solver;
  HutchinsonConfig hutch;
  SamplerConfig sampler;
  std::vector<std::string> scales;  // empty: every scale in the manifest
  SyntheticSpec synth;
  DecoderConfig decoder;
  std::vector<std::string> localize_ids;
  std::vector<double> localize_t_starts;
  std::vector<std::string> localize_scales;
  std::vector<std::vector<std::string>> ablation_subsets;
  bool eval_ablation = false;
  std::filesystem::path train_manifest;
  std::filesystem::path test_manifest;
  std::filesystem::path checkpoint_dir;
  std::filesystem::path output_dir;
  std::filesystem::path report;  // empty: <output_dir>/report.jsonl
  std::size_t threads = 1;

  std::filesystem::path report_path() const {
    return report.empty() ? output_dir / "report.jsonl" : report;
  }
};

// Defaults for every key; "seed" is null and must be supplied.
nlohmann::json default_run_config();

// defaults <- file <- overrides (JSON merge patch at each layer).
nlohmann::json resolve_run_config(const nlohmann::json& file, const nlohmann::json& overrides);

// Throws ConfigError on unknown keys, wrong types or a missing seed.
RunConfig parse_run_config(const nlohmann::json& resolved);

// Each command returns a human-readable summary. `log` receives progress
// lines when non-null.
std::string cmd_synth(const RunConfig& cfg);
std::string cmd_train(const RunConfig& cfg, std::ostream* log = nullptr);
std::string cmd_score(const RunConfig& cfg);
std::string cmd_eval(const RunConfig& cfg);
std::string cmd_localize(const RunConfig& cfg);
std::string cmd_ablate(const RunConfig& cfg);

// Checkpoint file for one scale under cfg.checkpoint_dir.
std::filesystem::path checkpoint_path(const RunConfig& cfg, const std::string& scale);

}  // namespace adode
