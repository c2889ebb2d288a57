// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

// adode command-line front end. Settings resolve as flags > --config file >
// built-in defaults; the effective configuration is printed before running.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "adode/adode.h"

namespace {

using nlohmann::json;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> train_manifest, test_manifest, checkpoint_dir, output_dir, report;
  std::vector<std::string> scales;
  std::optional<std::size_t> steps, epochs, batch_size, threads, n_probes, n_steps, corrector_steps;
  std::optional<double> lr, rtol, atol, snr, t_start;
  std::optional<std::string> probe, kind, weighting;
  std::vector<std::string> sample_ids;
  std::vector<double> t_starts;
  bool ablation = false;
  bool quiet = false;
  std::vector<std::string> sets;
};

void set_path(json& j, const std::string& dotted, json value) {
  json* node = &j;
  std::size_t start = 0, dot;
  while ((dot = dotted.find('.', start)) != std::string::npos) {
    node = &(*node)[dotted.substr(start, dot - start)];
    start = dot + 1;
  }
  (*node)[dotted.substr(start)] = std::move(value);
}

json overrides(const Flags& f) {
  json o = json::object();
  auto put = [&](const char* key, const auto& opt) {
    if (opt) set_path(o, key, *opt);
  };
  put("seed", f.seed);
  put("threads", f.threads);
  put("paths.train_manifest", f.train_manifest);
  put("paths.test_manifest", f.test_manifest);
  put("paths.checkpoint_dir", f.checkpoint_dir);
  put("paths.output_dir", f.output_dir);
  put("paths.report", f.report);
  put("train.steps", f.steps);
  put("train.epochs", f.epochs);
  put("train.batch_size", f.batch_size);
  put("train.learning_rate", f.lr);
  put("train.weighting", f.weighting);
  put("solver.rtol", f.rtol);
  put("solver.atol", f.atol);
  put("hutchinson.probe", f.probe);
  put("hutchinson.n_probes", f.n_probes);
  put("sampler.n_steps", f.n_steps);
  put("sampler.snr", f.snr);
  put("sampler.corrector_steps", f.corrector_steps);
  put("sampler.t_start", f.t_start);
  put("synth.kind", f.kind);
  if (!f.scales.empty()) o["scales"] = f.scales;
  if (!f.sample_ids.empty()) set_path(o, "localize.sample_ids", f.sample_ids);
  if (!f.t_starts.empty()) set_path(o, "localize.t_starts", f.t_starts);
  if (f.ablation) set_path(o, "ablation.enabled", true);
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw CLI::ValidationError("--set", "expected KEY=VALUE, got '" + s + "'");
    const std::string key = s.substr(0, eq), text = s.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;  // bare strings
    set_path(o, key, std::move(value));
  }
  return o;
}

std::string take(char* s) {
  std::string out = s == nullptr ? "" : s;
  adode_string_free(s);
  return out;
}

int report_error(adode_status st) {
  std::cerr << "adode: error: " << adode_last_error() << "\n";
  return static_cast<int>(st);
}

void print_log_line(const char* line, void*) { std::cerr << line << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anomaly detection with diffusion-model likelihoods"};
  app.set_version_flag("--version", std::string(adode_version()));
  app.require_subcommand(1);
  Flags f;

  auto common = [&f](CLI::App* c) {
    c->add_option("-c,--config", f.config, "JSON configuration file")->check(CLI::ExistingFile);
    c->add_option("--seed", f.seed, "Master random seed (mandatory)");
    c->add_option("--threads", f.threads, "Worker threads for scoring");
    c->add_option("--output-dir", f.output_dir, "Output directory");
    c->add_option("--checkpoint-dir", f.checkpoint_dir, "Checkpoint directory");
    c->add_option("--set", f.sets, "Override any key, e.g. --set solver.rtol=1e-6");
    c->add_flag("-q,--quiet", f.quiet, "Do not print the effective configuration");
  };
  auto manifests = [&f](CLI::App* c) {
    c->add_option("--train-manifest", f.train_manifest, "Training manifest");
    c->add_option("--test-manifest", f.test_manifest, "Test manifest");
    c->add_option("--scales", f.scales, "Feature scales to use (default: all)");
  };
  auto solver = [&f](CLI::App* c) {
    c->add_option("--rtol", f.rtol, "ODE relative tolerance");
    c->add_option("--atol", f.atol, "ODE absolute tolerance");
    c->add_option("--probe", f.probe, "Hutchinson probe: rademacher|gaussian");
    c->add_option("--n-probes", f.n_probes, "Hutchinson probes per evaluation");
  };
  auto report = [&f](CLI::App* c) { c->add_option("--report", f.report, "Per-sample score file (JSON lines)"); };

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  common(synth);
  synth->add_option("--kind", f.kind, "gaussian|gaussian_mixture|blob_images");

  CLI::App* train = app.add_subcommand("train", "Train one score model per scale");
  common(train);
  manifests(train);
  train->add_option("--steps", f.steps, "Optimizer steps (overrides --epochs when > 0)");
  train->add_option("--epochs", f.epochs, "Passes over the training set");
  train->add_option("--batch-size", f.batch_size, "Minibatch size");
  train->add_option("--lr", f.lr, "Adam learning rate");
  train->add_option("--weighting", f.weighting, "sigma_squared|unit");

  CLI::App* score = app.add_subcommand("score", "Score test samples by bits per dimension");
  common(score);
  manifests(score);
  solver(score);
  report(score);

  CLI::App* eval = app.add_subcommand("eval", "AUROC, F1 and accuracy from a score report");
  common(eval);
  manifests(eval);
  report(eval);
  eval->add_flag("--ablation", f.ablation, "Also evaluate scale subsets");

  CLI::App* localize = app.add_subcommand("localize", "Reconstruct samples and write anomaly heatmaps");
  common(localize);
  manifests(localize);
  localize->add_option("--samples", f.sample_ids, "Sample ids to localize")->required();
  localize->add_option("--t-start", f.t_starts, "Noise level(s) to reconstruct from");
  localize->add_option("--n-steps", f.n_steps, "Predictor steps over [t_min, 1]");
  localize->add_option("--snr", f.snr, "Corrector signal-to-noise ratio");
  localize->add_option("--corrector-steps", f.corrector_steps, "Corrector steps per predictor step");

  CLI::App* ablate = app.add_subcommand("ablate", "Metrics for subsets of scales");
  common(ablate);
  manifests(ablate);
  report(ablate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  std::string file_json;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    std::stringstream ss;
    ss << in.rdbuf();
    file_json = ss.str();
  }
  std::string overrides_json;
  try {
    overrides_json = overrides(f).dump();
  } catch (const CLI::Error& e) {
    std::cerr << "adode: error: " << e.what() << "\n";
    return 1;
  }

  char* resolved = nullptr;
  adode_status st = adode_resolve_config(file_json.empty() ? nullptr : file_json.c_str(), overrides_json.c_str(), &resolved);
  if (st != ADODE_OK) return report_error(st);
  const std::string config = take(resolved);
  if (!f.quiet) std::cout << "effective config:\n" << config << "\n";

  char* summary = nullptr;
  if (*synth) {
    st = adode_cmd_synth(config.c_str(), &summary);
  } else if (*train) {
    st = adode_cmd_train_logged(config.c_str(), print_log_line, nullptr, &summary);
  } else if (*score) {
    st = adode_cmd_score(config.c_str(), &summary);
  } else if (*eval) {
    st = adode_cmd_eval(config.c_str(), &summary);
  } else if (*localize) {
    st = adode_cmd_localize(config.c_str(), &summary);
  } else {
    st = adode_cmd_ablate(config.c_str(), &summary);
  }
  if (st != ADODE_OK) return report_error(st);
  std::cout << take(summary);
  return 0;
}
