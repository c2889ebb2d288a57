// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

#include "adode/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "adode/error.hpp"
#include "parallel.hpp"

namespace adode {

using nlohmann::json;

json default_run_config() {
  return json::parse(R"({
  "seed": null,
  "threads": 1,
  "sde": {"beta_min": 0.1, "beta_max": 20.0, "t_min": 1e-5, "t_max": 1.0},
  "net": {"hidden_dims": [256, 256], "time_embed_dim": 64, "activation": "silu",
          "head": "prior_residual"},
  "train": {"epochs": 0, "steps": 4000, "batch_size": 128, "learning_rate": 1e-4,
            "weighting": "sigma_squared", "log_every": 0},
  "solver": {"rtol": 1e-5, "atol": 1e-5, "max_steps": 100000, "initial_step": 1e-3},
  "hutchinson": {"probe": "rademacher", "n_probes": 1},
  "sampler": {"n_steps": 500, "snr": 0.16, "corrector_steps": 1, "t_start": 0.5},
  "scales": [],
  "synth": {
    "kind": "gaussian", "n_train": 5000, "n_test_normal": 250, "n_test_abnormal": 250,
    "scales": [{"label": "s0", "h": 1, "w": 1, "c": 2}],
    "components": [{"weight": 1.0, "mean": [0.0], "std": [1.0]}],
    "anomaly_shift": [2.5], "anomaly_scale": 1.0,
    "image_size": 32, "n_blobs": 4, "blob_sigma_min": 3.0, "blob_sigma_max": 7.0,
    "blob_amplitude": 0.35, "background": 0.1, "anomaly_size": 8, "anomaly_value": 1.0,
    "extractor_scales": [{"label": "r32g8", "resize": 32, "grid": 8}]
  },
  "decoder": {"scales": [], "upsample": 1, "iterations": 200},
  "localize": {"sample_ids": [], "t_starts": [0.1, 0.3, 0.5, 0.7, 0.9], "scales": []},
  "ablation": {"enabled": false, "subsets": []},
  "paths": {"train_manifest": "", "test_manifest": "", "checkpoint_dir": "checkpoints",
            "output_dir": "out", "report": ""}
})");
}

namespace {

// Keys whose values are free-form (lists of records) are not walked.
void check_keys(const json& value, const json& reference, const std::string& where) {
  if (!value.is_object() || !reference.is_object()) return;
  for (const auto& [key, v] : value.items()) {
    if (!reference.contains(key)) {
      throw ConfigError("config: unknown key '" + where + key + "'");
    }
    check_keys(v, reference.at(key), where + key + ".");
  }
}

template <typename T>
T get(const json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + section + "." + key + ": " + e.what());
  }
}

std::vector<double> number_list(const json& v, const char* what) {
  if (v.is_number()) return {v.get<double>()};
  try {
    return v.get<std::vector<double>>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config: ") + what + " must be a number or a list of numbers");
  }
}

SyntheticSpec parse_synth(const json& s, std::uint64_t seed) {
  SyntheticSpec spec;
  try {
    spec.kind = synthetic_kind_from_string(s.at("kind").get<std::string>());
    spec.seed = seed;
    spec.n_train = s.at("n_train").get<std::size_t>();
    spec.n_test_normal = s.at("n_test_normal").get<std::size_t>();
    spec.n_test_abnormal = s.at("n_test_abnormal").get<std::size_t>();
    spec.scales.clear();
    for (const auto& sc : s.at("scales")) {
      spec.scales.push_back({sc.at("label").get<std::string>(), sc.at("h").get<std::size_t>(),
                             sc.at("w").get<std::size_t>(), sc.at("c").get<std::size_t>()});
    }
    spec.components.clear();
    for (const auto& c : s.at("components")) {
      spec.components.push_back({c.value("weight", 1.0), number_list(c.at("mean"), "synth.components.mean"),
                                 number_list(c.at("std"), "synth.components.std")});
    }
    spec.anomaly_shift = number_list(s.at("anomaly_shift"), "synth.anomaly_shift");
    spec.anomaly_scale = s.at("anomaly_scale").get<double>();
    spec.image_size = s.at("image_size").get<std::size_t>();
    spec.n_blobs = s.at("n_blobs").get<std::size_t>();
    spec.blob_sigma_min = s.at("blob_sigma_min").get<double>();
    spec.blob_sigma_max = s.at("blob_sigma_max").get<double>();
    spec.blob_amplitude = s.at("blob_amplitude").get<double>();
    spec.background = s.at("background").get<double>();
    spec.anomaly_size = s.at("anomaly_size").get<std::size_t>();
    spec.anomaly_value = s.at("anomaly_value").get<double>();
    spec.extractor_scales.clear();
    for (const auto& e : s.at("extractor_scales")) {
      spec.extractor_scales.push_back({e.at("label").get<std::string>(),
                                       e.at("resize").get<std::size_t>(),
                                       e.at("grid").get<std::size_t>()});
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: synth: ") + e.what());
  }
  return spec;
}

}  // namespace

json resolve_run_config(const json& file, const json& overrides) {
  json out = default_run_config();
  if (!file.is_null()) {
    if (!file.is_object()) throw ConfigError("config: file must hold a JSON object");
    check_keys(file, out, "");
    out.merge_patch(file);
  }
  if (!overrides.is_null()) {
    if (!overrides.is_object()) throw ConfigError("config: overrides must be a JSON object");
    check_keys(overrides, out, "");
    out.merge_patch(overrides);
  }
  return out;
}

RunConfig parse_run_config(const json& j) {
  check_keys(j, default_run_config(), "");
  RunConfig cfg;
  if (!j.contains("seed") || j.at("seed").is_null()) {
    throw ConfigError("config: 'seed' is mandatory (set it in the config file or with --seed)");
  }
  try {
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.threads = j.value("threads", std::size_t{1});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: seed/threads: ") + e.what());
  }
  cfg.sde.beta_min = get<double>(j, "sde", "beta_min");
  cfg.sde.beta_max = get<double>(j, "sde", "beta_max");
  cfg.sde.t_min = get<double>(j, "sde", "t_min");
  cfg.sde.t_max = get<double>(j, "sde", "t_max");
  cfg.sde.validate();

  cfg.net.hidden_dims = get<std::vector<std::size_t>>(j, "net", "hidden_dims");
  cfg.net.time_embed_dim = get<std::size_t>(j, "net", "time_embed_dim");
  cfg.net.activation = activation_from_string(get<std::string>(j, "net", "activation"));
  cfg.net.head = score_head_from_string(get<std::string>(j, "net", "head"));

  cfg.train.epochs = get<std::size_t>(j, "train", "epochs");
  cfg.train.steps = get<std::size_t>(j, "train", "steps");
  cfg.train.batch_size = get<std::size_t>(j, "train", "batch_size");
  cfg.train.learning_rate = get<double>(j, "train", "learning_rate");
  cfg.train.weighting = loss_weighting_from_string(get<std::string>(j, "train", "weighting"));
  cfg.train.log_every = get<std::size_t>(j, "train", "log_every");
  cfg.train.seed = cfg.seed;
  cfg.train.validate();

  cfg.solver.rtol = get<double>(j, "solver", "rtol");
  cfg.solver.atol = get<double>(j, "solver", "atol");
  cfg.solver.max_steps = get<std::size_t>(j, "solver", "max_steps");
  cfg.solver.initial_step = get<double>(j, "solver", "initial_step");
  cfg.solver.validate();

  cfg.hutch.probe_distribution = probe_distribution_from_string(get<std::string>(j, "hutchinson", "probe"));
  cfg.hutch.n_probes = get<std::size_t>(j, "hutchinson", "n_probes");
  cfg.hutch.seed = cfg.seed;
  cfg.hutch.validate();

  cfg.sampler.n_steps = get<std::size_t>(j, "sampler", "n_steps");
  cfg.sampler.snr = get<double>(j, "sampler", "snr");
  cfg.sampler.corrector_steps = get<std::size_t>(j, "sampler", "corrector_steps");
  cfg.sampler.t_start = get<double>(j, "sampler", "t_start");
  cfg.sampler.validate(cfg.sde);

  try {
    cfg.scales = j.at("scales").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: scales: ") + e.what());
  }
  cfg.synth = parse_synth(j.at("synth"), cfg.seed);

  cfg.decoder.scales = get<std::vector<std::string>>(j, "decoder", "scales");
  cfg.decoder.upsample = get<std::size_t>(j, "decoder", "upsample");
  cfg.decoder.iterations = get<std::size_t>(j, "decoder", "iterations");
  cfg.decoder.seed = derive_seed(cfg.seed, std::string_view("decoder"));

  cfg.localize_ids = get<std::vector<std::string>>(j, "localize", "sample_ids");
  cfg.localize_t_starts = get<std::vector<double>>(j, "localize", "t_starts");
  cfg.localize_scales = get<std::vector<std::string>>(j, "localize", "scales");

  cfg.eval_ablation = get<bool>(j, "ablation", "enabled");
  cfg.ablation_subsets = get<std::vector<std::vector<std::string>>>(j, "ablation", "subsets");

  cfg.train_manifest = get<std::string>(j, "paths", "train_manifest");
  cfg.test_manifest = get<std::string>(j, "paths", "test_manifest");
  cfg.checkpoint_dir = get<std::string>(j, "paths", "checkpoint_dir");
  cfg.output_dir = get<std::string>(j, "paths", "output_dir");
  cfg.report = get<std::string>(j, "paths", "report");
  return cfg;
}

std::filesystem::path checkpoint_path(const RunConfig& cfg, const std::string& scale) {
  return cfg.checkpoint_dir / (scale + ".ckpt");
}

namespace {

std::filesystem::path require_manifest(const std::filesystem::path& p, const char* key) {
  if (p.empty()) throw ConfigError(std::string("config: paths.") + key + " is not set");
  if (!std::filesystem::exists(p)) {
    throw DataError(std::string("manifest not found: ") + p.string() + " (paths." + key + ")");
  }
  return p;
}

std::vector<std::string> active_scales(const RunConfig& cfg, const DatasetManifest& m) {
  const std::vector<std::string> available = m.scale_labels();
  if (cfg.scales.empty()) {
    if (available.empty()) throw DataError("manifest: samples share no feature scale");
    return available;
  }
  for (const auto& s : cfg.scales) {
    if (std::find(available.begin(), available.end(), s) == available.end()) {
      throw ConfigError("scale '" + s + "' is not present in every manifest sample");
    }
  }
  return cfg.scales;
}

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

MultiScaleModel load_models(const RunConfig& cfg, const std::vector<std::string>& scales) {
  std::vector<std::string> missing;
  for (const auto& s : scales) {
    if (!std::filesystem::exists(checkpoint_path(cfg, s))) missing.push_back(s);
  }
  if (!missing.empty()) {
    std::string msg = "no checkpoint for scale(s):";
    for (const auto& s : missing) msg += " " + s;
    throw ConfigError(msg + " under " + cfg.checkpoint_dir.string());
  }
  std::vector<ScoreModelCheckpoint> ckpts;
  for (const auto& s : scales) ckpts.push_back(load_checkpoint(checkpoint_path(cfg, s)));
  return make_multiscale(std::move(ckpts));
}

std::string rel_id_path(const char* dir, const std::string& id, const char* suffix = "") {
  return std::string(dir) + "/" + id + suffix + ".adft";
}

void write_split(const std::filesystem::path& dir, const std::vector<SyntheticSample>& samples) {
  DatasetManifest m;
  for (const auto& s : samples) {
    ManifestSample ms;
    ms.id = s.id;
    ms.label = s.label;
    const std::string feat = rel_id_path("features", s.id);
    write_features(dir / feat, s.features);
    for (const auto& f : s.features) ms.features[f.scale_id] = feat;
    if (s.image) {
      ms.image = rel_id_path("images", s.id);
      write_image(dir / *ms.image, *s.image);
    }
    if (s.mask) {
      ms.mask = rel_id_path("masks", s.id);
      write_image(dir / *ms.mask, *s.mask, "mask");
    }
    m.samples.push_back(std::move(ms));
  }
  save_manifest(dir / "manifest.json", m);
}

}  // namespace

std::string cmd_synth(const RunConfig& cfg) {
  const SyntheticDataset ds = gen_synthetic(cfg.synth);
  write_split(cfg.output_dir / "train", ds.train);
  write_split(cfg.output_dir / "test", ds.test);
  std::size_t abnormal = 0;
  for (const auto& s : ds.test) abnormal += s.label == SampleLabel::kAbnormal;
  std::ostringstream os;
  os << "synth: kind=" << to_string(cfg.synth.kind) << "\n"
     << "  train: " << ds.train.size() << " normal -> " << (cfg.output_dir / "train" / "manifest.json").string() << "\n"
     << "  test:  " << ds.test.size() - abnormal << " normal, " << abnormal << " abnormal -> "
     << (cfg.output_dir / "test" / "manifest.json").string() << "\n";
  if (!ds.train.empty()) {
    os << "  scales:";
    for (const auto& f : ds.train.front().features) os << " " << f.scale_id << "(" << f.h << "x" << f.w << "x" << f.c << ")";
    os << "\n";
  }
  return os.str();
}

std::string cmd_train(const RunConfig& cfg, std::ostream* log) {
  const DatasetManifest m = load_manifest(require_manifest(cfg.train_manifest, "train_manifest"));
  const std::vector<std::string> scales = active_scales(cfg, m);
  std::vector<const ManifestSample*> normal;
  for (const auto& s : m.samples) {
    if (s.label != SampleLabel::kAbnormal) normal.push_back(&s);
  }
  if (normal.empty()) throw DataError("train: manifest holds no normal samples");

  std::ostringstream os;
  os << "train: " << normal.size() << " normal samples, " << scales.size() << " scale(s)\n";
  std::vector<ScoreModelCheckpoint> trained;
  for (const auto& scale : scales) {
    std::vector<FeatureTensor> data;
    data.reserve(normal.size());
    for (const auto* s : normal) data.push_back(load_sample_features(m, *s, scale));
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, scale);
    if (log != nullptr && tc.log_every > 0) {
      tc.on_progress = [log, &scale](const TrainProgress& p) {
        *log << "{\"scale\":\"" << scale << "\",\"step\":" << p.step << ",\"loss\":" << p.loss
             << ",\"smoothed_loss\":" << p.smoothed_loss << ",\"wall_s\":" << fmt(p.wall_seconds, 3)
             << "}\n";
      };
    }
    ScoreModelCheckpoint ck = train(data, cfg.sde, cfg.net, tc);
    save_checkpoint(ck, checkpoint_path(cfg, scale));
    os << "  " << scale << ": " << ck.meta.steps_run << " steps, final loss " << fmt(ck.meta.final_loss)
       << " -> " << checkpoint_path(cfg, scale).string() << "\n";
    trained.push_back(std::move(ck));
  }

  // Paired images enable the localization decoder.
  const bool has_images = std::all_of(normal.begin(), normal.end(), [](const auto* s) { return s->image.has_value(); });
  if (has_images) {
    DecoderConfig dc = cfg.decoder;
    if (dc.scales.empty()) dc.scales = {make_multiscale(std::move(trained)).largest_spatial_scale()};
    std::vector<DecoderSample> pairs;
    for (const auto* s : normal) {
      DecoderSample ds;
      for (const auto& scale : dc.scales) ds.features.push_back(load_sample_features(m, *s, scale));
      ds.image = read_image(m.resolve(*s->image));
      pairs.push_back(std::move(ds));
    }
    const DecoderTrainingResult r = train_decoder(pairs, dc);
    r.decoder.save(cfg.checkpoint_dir / "decoder.json");
    os << "  decoder: " << r.iterations_run << " iterations, train mse " << fmt(r.final_mse, 8) << " -> "
       << (cfg.checkpoint_dir / "decoder.json").string() << "\n";
  }
  return os.str();
}

std::string cmd_score(const RunConfig& cfg) {
  const DatasetManifest m = load_manifest(require_manifest(cfg.test_manifest, "test_manifest"));
  const std::vector<std::string> scales = active_scales(cfg, m);
  const MultiScaleModel models = load_models(cfg, scales);

  std::vector<AnomalyReport> reports(m.samples.size());
  std::vector<std::string> errors(m.samples.size());
  detail::parallel_for(m.samples.size(), cfg.threads, [&](std::size_t i) {
    const ManifestSample& s = m.samples[i];
    try {
      std::vector<FeatureTensor> feats;
      for (const auto& scale : scales) feats.push_back(load_sample_features(m, s, scale));
      ScoringConfig sc{cfg.solver, cfg.hutch};
      sc.hutch.seed = derive_seed(cfg.seed, s.id);
      reports[i] = score_sample(models, feats, sc, s.id);
      reports[i].label = s.label;
    } catch (const std::exception& e) {
      errors[i] = "sample '" + s.id + "': " + e.what();
    }
  });
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) {
      // Preserve the error category of the first failure.
      try {
        std::vector<FeatureTensor> feats;
        for (const auto& scale : scales) feats.push_back(load_sample_features(m, m.samples[i], scale));
      } catch (const DataError&) {
        throw DataError(errors[i]);
      }
      throw NumericalError(errors[i]);
    }
  }
  write_reports(cfg.report_path(), reports);
  double mean = 0.0;
  for (const auto& r : reports) mean += r.score;
  std::ostringstream os;
  os << "score: " << reports.size() << " samples, scales:";
  for (const auto& s : scales) os << " " << s;
  os << "\n  mean S = " << fmt(reports.empty() ? 0.0 : mean / static_cast<double>(reports.size()))
     << " bpd -> " << cfg.report_path().string() << "\n";
  return os.str();
}

namespace {

std::vector<std::vector<std::string>> default_subsets(const std::vector<AnomalyReport>& reports) {
  std::vector<std::vector<std::string>> subsets;
  if (reports.empty()) return subsets;
  std::vector<std::string> all;
  for (const auto& s : reports.front().scales) {
    subsets.push_back({s.scale});
    all.push_back(s.scale);
  }
  if (all.size() > 1) subsets.push_back(all);
  return subsets;
}

std::string ablation_table(const std::vector<AblationRow>& rows, std::ostream* csv) {
  std::ostringstream os;
  os << "  " << std::left << std::setw(32) << "scales" << "  AUROC     F1        ACC\n";
  if (csv != nullptr) *csv << "scales,auroc,f1,accuracy,threshold\n";
  for (const auto& r : rows) {
    std::string name;
    for (std::size_t i = 0; i < r.subset.size(); ++i) name += (i ? "+" : "") + r.subset[i];
    os << "  " << std::left << std::setw(32) << name << "  " << fmt(r.metrics.auroc, 4) << "    "
       << fmt(r.metrics.f1, 4) << "    " << fmt(r.metrics.accuracy, 4) << "\n";
    if (csv != nullptr) {
      *csv << name << ',' << std::setprecision(17) << r.metrics.auroc << ',' << r.metrics.f1 << ','
           << r.metrics.accuracy << ',' << r.metrics.threshold << '\n';
    }
  }
  return os.str();
}

std::vector<AnomalyReport> load_labeled_reports(const RunConfig& cfg) {
  std::vector<AnomalyReport> reports = read_reports(cfg.report_path());
  if (reports.empty()) throw DataError("report " + cfg.report_path().string() + " is empty");
  // Fill missing labels from the test manifest when one is configured.
  if (!cfg.test_manifest.empty() && std::filesystem::exists(cfg.test_manifest)) {
    const DatasetManifest m = load_manifest(cfg.test_manifest, false);
    for (auto& r : reports) {
      if (!r.label || *r.label == SampleLabel::kUnlabeled) {
        if (const ManifestSample* s = m.find(r.sample_id)) r.label = s->label;
      }
    }
  }
  for (const auto& r : reports) {
    if (!r.label || *r.label == SampleLabel::kUnlabeled) {
      throw ConfigError("eval: sample '" + r.sample_id + "' has no normal/abnormal label");
    }
  }
  return reports;
}

}  // namespace

std::string cmd_eval(const RunConfig& cfg) {
  const std::vector<AnomalyReport> reports = load_labeled_reports(cfg);
  const LabeledScores ls = labeled_scores(reports);
  const MetricSummary ms = summarize(ls);
  export_roc_hist(ls, cfg.output_dir / "eval");

  nlohmann::ordered_json j;
  j["n_normal"] = ms.n_normal;
  j["n_abnormal"] = ms.n_abnormal;
  j["auroc"] = ms.auroc;
  j["f1"] = ms.f1;
  j["threshold"] = ms.threshold;
  j["accuracy"] = ms.accuracy;
  std::ostringstream os;
  os << "eval: " << ms.n_normal << " normal, " << ms.n_abnormal << " abnormal\n"
     << "  AUROC " << fmt(ms.auroc, 4) << "  F1 " << fmt(ms.f1, 4) << "  ACC " << fmt(ms.accuracy, 4)
     << "  (threshold " << fmt(ms.threshold) << ")\n";
  if (cfg.eval_ablation) {
    const auto subsets = cfg.ablation_subsets.empty() ? default_subsets(reports) : cfg.ablation_subsets;
    const auto rows = scale_ablation(reports, subsets);
    j["ablation"] = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      j["ablation"].push_back({{"scales", r.subset}, {"auroc", r.metrics.auroc}, {"f1", r.metrics.f1},
                               {"accuracy", r.metrics.accuracy}});
    }
    os << "  ablation:\n" << ablation_table(rows, nullptr);
  }
  std::filesystem::create_directories(cfg.output_dir);
  std::ofstream(cfg.output_dir / "metrics.json") << j.dump(2) << '\n';
  os << "  -> " << (cfg.output_dir / "metrics.json").string() << ", eval_roc.csv, eval_hist.csv\n";
  return os.str();
}

std::string cmd_ablate(const RunConfig& cfg) {
  const std::vector<AnomalyReport> reports = load_labeled_reports(cfg);
  const auto subsets = cfg.ablation_subsets.empty() ? default_subsets(reports) : cfg.ablation_subsets;
  const auto rows = scale_ablation(reports, subsets);
  std::filesystem::create_directories(cfg.output_dir);
  std::ofstream csv(cfg.output_dir / "ablation.csv");
  std::ostringstream os;
  os << "ablate: " << reports.size() << " samples, " << rows.size() << " subsets\n" << ablation_table(rows, &csv);
  os << "  -> " << (cfg.output_dir / "ablation.csv").string() << "\n";
  return os.str();
}

std::string cmd_localize(const RunConfig& cfg) {
  const DatasetManifest m = load_manifest(require_manifest(cfg.test_manifest, "test_manifest"));
  if (cfg.localize_ids.empty()) throw ConfigError("localize: no sample ids given");
  const auto decoder_path = cfg.checkpoint_dir / "decoder.json";
  if (!std::filesystem::exists(decoder_path)) {
    throw DataError("localize: decoder not found at " + decoder_path.string() + " (train on a dataset with images)");
  }
  const LinearPatchDecoder decoder = LinearPatchDecoder::load(decoder_path);

  std::vector<std::string> scales = cfg.localize_scales;
  if (scales.empty()) scales = decoder.scales();
  const MultiScaleModel models = load_models(cfg, scales);
  const std::vector<double> t_starts =
      cfg.localize_t_starts.empty() ? std::vector<double>{cfg.sampler.t_start} : cfg.localize_t_starts;

  std::vector<const ManifestSample*> samples;
  for (const auto& id : cfg.localize_ids) {
    const ManifestSample* s = m.find(id);
    if (s == nullptr) throw DataError("localize: no sample with id '" + id + "' in " + cfg.test_manifest.string());
    if (!s->image) throw DataError("localize: sample '" + id + "' has no image");
    samples.push_back(s);
  }

  std::ostringstream os;
  os << "localize: " << samples.size() << " sample(s), t_start sweep:";
  for (double t : t_starts) os << " " << fmt(t, 2);
  os << "\n";
  const auto out_dir = cfg.output_dir / "localize";
  for (const auto* s : samples) {
    const Image image = read_image(m.resolve(*s->image));
    std::optional<Image> mask;
    if (s->mask) mask = read_image(m.resolve(*s->mask));
    for (double t : t_starts) {
      SamplerConfig sc = cfg.sampler;
      sc.t_start = t;
      std::ostringstream tag;
      tag << s->id << "_t" << std::fixed << std::setprecision(2) << t;
      Rng rng(derive_seed(cfg.seed, tag.str()));
      const LocalizationResult r = localize(models, decoder, image, cfg.synth.extractor_scales, sc, scales, rng);
      write_image(out_dir / (tag.str() + "_recon.adft"), r.reconstruction, "reconstruction");
      write_image(out_dir / (tag.str() + "_heatmap.adft"), r.heatmap, "heatmap");
      double mean = 0.0, peak = 0.0;
      for (float v : r.heatmap.pixels) {
        mean += v;
        peak = std::max(peak, static_cast<double>(v));
      }
      mean /= static_cast<double>(r.heatmap.pixels.size());
      os << "  " << tag.str() << ": mean " << fmt(mean) << ", max " << fmt(peak);
      if (mask) {
        double in = 0.0, out = 0.0;
        std::size_t n_in = 0, n_out = 0;
        for (std::size_t i = 0; i < mask->pixels.size(); ++i) {
          if (mask->pixels[i] > 0.5f) {
            in += r.heatmap.pixels[i];
            ++n_in;
          } else {
            out += r.heatmap.pixels[i];
            ++n_out;
          }
        }
        if (n_in > 0 && n_out > 0 && out > 0.0) {
          os << ", inside/outside " << fmt((in / static_cast<double>(n_in)) / (out / static_cast<double>(n_out)), 3);
        }
      }
      os << "\n";
    }
  }
  os << "  -> " << out_dir.string() << "\n";
  return os.str();
}

}  // namespace adode
