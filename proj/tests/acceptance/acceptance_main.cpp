// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails. Usage: acceptance [work_dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "../support.hpp"
#include "adode/anomaly_pipeline.hpp"
#include "adode/commands.hpp"
#include "adode/eval_metrics.hpp"
#include "adode/likelihood.hpp"
#include "adode/pc_sampler.hpp"
#include "adode/trainer.hpp"

using namespace adode;
using adode::testing::LinearScore;
using adode::testing::max_abs_diff;
using adode::testing::minus_identity_mlp;
using adode::testing::normal_vector;
using nlohmann::json;

namespace {

// Tolerances and budgets.
constexpr double kTransportTol = 1e-2;
constexpr double kTransportBudgetSeconds = 120.0;
constexpr double kIdentityFactor = 10.0;
constexpr double kHutchinsonRelTol = 0.01;
constexpr double kRademacherTol = 1e-10;
constexpr double kFidelityTolBits = 0.2;
constexpr double kFidelityBudgetSeconds = 600.0;
constexpr double kDetectionMinAuroc = 0.95;
constexpr double kMultiScaleSlack = 0.02;
constexpr double kSamplerMeanTol = 0.05;
constexpr double kSamplerVarTol = 0.1;
constexpr std::size_t kSamplerDim = 384;
constexpr std::size_t kSamplerSamples = 5000;
constexpr double kReconIdentityTol = 1e-3;
constexpr double kHeatmapMinRatio = 3.0;
constexpr double kGradRelTol = 1e-3;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[192];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json with_paths(json cfg, const std::filesystem::path& data, const std::filesystem::path& run) {
  cfg["paths"] = {{"train_manifest", (data / "train" / "manifest.json").string()},
                  {"test_manifest", (data / "test" / "manifest.json").string()},
                  {"checkpoint_dir", (run / "ckpt").string()},
                  {"output_dir", run.string()}};
  return cfg;
}

RunConfig parse(const json& file) { return parse_run_config(resolve_run_config(file, json::object())); }

// Synth writes under output_dir; point it at the data directory.
void synth_into(json cfg, const std::filesystem::path& data) {
  cfg["paths"]["output_dir"] = data.string();
  cmd_synth(parse(cfg));
}

// ---------------------------------------------------------------------------

Outcome gaussian_transport() {
  const auto t0 = Clock::now();
  const VpSdeConfig sde;
  double worst = 0.0;
  Rng rng(101);
  for (std::size_t d : {2u, 8u, 16u}) {
    const GaussianOracleScore oracle(sde, std::vector<double>(d, 0.0), 1.0);
    for (int k = 0; k < 100; ++k) {
      const std::vector<double> z = normal_vector(d, rng);
      HutchinsonConfig h;
      h.seed = rng.next_u64();
      const double ll = log_likelihood(oracle, sde, z, OdeSolverConfig{}, h).log_likelihood;
      worst = std::max(worst, std::abs(ll - prior_logpdf(z)));
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= kTransportTol && secs < kTransportBudgetSeconds,
          fmt("max |log p - closed form| = %.2e (tol %.0e), %.1f s", worst, kTransportTol, secs)};
}

Outcome identity_flow() {
  const VpSdeConfig sde;
  const OdeSolverConfig solver;
  double worst_ratio = 0.0;
  Rng rng(102);
  for (std::size_t d : {2u, 32u}) {
    const MlpScoreNetwork net = minus_identity_mlp(d);
    for (int k = 0; k < 100; ++k) {
      const std::vector<double> z = normal_vector(d, rng, 2.0);
      HutchinsonConfig h;
      h.seed = rng.next_u64();
      const double ll = log_likelihood(net, sde, z, solver, h).log_likelihood;
      const double prior = prior_logpdf(z);
      const double bound = kIdentityFactor * (solver.rtol * std::abs(prior) + solver.atol);
      worst_ratio = std::max(worst_ratio, std::abs(ll - prior) / bound);
    }
  }
  return {worst_ratio <= 1.0, fmt("worst error / bound = %.3f", worst_ratio)};
}

Outcome hutchinson() {
  const VpSdeConfig sde;
  const std::size_t d = 8;
  Rng rng(103);
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal() / std::sqrt(static_cast<double>(d));
  const LinearScore lin(a);
  const double t = 0.5;
  const double exact = -0.5 * beta(sde, t) * (static_cast<double>(d) + a.trace());
  const std::vector<double> z = normal_vector(d, rng);
  HutchinsonConfig g;
  g.probe_distribution = ProbeDistribution::kGaussian;
  g.n_probes = 10000;
  const std::vector<double> probes = draw_probes(g, d, rng);
  const double est = divergence_estimate(lin, sde, z, t, probes);
  const double rel = std::abs(est - exact) / std::abs(exact);

  Eigen::MatrixXd diag = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < d; ++i) diag(i, i) = rng.uniform(-3.0, 1.0);
  const LinearScore dlin(diag);
  const double dexact = -0.5 * beta(sde, t) * (static_cast<double>(d) + diag.trace());
  HutchinsonConfig r;
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const std::vector<double> p = draw_probes(r, d, rng);
    worst = std::max(worst, std::abs(divergence_estimate(dlin, sde, z, t, p) - dexact));
  }
  return {rel <= kHutchinsonRelTol && worst <= kRademacherTol,
          fmt("gaussian mean rel error %.4f (tol %.2f), rademacher max error %.1e", rel,
              kHutchinsonRelTol, worst)};
}

Outcome training_fidelity(const std::filesystem::path& work) {
  const auto t0 = Clock::now();
  const auto data = work / "fidelity" / "data";
  const auto run = work / "fidelity" / "run";
  // Default configuration; only the seed, the paths and the held-out size are set.
  json cfg = with_paths(json{{"seed", 2026}}, data, run);
  cfg["synth"] = {{"n_train", 5000}, {"n_test_normal", 2000}, {"n_test_abnormal", 0}};
  synth_into(cfg, data);
  const RunConfig rc = parse(cfg);
  cmd_train(rc);
  cmd_score(rc);
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& r : read_reports(rc.report_path())) {
    acc += r.score;
    ++n;
  }
  const double mean_bpd = acc / static_cast<double>(n);
  const double analytic = 0.5 * std::log2(2.0 * std::numbers::pi * std::numbers::e);
  const double secs = seconds_since(t0);
  return {std::abs(mean_bpd - analytic) <= kFidelityTolBits && secs < kFidelityBudgetSeconds,
          fmt("held-out bpd %.4f vs %.4f, ", mean_bpd, analytic) + fmt("%.0f s", secs)};
}

Outcome detection(const std::filesystem::path& work) {
  const auto data = work / "detection" / "data";
  const auto run = work / "detection" / "run";
  json cfg = with_paths(json{{"seed", 77}}, data, run);
  const json mean = {2.0, -2.0, 2.0, -2.0, 2.0, -2.0, 2.0, -2.0};
  json neg = mean;
  for (auto& v : neg) v = -v.get<double>();
  cfg["synth"] = {{"kind", "gaussian_mixture"},
                  {"n_train", 5000},
                  {"n_test_normal", 250},
                  {"n_test_abnormal", 250},
                  {"scales", {{{"label", "flat"}, {"h", 1}, {"w", 1}, {"c", 8}},
                              {{"label", "grid"}, {"h", 2}, {"w", 2}, {"c", 2}}}},
                  {"components", {{{"weight", 0.5}, {"mean", mean}, {"std", {1.0}}},
                                  {{"weight", 0.5}, {"mean", neg}, {"std", {1.0}}}}},
                  {"anomaly_shift", {2.5}}};
  synth_into(cfg, data);
  const RunConfig rc = parse(cfg);
  cmd_train(rc);
  cmd_score(rc);
  std::vector<AnomalyReport> reports = read_reports(rc.report_path());
  const std::vector<std::vector<std::string>> subsets{{"flat"}, {"grid"}, {"flat", "grid"}};
  const auto rows = scale_ablation(reports, subsets);
  const double best_single = std::max(rows[0].metrics.auroc, rows[1].metrics.auroc);
  const double multi = rows[2].metrics.auroc;
  return {multi >= kDetectionMinAuroc && multi >= best_single - kMultiScaleSlack,
          fmt("AUROC multi %.4f, flat %.4f, grid %.4f", multi, rows[0].metrics.auroc,
              rows[1].metrics.auroc)};
}

Outcome sampler_moments() {
  const VpSdeConfig sde;
  const SamplerConfig cfg;  // N = 500, r = 0.16
  const GaussianOracleScore oracle(sde, std::vector<double>(kSamplerDim, 0.0), 1.0);
  Rng rng(105);
  std::vector<double> sum(kSamplerDim, 0.0), sq(kSamplerDim, 0.0);
  for (std::size_t k = 0; k < kSamplerSamples; ++k) {
    const std::vector<double> z = denoise(oracle, sde, normal_vector(kSamplerDim, rng), sde.t_max, cfg, rng);
    for (std::size_t i = 0; i < kSamplerDim; ++i) {
      sum[i] += z[i];
      sq[i] += z[i] * z[i];
    }
  }
  double worst_mean = 0.0, worst_var = 0.0;
  const auto n = static_cast<double>(kSamplerSamples);
  for (std::size_t i = 0; i < kSamplerDim; ++i) {
    const double m = sum[i] / n;
    const double v = (sq[i] - n * m * m) / (n - 1.0);
    worst_mean = std::max(worst_mean, std::abs(m));
    worst_var = std::max(worst_var, std::abs(v - 1.0));
  }
  return {worst_mean < kSamplerMeanTol && worst_var <= kSamplerVarTol,
          fmt("d = %.0f, max |mean| %.4f, max |var - 1| %.4f", static_cast<double>(kSamplerDim),
              worst_mean, worst_var)};
}

Outcome reconstruction(const std::filesystem::path& work) {
  const auto data = work / "localization" / "data";
  const auto run = work / "localization" / "run";
  json cfg = with_paths(json{{"seed", 31}}, data, run);
  cfg["synth"] = {{"kind", "blob_images"}, {"n_train", 1000}, {"n_test_normal", 0}, {"n_test_abnormal", 20}};
  cfg["train"] = {{"steps", 1000}, {"learning_rate", 1e-3}};
  synth_into(cfg, data);
  const RunConfig rc = parse(cfg);
  cmd_train(rc);

  const DatasetManifest test = load_manifest(rc.test_manifest);
  const LinearPatchDecoder decoder = LinearPatchDecoder::load(rc.checkpoint_dir / "decoder.json");
  const std::vector<std::string> scales = decoder.scales();
  std::vector<ScoreModelCheckpoint> ckpts;
  for (const auto& s : scales) ckpts.push_back(load_checkpoint(checkpoint_path(rc, s)));
  const MultiScaleModel models = make_multiscale(ckpts);
  const ScoreModelCheckpoint& ck = models.at(scales.front());

  SamplerConfig identity = rc.sampler;
  identity.t_start = rc.sde.t_min;
  SamplerConfig noisy = rc.sampler;  // t_start 0.5
  double worst_delta = 0.0, inside = 0.0, outside = 0.0;
  std::size_t n_in = 0, n_out = 0;
  Rng rng(derive_seed(rc.seed, 1));
  for (const auto& s : test.samples) {
    const FeatureTensor f = load_sample_features(test, s, scales.front());
    const std::vector<double> z = ck.norm.normalize(std::span<const float>(f.values));
    worst_delta = std::max(worst_delta, max_abs_diff(reconstruct(ck.net, ck.sde, z, identity, rng), z));

    const Image image = read_image(test.resolve(*s.image));
    const Image mask = read_image(test.resolve(*s.mask));
    const LocalizationResult r =
        localize(models, decoder, image, rc.synth.extractor_scales, noisy, scales, rng);
    for (std::size_t i = 0; i < mask.pixels.size(); ++i) {
      if (mask.pixels[i] > 0.5f) {
        inside += r.heatmap.pixels[i];
        ++n_in;
      } else {
        outside += r.heatmap.pixels[i];
        ++n_out;
      }
    }
  }
  const double ratio = (inside / static_cast<double>(n_in)) / (outside / static_cast<double>(n_out));
  return {worst_delta <= kReconIdentityTol && ratio >= kHeatmapMinRatio,
          fmt("t_min max |delta| %.2e, inside/outside heatmap ratio %.2f at t_start %.2f", worst_delta,
              ratio, noisy.t_start)};
}

Outcome metric_oracles() {
  Rng rng(106);
  std::size_t mismatches = 0;
  for (int k = 0; k < 100; ++k) {
    LabeledScores d;
    const std::size_t n = 2 + rng.next_u64() % 19;
    for (std::size_t i = 0; i < n; ++i) {
      d.score.push_back(static_cast<double>(rng.next_u64() % 6) + 0.25 * static_cast<double>(rng.next_u64() % 3));
      d.label.push_back(static_cast<int>(rng.next_u64() % 2));
    }
    d.label[0] = 0;
    d.label[1] = 1;

    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (d.label[i] != 1 || d.label[j] != 0) continue;
        pairs += 1.0;
        wins += d.score[i] > d.score[j] ? 1.0 : d.score[i] == d.score[j] ? 0.5 : 0.0;
      }
    }
    if (auroc(d) != wins / pairs) ++mismatches;

    std::vector<double> s = d.score;
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    std::vector<double> cands{-std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i + 1 < s.size(); ++i) cands.push_back(0.5 * (s[i] + s[i + 1]));
    cands.push_back(std::numeric_limits<double>::infinity());
    double best = -1.0, best_thr = 0.0;
    for (double thr : cands) {
      std::size_t tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const bool pred = d.score[i] >= thr;
        tp += pred && d.label[i] == 1;
        fp += pred && d.label[i] == 0;
        fn += !pred && d.label[i] == 1;
      }
      const double f1 = tp == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
      if (f1 > best) {
        best = f1;
        best_thr = thr;
      }
    }
    const F1Result got = best_f1(d);
    if (got.f1 != best || got.threshold != best_thr) ++mismatches;
  }
  return {mismatches == 0, fmt("%.0f mismatches over 100 instances", static_cast<double>(mismatches))};
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

Outcome gradient_checks() {
  const VpSdeConfig sde;
  double worst_param = 0.0, worst_vjp = 0.0;
  for (ScoreHead head : {ScoreHead::kDirect, ScoreHead::kPriorResidual}) {
    MlpScoreConfig cfg;
    cfg.input_dim = 3;
    cfg.hidden_dims = {8, 6};
    cfg.time_embed_dim = 4;
    cfg.head = head;
    cfg.sde = sde;
    Rng init(107);
    MlpScoreNetwork net = MlpScoreNetwork::initialized(cfg, init);
    for (double& p : net.mutable_params()) p += 0.3 * init.uniform(-1.0, 1.0);
    Eigen::MatrixXd batch(3, 16);
    for (Eigen::Index i = 0; i < batch.size(); ++i) batch.data()[i] = init.normal();

    Rng r0(108);
    const std::vector<double> grad =
        dsm_loss_and_grad(net, sde, batch, LossWeighting::kSigmaSquared, r0).grad;
    const double delta = 1e-5;
    for (std::size_t p = 0; p < grad.size(); ++p) {
      const double saved = net.params()[p];
      net.mutable_params()[p] = saved + delta;
      Rng rp(108);
      const double lp = dsm_loss(net, sde, batch, LossWeighting::kSigmaSquared, rp);
      net.mutable_params()[p] = saved - delta;
      Rng rm(108);
      const double lm = dsm_loss(net, sde, batch, LossWeighting::kSigmaSquared, rm);
      net.mutable_params()[p] = saved;
      worst_param = std::max(worst_param, relative_error(grad[p], (lp - lm) / (2.0 * delta)));
    }

    Rng rng(109);
    for (int k = 0; k < 20; ++k) {
      const std::vector<double> z = normal_vector(3, rng);
      const std::vector<double> v = normal_vector(3, rng);
      const double t = rng.uniform(0.05, 1.0);
      std::vector<double> exact(3);
      net.vjp(z, t, v, exact);
      for (std::size_t j = 0; j < 3; ++j) {
        std::vector<double> zp = z, zm = z, sp(3), sm(3);
        zp[j] += 1e-5;
        zm[j] -= 1e-5;
        net.evaluate(zp, t, sp);
        net.evaluate(zm, t, sm);
        double fd = 0.0;
        for (std::size_t i = 0; i < 3; ++i) fd += v[i] * (sp[i] - sm[i]) / 2e-5;
        worst_vjp = std::max(worst_vjp, relative_error(exact[j], fd));
      }
    }
  }
  return {worst_param <= kGradRelTol && worst_vjp <= kGradRelTol,
          fmt("max relative error: parameters %.2e, input vjp %.2e", worst_param, worst_vjp)};
}

Outcome reproducibility(const std::filesystem::path& work) {
  const auto data = work / "repro" / "data";
  json base = json{{"seed", 5},
                   {"train", {{"steps", 500}}},
                   {"synth",
                    {{"kind", "gaussian_mixture"},
                     {"n_train", 1000},
                     {"n_test_normal", 50},
                     {"n_test_abnormal", 50},
                     {"scales", {{{"label", "a"}, {"h", 1}, {"w", 1}, {"c", 4}},
                                 {{"label", "b"}, {"h", 2}, {"w", 1}, {"c", 2}}}},
                     {"components", {{{"weight", 0.5}, {"mean", {1.0}}, {"std", {1.0}}},
                                     {{"weight", 0.5}, {"mean", {-1.0}}, {"std", {1.0}}}}},
                     {"anomaly_shift", {2.5}}}}};
  synth_into(with_paths(base, data, data), data);
  std::vector<std::string> blobs[2];
  for (int k = 0; k < 2; ++k) {
    const RunConfig rc = parse(with_paths(base, data, work / "repro" / ("run" + std::to_string(k))));
    cmd_train(rc);
    cmd_score(rc);
    blobs[k] = {slurp(checkpoint_path(rc, "a")), slurp(checkpoint_path(rc, "b")), slurp(rc.report_path())};
  }
  const bool same = blobs[0] == blobs[1] && !blobs[0][2].empty();
  return {same, same ? "checkpoints and report byte-identical" : "outputs differ between runs"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path work = argc > 1 ? argv[1] : "acceptance_work";
  std::filesystem::remove_all(work);
  std::filesystem::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gaussian transport", gaussian_transport},
      {"identity flow", identity_flow},
      {"hutchinson unbiasedness", hutchinson},
      {"training fidelity", [&] { return training_fidelity(work); }},
      {"detection", [&] { return detection(work); }},
      {"sampler moments", sampler_moments},
      {"reconstruction identity and localization", [&] { return reconstruction(work); }},
      {"metric oracles", metric_oracles},
      {"gradient checks", gradient_checks},
      {"reproducibility", [&] { return reproducibility(work); }},
  };

  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s  %-42s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
