// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <vector>

#include "adode/error.hpp"
#include "adode/feature_store.hpp"
#include "adode/likelihood.hpp"
#include "adode/trainer.hpp"
#include "support.hpp"

using namespace adode;
using adode::testing::normal_vector;
using adode::testing::zero_score;

namespace {

FeatureTensor tensor(std::vector<float> v, std::size_t c = 1) {
  return FeatureTensor{"s", 1, v.size() / c, c, std::move(v)};
}

std::vector<FeatureTensor> gaussian_dataset(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<FeatureTensor> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> v(d);
    for (float& x : v) x = static_cast<float>(rng.normal());
    out.push_back(FeatureTensor{"g", 1, 1, d, std::move(v)});
  }
  return out;
}

Eigen::MatrixXd random_batch(std::size_t d, std::size_t n, Rng& rng) {
  Eigen::MatrixXd b(d, n);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
  return b;
}

MlpScoreConfig small_net() {
  MlpScoreConfig cfg;
  cfg.hidden_dims = {64, 64};
  cfg.time_embed_dim = 16;
  return cfg;
}

}  // namespace

TEST_CASE("fit_norm_stats") {
  SUBCASE("all-zero data hits the floor") {
    const std::vector<FeatureTensor> data{tensor({0, 0}), tensor({0, 0})};
    const NormStats s = fit_norm_stats(data);
    CHECK(s.mean[0] == 0.0);
    CHECK(s.std[0] == NormStats::kStdFloor);
  }
  SUBCASE("population std") {
    const std::vector<FeatureTensor> data{tensor({1}), tensor({3})};
    const NormStats s = fit_norm_stats(data);
    CHECK(s.mean[0] == 2.0);
    CHECK(s.std[0] == 1.0);
  }
  SUBCASE("standardized training data has zero mean and unit std per channel") {
    Rng rng(1);
    std::vector<FeatureTensor> data;
    for (int i = 0; i < 50; ++i) {
      std::vector<float> v(2 * 2 * 3);
      for (std::size_t k = 0; k < v.size(); ++k) v[k] = static_cast<float>(5.0 * (k % 3) + (k % 3 + 1) * rng.normal());
      data.push_back(FeatureTensor{"s", 2, 2, 3, v});
    }
    const NormStats s = fit_norm_stats(data);
    std::vector<double> sum(3, 0.0), sq(3, 0.0);
    double n = 0.0;
    for (const auto& f : data) {
      const std::vector<double> z = s.normalize(std::span<const float>(f.values));
      for (std::size_t k = 0; k < z.size(); ++k) {
        sum[k % 3] += z[k];
        sq[k % 3] += z[k] * z[k];
      }
      n += 4.0;
    }
    for (int c = 0; c < 3; ++c) {
      CHECK(std::abs(sum[c] / n) <= 1e-6);
      CHECK(std::abs(std::sqrt(sq[c] / n) - 1.0) <= 1e-6);
    }
  }
  SUBCASE("denormalize inverts normalize") {
    const NormStats s{{1.0, -2.0}, {0.5, 3.0}};
    const std::vector<double> raw{4.0, 1.0, -1.0, 0.0};
    const std::vector<double> back = s.denormalize(s.normalize(std::span<const double>(raw)));
    for (int i = 0; i < 4; ++i) CHECK(back[i] == doctest::Approx(raw[i]));
    CHECK(s.log_abs_det(4) == doctest::Approx(2.0 * (std::log(0.5) + std::log(3.0))));
  }
  SUBCASE("empty or ragged input") {
    CHECK_THROWS_AS(fit_norm_stats({}), DataError);
    const std::vector<FeatureTensor> ragged{tensor({1, 2}), tensor({1, 2, 3})};
    CHECK_THROWS_AS(fit_norm_stats(ragged), DataError);
  }
}

TEST_CASE("dsm loss") {
  const VpSdeConfig sde;
  Rng rng(2);
  const Eigen::MatrixXd batch = random_batch(8, 1024, rng);
  SUBCASE("zero network loss is about the dimension") {
    Rng r(3);
    const double loss = dsm_loss(zero_score(8), sde, batch, LossWeighting::kSigmaSquared, r);
    CHECK(std::abs(loss - 8.0) <= 0.8);
  }
  SUBCASE("matching oracle beats the zero network and perturbed oracles") {
    const GaussianOracleScore oracle(sde, std::vector<double>(8, 0.0), 1.0);
    Rng a(4), b(4), c(4);
    const double oracle_loss = dsm_loss(oracle, sde, batch, LossWeighting::kSigmaSquared, a);
    const double zero_loss = dsm_loss(zero_score(8), sde, batch, LossWeighting::kSigmaSquared, b);
    CHECK(oracle_loss < zero_loss);
    Rng dir_rng(5);
    const std::vector<double> dir = normal_vector(8, dir_rng);
    const FunctionScore perturbed(8, [&](std::span<const double> z, double t, std::span<double> out) {
      oracle.evaluate(z, t, out);
      for (int i = 0; i < 8; ++i) out[i] += 0.1 * dir[i];
    });
    CHECK(oracle_loss <= dsm_loss(perturbed, sde, batch, LossWeighting::kSigmaSquared, c));
  }
  SUBCASE("invariant to sample order") {
    std::vector<Eigen::Index> perm(batch.cols());
    for (Eigen::Index i = 0; i < batch.cols(); ++i) perm[i] = batch.cols() - 1 - i;
    Eigen::MatrixXd shuffled(batch.rows(), batch.cols());
    for (Eigen::Index i = 0; i < batch.cols(); ++i) shuffled.col(i) = batch.col(perm[i]);
    MlpScoreConfig cfg = small_net();
    cfg.input_dim = 8;
    cfg.sde = sde;
    Rng init(6);
    const MlpScoreNetwork net = MlpScoreNetwork::initialized(cfg, init);
    Rng a(7), b(7);
    const double la = dsm_loss_and_grad(net, sde, batch, LossWeighting::kSigmaSquared, a).loss;
    const double lb = dsm_loss_and_grad(net, sde, shuffled, LossWeighting::kSigmaSquared, b).loss;
    CHECK(la == doctest::Approx(lb).epsilon(1e-12));
  }
  SUBCASE("dsm_loss agrees with dsm_loss_and_grad") {
    MlpScoreConfig cfg = small_net();
    cfg.input_dim = 8;
    cfg.sde = sde;
    Rng init(8);
    const MlpScoreNetwork net = MlpScoreNetwork::initialized(cfg, init);
    for (LossWeighting w : {LossWeighting::kSigmaSquared, LossWeighting::kUnit}) {
      Rng a(9), b(9);
      CHECK(dsm_loss(net, sde, batch, w, a) ==
            doctest::Approx(dsm_loss_and_grad(net, sde, batch, w, b).loss).epsilon(1e-12));
    }
  }
}

TEST_CASE("dsm parameter gradient matches central differences on a tiny net") {
  const VpSdeConfig sde;
  for (ScoreHead head : {ScoreHead::kDirect, ScoreHead::kPriorResidual}) {
    for (LossWeighting w : {LossWeighting::kSigmaSquared, LossWeighting::kUnit}) {
      MlpScoreConfig cfg;
      cfg.input_dim = 3;
      cfg.hidden_dims = {8};
      cfg.time_embed_dim = 4;
      cfg.head = head;
      cfg.sde = sde;
      CHECK(cfg.param_count() <= 200);
      Rng init(10);
      MlpScoreNetwork net = MlpScoreNetwork::initialized(cfg, init);
      for (double& p : net.mutable_params()) p += 0.3 * init.uniform(-1.0, 1.0);
      Rng data_rng(11);
      const Eigen::MatrixXd batch = random_batch(3, 16, data_rng);
      Rng r0(12);
      const std::vector<double> grad = dsm_loss_and_grad(net, sde, batch, w, r0).grad;
      const double delta = 1e-5;
      for (std::size_t p = 0; p < grad.size(); ++p) {
        const double saved = net.params()[p];
        net.mutable_params()[p] = saved + delta;
        Rng rp(12);
        const double lp = dsm_loss_and_grad(net, sde, batch, w, rp).loss;
        net.mutable_params()[p] = saved - delta;
        Rng rm(12);
        const double lm = dsm_loss_and_grad(net, sde, batch, w, rm).loss;
        net.mutable_params()[p] = saved;
        const double fd = (lp - lm) / (2.0 * delta);
        CHECK(std::abs(grad[p] - fd) <= 1e-3 * std::max(std::abs(fd), 1e-2));
      }
    }
  }
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    AdamState adam(3);
    std::vector<double> p{1.0, 2.0, 3.0};
    adam.step(p, std::vector<double>(3, 0.0), 1e-3);
    CHECK(p == std::vector<double>{1.0, 2.0, 3.0});
  }
  SUBCASE("first step moves by lr against the gradient sign") {
    AdamState adam(3);
    std::vector<double> p{0.0, 0.0, 0.0};
    adam.step(p, std::vector<double>{5.0, -0.01, 300.0}, 1e-2);
    CHECK(p[0] == doctest::Approx(-1e-2).epsilon(1e-5));
    CHECK(p[1] == doctest::Approx(1e-2).epsilon(1e-5));
    CHECK(p[2] == doctest::Approx(-1e-2).epsilon(1e-5));
  }
  SUBCASE("steps reduce a quadratic monotonically") {
    AdamState adam(2);
    std::vector<double> p{3.0, -2.0};
    auto loss = [&] { return p[0] * p[0] + 4.0 * p[1] * p[1]; };
    double prev = loss();
    for (int k = 0; k < 20; ++k) {
      adam.step(p, std::vector<double>{2.0 * p[0], 8.0 * p[1]}, 0.05);
      CHECK(loss() < prev);
      prev = loss();
    }
  }
  SUBCASE("non-finite gradient names the step") {
    AdamState adam(1);
    std::vector<double> p{0.0};
    adam.step(p, std::vector<double>{1.0}, 1e-3);
    try {
      adam.step(p, std::vector<double>{NAN}, 1e-3);
      FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find('2') != std::string::npos);
    }
  }
}

TEST_CASE("train on 2-d standard normal data") {
  const VpSdeConfig sde;
  const std::vector<FeatureTensor> data = gaussian_dataset(5000, 2, 13);
  TrainConfig tc;
  tc.steps = 2000;
  tc.seed = 14;
  tc.log_every = 100;
  std::vector<double> smoothed;
  tc.on_progress = [&](const TrainProgress& p) { smoothed.push_back(p.smoothed_loss); };
  const ScoreModelCheckpoint ck = train(data, sde, MlpScoreConfig{}, tc);
  CHECK(ck.meta.steps_run == 2000);
  CHECK(smoothed.size() == 20);
  for (std::size_t k = 1; k < smoothed.size(); ++k) {
    const double best = *std::min_element(smoothed.begin(), smoothed.begin() + static_cast<std::ptrdiff_t>(k));
    CHECK(smoothed[k] <= 1.2 * best);
  }
  for (double p : ck.net.params()) REQUIRE(std::isfinite(p));

  // Held-out bits per dimension in raw space against the analytic entropy.
  const std::vector<FeatureTensor> test = gaussian_dataset(200, 2, 15);
  std::vector<std::vector<double>> zs;
  for (const auto& f : test) zs.push_back(ck.norm.normalize(std::span<const float>(f.values)));
  HutchinsonConfig hutch;
  hutch.seed = 16;
  const auto results = batch_log_likelihood(ck.net, sde, zs, OdeSolverConfig{}, hutch);
  double mean_bpd = 0.0;
  for (const auto& r : results) {
    REQUIRE(r.result.has_value());
    const double ll = r.result->log_likelihood - ck.norm.log_abs_det(2);
    mean_bpd += bpd(ll, 2) / static_cast<double>(results.size());
  }
  CHECK(std::abs(mean_bpd - 0.5 * std::log2(2.0 * std::numbers::pi * std::numbers::e)) <= 0.2);
}

TEST_CASE("train is reproducible and zero steps keep the initialization") {
  const VpSdeConfig sde;
  const std::vector<FeatureTensor> data = gaussian_dataset(300, 3, 17);
  TrainConfig tc;
  tc.steps = 30;
  tc.batch_size = 64;
  tc.seed = 18;
  const ScoreModelCheckpoint a = train(data, sde, small_net(), tc);
  const ScoreModelCheckpoint b = train(data, sde, small_net(), tc);
  CHECK(encode_checkpoint(a) == encode_checkpoint(b));
  tc.seed = 19;
  CHECK(encode_checkpoint(a) != encode_checkpoint(train(data, sde, small_net(), tc)));

  TrainConfig none;
  none.epochs = 0;
  none.seed = 18;
  const ScoreModelCheckpoint init = train(data, sde, small_net(), none);
  CHECK(init.meta.steps_run == 0);
  const std::vector<double> z{0.1, 0.2, 0.3};
  const LikelihoodResult r = log_likelihood(init.net, sde, z, OdeSolverConfig{}, HutchinsonConfig{});
  CHECK(std::isfinite(r.log_likelihood));
  // Zero output layer and the residual head: the prior score, hence the prior density.
  CHECK(r.log_likelihood == doctest::Approx(prior_logpdf(z)).epsilon(1e-4));
}

TEST_CASE("checkpoint round trip and format errors") {
  const VpSdeConfig sde;
  const std::vector<FeatureTensor> data = gaussian_dataset(200, 4, 20);
  TrainConfig tc;
  tc.steps = 20;
  tc.batch_size = 32;
  tc.seed = 21;
  const ScoreModelCheckpoint ck = train(data, sde, small_net(), tc);
  const auto path = std::filesystem::temp_directory_path() / "adode_test_ckpt.ckpt";
  save_checkpoint(ck, path);
  const ScoreModelCheckpoint back = load_checkpoint(path);
  std::filesystem::remove(path);

  CHECK(back.scale == ck.scale);
  CHECK(back.norm.mean == ck.norm.mean);
  CHECK(back.norm.std == ck.norm.std);
  CHECK(back.meta.steps_run == ck.meta.steps_run);
  CHECK(back.meta.final_loss == ck.meta.final_loss);
  CHECK(back.net.config().head == ck.net.config().head);
  Rng rng(22);
  for (int k = 0; k < 100; ++k) {
    const std::vector<double> z = normal_vector(4, rng);
    const double t = rng.uniform(sde.t_min, 1.0);
    std::vector<double> a(4), b(4);
    ck.net.evaluate(z, t, a);
    back.net.evaluate(z, t, b);
    CHECK(a == b);
  }

  const std::vector<std::uint8_t> bytes = encode_checkpoint(ck);
  SUBCASE("bad magic") {
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(bad), DataError);
  }
  SUBCASE("version bump") {
    auto bad = bytes;
    bad[8] = 2;
    try {
      decode_checkpoint(bad);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("version 2") != std::string::npos);
    }
  }
  SUBCASE("truncated parameters") {
    auto bad = bytes;
    bad.resize(bad.size() - 3);
    CHECK_THROWS_AS(decode_checkpoint(bad), DataError);
  }
  SUBCASE("truncated header") {
    auto bad = bytes;
    bad.resize(20);
    CHECK_THROWS_AS(decode_checkpoint(bad), DataError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/x.ckpt"), DataError);
  }
}

TEST_CASE("train config validation") {
  TrainConfig tc;
  tc.learning_rate = 0.0;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
  tc = TrainConfig{};
  tc.batch_size = 0;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
  CHECK(loss_weighting_from_string("unit") == LossWeighting::kUnit);
  CHECK_THROWS_AS(loss_weighting_from_string("cubic"), ConfigError);
}
