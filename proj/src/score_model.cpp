// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

#include "adode/score_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "adode/error.hpp"

namespace adode {

void ScoreNetwork::evaluate_and_vjp(std::span<const double> z, double t,
                                    std::span<const double> probes, std::span<double> out,
                                    std::span<double> vjps) const {
  const std::size_t d = input_dim();
  evaluate(z, t, out);
  for (std::size_t k = 0; k * d < probes.size(); ++k) {
    vjp(z, t, probes.subspan(k * d, d), vjps.subspan(k * d, d));
  }
}

Eigen::MatrixXd ScoreNetwork::evaluate_batch(const Eigen::MatrixXd& z,
                                             std::span<const double> t) const {
  Eigen::MatrixXd out(z.rows(), z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    evaluate(std::span<const double>(z.col(j).data(), z.rows()), t[j],
             std::span<double>(out.col(j).data(), z.rows()));
  }
  return out;
}

void time_embedding(double t, std::span<double> out) {
  const std::size_t dim = out.size();
  if (dim == 0 || dim % 2 != 0) throw ConfigError("time_embedding: dimension must be even");
  const std::size_t half = dim / 2;
  const double log_base = std::log(10000.0);
  for (std::size_t k = 0; k < half; ++k) {
    const double freq =
        half > 1 ? std::exp(-static_cast<double>(k) * log_base / static_cast<double>(half - 1))
                 : 1.0;
    const double arg = kTimeEmbeddingScale * t * freq;
    out[2 * k] = std::sin(arg);
    out[2 * k + 1] = std::cos(arg);
  }
}

std::vector<double> time_embedding(double t, std::size_t dim) {
  std::vector<double> out(dim);
  time_embedding(t, out);
  return out;
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kSilu:
      return "silu";
    case Activation::kIdentity:
      return "identity";
  }
  return "unknown";
}

Activation activation_from_string(std::string_view name) {
  if (name == "silu") return Activation::kSilu;
  if (name == "identity") return Activation::kIdentity;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(ScoreHead s) {
  return s == ScoreHead::kDirect ? "direct" : "prior_residual";
}

ScoreHead score_head_from_string(std::string_view name) {
  if (name == "direct") return ScoreHead::kDirect;
  if (name == "prior_residual") return ScoreHead::kPriorResidual;
  throw ConfigError("unknown score head '" + std::string(name) + "'");
}

void MlpScoreConfig::validate() const {
  if (head == ScoreHead::kPriorResidual) sde.validate();
  if (input_dim < 1) throw ConfigError("mlp: input_dim must be >= 1");
  if (time_embed_dim < 2 || time_embed_dim % 2 != 0) {
    throw ConfigError("mlp: time_embed_dim must be even and >= 2");
  }
  for (std::size_t h : hidden_dims) {
    if (h < 1) throw ConfigError("mlp: hidden dims must be >= 1");
  }
}

std::size_t MlpScoreConfig::layer_in(std::size_t layer) const {
  return layer == 0 ? input_dim + time_embed_dim : hidden_dims[layer - 1];
}

std::size_t MlpScoreConfig::layer_out(std::size_t layer) const {
  return layer == hidden_dims.size() ? input_dim : hidden_dims[layer];
}

std::size_t MlpScoreConfig::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < num_layers(); ++l) n += (layer_in(l) + 1) * layer_out(l);
  return n;
}

MlpScoreNetwork::MlpScoreNetwork(MlpScoreConfig cfg)
    : MlpScoreNetwork(cfg, std::vector<double>(cfg.param_count(), 0.0)) {}

MlpScoreNetwork::MlpScoreNetwork(MlpScoreConfig cfg, std::vector<double> params)
    : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.validate();
  if (params_.size() != cfg_.param_count()) {
    std::ostringstream os;
    os << "mlp: expected " << cfg_.param_count() << " parameters, got " << params_.size();
    throw ConfigError(os.str());
  }
  std::size_t off = 0;
  for (std::size_t l = 0; l < cfg_.num_layers(); ++l) {
    offsets_.push_back(off);
    off += (cfg_.layer_in(l) + 1) * cfg_.layer_out(l);
  }
}

MlpScoreNetwork MlpScoreNetwork::initialized(MlpScoreConfig cfg, Rng& rng) {
  MlpScoreNetwork net(std::move(cfg));
  // The last layer stays zero so the initial score is 0.
  for (std::size_t l = 0; l + 1 < net.cfg_.num_layers(); ++l) {
    const double limit = std::sqrt(3.0 / static_cast<double>(net.cfg_.layer_in(l)));
    auto w = net.weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-limit, limit);
    }
  }
  return net;
}

Eigen::Map<Eigen::MatrixXd> MlpScoreNetwork::weight(std::size_t layer) {
  return {params_.data() + offset(layer), static_cast<Eigen::Index>(cfg_.layer_out(layer)),
          static_cast<Eigen::Index>(cfg_.layer_in(layer))};
}

Eigen::Map<Eigen::VectorXd> MlpScoreNetwork::bias(std::size_t layer) {
  return {params_.data() + offset(layer) + cfg_.layer_in(layer) * cfg_.layer_out(layer),
          static_cast<Eigen::Index>(cfg_.layer_out(layer))};
}

Eigen::Map<const Eigen::MatrixXd> MlpScoreNetwork::weight(std::size_t layer) const {
  return {params_.data() + offset(layer), static_cast<Eigen::Index>(cfg_.layer_out(layer)),
          static_cast<Eigen::Index>(cfg_.layer_in(layer))};
}

Eigen::Map<const Eigen::VectorXd> MlpScoreNetwork::bias(std::size_t layer) const {
  return {params_.data() + offset(layer) + cfg_.layer_in(layer) * cfg_.layer_out(layer),
          static_cast<Eigen::Index>(cfg_.layer_out(layer))};
}

namespace {

void activate(Activation a, const Eigen::MatrixXd& pre, Eigen::MatrixXd& out) {
  switch (a) {
    case Activation::kSilu:
      out = pre.array() / (1.0 + (-pre.array()).exp());
      break;
    case Activation::kIdentity:
      out = pre;
      break;
  }
}

Eigen::MatrixXd activation_grad(Activation a, const Eigen::MatrixXd& pre) {
  switch (a) {
    case Activation::kSilu: {
      const Eigen::ArrayXXd sig = 1.0 / (1.0 + (-pre.array()).exp());
      return (sig * (1.0 + pre.array() * (1.0 - sig))).matrix();
    }
    case Activation::kIdentity:
      break;
  }
  return Eigen::MatrixXd::Ones(pre.rows(), pre.cols());
}

}  // namespace

Eigen::MatrixXd MlpScoreNetwork::forward(const Eigen::MatrixXd& z, std::span<const double> t,
                                         Cache* cache) const {
  const auto d = static_cast<Eigen::Index>(cfg_.input_dim);
  const auto e = static_cast<Eigen::Index>(cfg_.time_embed_dim);
  if (z.rows() != d || t.size() != static_cast<std::size_t>(z.cols())) {
    throw ConfigError("mlp: input shape mismatch");
  }
  Eigen::MatrixXd x(d + e, z.cols());
  x.topRows(d) = z;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    time_embedding(t[j], std::span<double>(x.col(j).data() + d, static_cast<std::size_t>(e)));
  }
  if (cache != nullptr) {
    cache->inputs.clear();
    cache->pre_activations.clear();
  }
  const std::size_t n_layers = cfg_.num_layers();
  for (std::size_t l = 0; l + 1 < n_layers; ++l) {
    Eigen::MatrixXd pre = weight(l) * x;
    pre.colwise() += bias(l);
    Eigen::MatrixXd next;
    activate(cfg_.activation, pre, next);
    if (cache != nullptr) {
      cache->inputs.push_back(std::move(x));
      cache->pre_activations.push_back(std::move(pre));
    }
    x = std::move(next);
  }
  Eigen::MatrixXd out = weight(n_layers - 1) * x;
  out.colwise() += bias(n_layers - 1);
  Eigen::RowVectorXd scale = Eigen::RowVectorXd::Ones(z.cols());
  if (cfg_.head == ScoreHead::kPriorResidual) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) scale[j] = 1.0 / perturb_params(cfg_.sde, t[j]).std;
    out.array().rowwise() *= scale.array();
    out -= z;
  }
  if (cache != nullptr) {
    cache->inputs.push_back(std::move(x));
    cache->output_scale = std::move(scale);
  }
  return out;
}

Eigen::MatrixXd MlpScoreNetwork::backward(const Cache& cache, const Eigen::MatrixXd& out_grad,
                                          std::span<double> param_grad) const {
  const std::size_t n_layers = cfg_.num_layers();
  const Eigen::Index batch = cache.inputs.front().cols();
  // A single cached column may be shared by several upstream gradients
  // (one per Hutchinson probe); parameter gradients need matching columns.
  const bool broadcast = batch == 1 && out_grad.cols() > 1;
  if (!param_grad.empty() && (broadcast || out_grad.cols() != batch)) {
    throw ConfigError("mlp: parameter gradient requires one upstream column per sample");
  }
  if (!param_grad.empty() && param_grad.size() != params_.size()) {
    throw ConfigError("mlp: parameter gradient buffer has wrong size");
  }
  Eigen::MatrixXd g = out_grad;
  if (broadcast) {
    g *= cache.output_scale[0];
  } else {
    g.array().rowwise() *= cache.output_scale.array();
  }
  for (std::size_t l = n_layers; l-- > 0;) {
    const Eigen::MatrixXd& in = cache.inputs[l];
    if (!param_grad.empty()) {
      const auto rows = static_cast<Eigen::Index>(cfg_.layer_out(l));
      const auto cols = static_cast<Eigen::Index>(cfg_.layer_in(l));
      Eigen::Map<Eigen::MatrixXd> dw(param_grad.data() + offset(l), rows, cols);
      Eigen::Map<Eigen::VectorXd> db(param_grad.data() + offset(l) + rows * cols, rows);
      dw.noalias() += g * in.transpose();
      db += g.rowwise().sum();
    }
    Eigen::MatrixXd g_in = weight(l).transpose() * g;
    if (l == 0) {
      Eigen::MatrixXd dz = g_in.topRows(static_cast<Eigen::Index>(cfg_.input_dim));
      if (cfg_.head == ScoreHead::kPriorResidual) dz -= out_grad;
      return dz;
    }
    const Eigen::MatrixXd deriv = activation_grad(cfg_.activation, cache.pre_activations[l - 1]);
    if (broadcast) {
      g_in.array().colwise() *= deriv.col(0).array();
    } else {
      g_in.array() *= deriv.array();
    }
    g = std::move(g_in);
  }
  return g;  // unreachable: the loop returns at l == 0
}

void MlpScoreNetwork::evaluate(std::span<const double> z, double t,
                               std::span<double> out) const {
  const auto d = static_cast<Eigen::Index>(cfg_.input_dim);
  if (z.size() != cfg_.input_dim || out.size() != cfg_.input_dim) {
    throw ConfigError("mlp: evaluate dimension mismatch");
  }
  const Eigen::MatrixXd zin = Eigen::Map<const Eigen::MatrixXd>(z.data(), d, 1);
  const double tt[1] = {t};
  const Eigen::MatrixXd y = forward(zin, tt, nullptr);
  std::copy(y.data(), y.data() + d, out.begin());
}

void MlpScoreNetwork::vjp(std::span<const double> z, double t, std::span<const double> v,
                          std::span<double> out) const {
  std::vector<double> scratch(cfg_.input_dim);
  evaluate_and_vjp(z, t, v, scratch, out);
}

void MlpScoreNetwork::evaluate_and_vjp(std::span<const double> z, double t,
                                       std::span<const double> probes, std::span<double> out,
                                       std::span<double> vjps) const {
  const auto d = static_cast<Eigen::Index>(cfg_.input_dim);
  if (z.size() != cfg_.input_dim || out.size() != cfg_.input_dim ||
      probes.size() % cfg_.input_dim != 0 || vjps.size() != probes.size()) {
    throw ConfigError("mlp: vjp dimension mismatch");
  }
  const auto k = static_cast<Eigen::Index>(probes.size() / cfg_.input_dim);
  const Eigen::MatrixXd zin = Eigen::Map<const Eigen::MatrixXd>(z.data(), d, 1);
  const double tt[1] = {t};
  Cache cache;
  const Eigen::MatrixXd y = forward(zin, tt, &cache);
  std::copy(y.data(), y.data() + d, out.begin());
  if (k == 0) return;
  const Eigen::MatrixXd v = Eigen::Map<const Eigen::MatrixXd>(probes.data(), d, k);
  const Eigen::MatrixXd g = backward(cache, v, {});
  std::copy(g.data(), g.data() + d * k, vjps.begin());
}

Eigen::MatrixXd MlpScoreNetwork::evaluate_batch(const Eigen::MatrixXd& z,
                                                std::span<const double> t) const {
  return forward(z, t, nullptr);
}

std::vector<double> mlp_param_grad(const MlpScoreNetwork& net, const Eigen::MatrixXd& z,
                                   std::span<const double> t, const Eigen::MatrixXd& out_grad) {
  MlpScoreNetwork::Cache cache;
  net.forward(z, t, &cache);
  std::vector<double> grad(net.params().size(), 0.0);
  net.backward(cache, out_grad, grad);
  return grad;
}

GaussianOracleScore::GaussianOracleScore(VpSdeConfig sde, std::vector<double> data_mean,
                                         double data_std)
    : sde_(sde), mean_(std::move(data_mean)), std_(data_std) {
  if (!(std_ > 0.0)) throw ConfigError("gaussian oracle: data_std must be positive");
}

void GaussianOracleScore::evaluate(std::span<const double> z, double t,
                                   std::span<double> out) const {
  analytic_gaussian_score(sde_, z, t, mean_, std_, out);
}

void GaussianOracleScore::vjp(std::span<const double> /*z*/, double t,
                              std::span<const double> v, std::span<double> out) const {
  // Jacobian is -I / marginal variance.
  const PerturbParams p = perturb_params(sde_, t);
  const double var = p.mean_coeff * p.mean_coeff * std_ * std_ + p.std * p.std;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = -v[i] / var;
}

void finite_difference_vjp(const ScoreNetwork& net, std::span<const double> z, double t,
                           std::span<const double> v, std::span<double> out) {
  const std::size_t d = z.size();
  double zmax = 0.0;
  for (double x : z) zmax = std::max(zmax, std::abs(x));
  const double h = 1e-3 * (1.0 + zmax);
  std::vector<double> zp(z.begin(), z.end());
  std::vector<double> sp(d), sm(d);
  for (std::size_t j = 0; j < d; ++j) {
    zp[j] = z[j] + h;
    net.evaluate(zp, t, sp);
    zp[j] = z[j] - h;
    net.evaluate(zp, t, sm);
    zp[j] = z[j];
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) acc += v[i] * (sp[i] - sm[i]);
    out[j] = acc / (2.0 * h);
  }
}

}  // namespace adode
