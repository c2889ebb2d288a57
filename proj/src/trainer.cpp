// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

#include "adode/trainer.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "adode/error.hpp"

namespace adode {

std::string_view to_string(LossWeighting w) {
  return w == LossWeighting::kSigmaSquared ? "sigma_squared" : "unit";
}

LossWeighting loss_weighting_from_string(std::string_view s) {
  if (s == "sigma_squared") return LossWeighting::kSigmaSquared;
  if (s == "unit") return LossWeighting::kUnit;
  throw ConfigError("unknown loss weighting '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
}

// --- normalization ----------------------------------------------------------

std::vector<double> NormStats::normalize(std::span<const float> raw) const {
  std::vector<double> tmp(raw.begin(), raw.end());
  return normalize(std::span<const double>(tmp));
}

std::vector<double> NormStats::normalize(std::span<const double> raw) const {
  const std::size_t c = channels();
  if (c == 0 || raw.size() % c != 0) throw DataError("normalize: value count not a multiple of channels");
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - mean[i % c]) / std[i % c];
  return out;
}

std::vector<double> NormStats::denormalize(std::span<const double> z) const {
  const std::size_t c = channels();
  if (c == 0 || z.size() % c != 0) throw DataError("denormalize: value count not a multiple of channels");
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] * std[i % c] + mean[i % c];
  return out;
}

double NormStats::log_abs_det(std::size_t n_values) const {
  const std::size_t c = channels();
  double per_site = 0.0;
  for (double s : std) per_site += std::log(s);
  return static_cast<double>(n_values / c) * per_site;
}

NormStats fit_norm_stats(std::span<const FeatureTensor> train_features) {
  if (train_features.empty()) throw DataError("fit_norm_stats: empty training set");
  const ScaleDescriptor ref = train_features.front().descriptor();
  const std::size_t c = ref.c;
  if (c == 0) throw DataError("fit_norm_stats: zero channels");
  std::vector<double> sum(c, 0.0), sq(c, 0.0);
  std::size_t count = 0;
  for (const auto& t : train_features) {
    if (t.h != ref.h || t.w != ref.w || t.c != ref.c) {
      throw DataError("fit_norm_stats: samples have different dimensions");
    }
    t.validate();
    for (std::size_t i = 0; i < t.values.size(); ++i) sum[i % c] += t.values[i];
    count += t.h * t.w;
  }
  NormStats ns;
  ns.mean.resize(c);
  for (std::size_t k = 0; k < c; ++k) ns.mean[k] = sum[k] / static_cast<double>(count);
  // Second pass for a stable variance.
  for (const auto& t : train_features) {
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      const double dv = t.values[i] - ns.mean[i % c];
      sq[i % c] += dv * dv;
    }
  }
  ns.std.resize(c);
  for (std::size_t k = 0; k < c; ++k) {
    ns.std[k] = std::max(std::sqrt(sq[k] / static_cast<double>(count)), NormStats::kStdFloor);
  }
  return ns;
}

// --- denoising score matching -----------------------------------------------

DsmDraw draw_dsm_inputs(const VpSdeConfig& sde, const Eigen::MatrixXd& batch, Rng& rng) {
  const Eigen::Index d = batch.rows();
  const Eigen::Index n = batch.cols();
  const std::uint64_t step_seed = rng.next_u64();
  DsmDraw draw{Eigen::MatrixXd(d, n), Eigen::MatrixXd(d, n), std::vector<double>(n),
               std::vector<double>(n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    const std::string_view bytes(reinterpret_cast<const char*>(batch.col(j).data()),
                                 static_cast<std::size_t>(d) * sizeof(double));
    Rng srng(derive_seed(step_seed, bytes));
    const double t = srng.uniform(sde.t_min, sde.t_max);
    const PerturbParams p = perturb_params(sde, t);
    draw.t[j] = t;
    draw.sigma[j] = p.std;
    for (Eigen::Index i = 0; i < d; ++i) {
      const double e = srng.normal();
      draw.noise(i, j) = e;
      draw.z_t(i, j) = p.mean_coeff * batch(i, j) + p.std * e;
    }
  }
  return draw;
}

namespace {

// Residual r_j with loss_j = |r_j|^2 and d loss_j / d s_j = 2 (dr/ds) r_j.
Eigen::MatrixXd residual(const Eigen::MatrixXd& score, const DsmDraw& draw,
                         LossWeighting weighting) {
  Eigen::MatrixXd r(score.rows(), score.cols());
  for (Eigen::Index j = 0; j < score.cols(); ++j) {
    const double s = draw.sigma[j];
    if (weighting == LossWeighting::kSigmaSquared) {
      r.col(j) = s * score.col(j) + draw.noise.col(j);
    } else {
      r.col(j) = score.col(j) + draw.noise.col(j) / s;
    }
  }
  return r;
}

double mean_sq_norm(const Eigen::MatrixXd& r) {
  // Column norms summed in index order keep the reduction deterministic.
  double acc = 0.0;
  for (Eigen::Index j = 0; j < r.cols(); ++j) acc += r.col(j).squaredNorm();
  return acc / static_cast<double>(r.cols());
}

}  // namespace

double dsm_loss(const ScoreNetwork& model, const VpSdeConfig& sde, const Eigen::MatrixXd& batch,
                LossWeighting weighting, Rng& rng) {
  if (batch.cols() == 0) throw DataError("dsm_loss: empty batch");
  const DsmDraw draw = draw_dsm_inputs(sde, batch, rng);
  const Eigen::MatrixXd score = model.evaluate_batch(draw.z_t, draw.t);
  return mean_sq_norm(residual(score, draw, weighting));
}

LossAndGrad dsm_loss_and_grad(const MlpScoreNetwork& model, const VpSdeConfig& sde,
                              const Eigen::MatrixXd& batch, LossWeighting weighting, Rng& rng) {
  if (batch.cols() == 0) throw DataError("dsm_loss: empty batch");
  const DsmDraw draw = draw_dsm_inputs(sde, batch, rng);
  MlpScoreNetwork::Cache cache;
  const Eigen::MatrixXd score = model.forward(draw.z_t, draw.t, &cache);
  const Eigen::MatrixXd r = residual(score, draw, weighting);
  LossAndGrad out;
  out.loss = mean_sq_norm(r);
  Eigen::MatrixXd g = (2.0 / static_cast<double>(batch.cols())) * r;
  if (weighting == LossWeighting::kSigmaSquared) {
    for (Eigen::Index j = 0; j < g.cols(); ++j) g.col(j) *= draw.sigma[j];
  }
  out.grad.assign(model.params().size(), 0.0);
  model.backward(cache, g, out.grad);
  return out;
}

void AdamState::step(std::span<double> params, std::span<const double> grad, double lr) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw ConfigError("adam: parameter/gradient size mismatch");
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw NumericalError("adam: non-finite gradient at step " + std::to_string(t_ + 1));
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
    v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + kEps);
  }
}

// --- training loop ----------------------------------------------------------

namespace {

std::vector<double> round_to_float(std::span<const double> p) {
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = static_cast<double>(static_cast<float>(p[i]));
  return out;
}

}  // namespace

ScoreModelCheckpoint train(std::span<const FeatureTensor> dataset, const VpSdeConfig& sde,
                           MlpScoreConfig net_cfg, const TrainConfig& train_cfg) {
  sde.validate();
  train_cfg.validate();
  if (dataset.empty()) throw DataError("train: empty dataset");
  const ScaleDescriptor scale = dataset.front().descriptor();
  net_cfg.input_dim = scale.dim();
  net_cfg.sde = sde;
  net_cfg.validate();

  NormStats norm = fit_norm_stats(dataset);
  const auto d = static_cast<Eigen::Index>(scale.dim());
  const auto n = static_cast<Eigen::Index>(dataset.size());
  Eigen::MatrixXd data(d, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const std::vector<double> z = norm.normalize(std::span<const float>(dataset[j].values));
    data.col(j) = Eigen::Map<const Eigen::VectorXd>(z.data(), d);
  }

  Rng init_rng(derive_seed(train_cfg.seed, std::uint64_t{1}));
  Rng shuffle_rng(derive_seed(train_cfg.seed, std::uint64_t{2}));
  Rng noise_rng(derive_seed(train_cfg.seed, std::uint64_t{3}));
  MlpScoreNetwork net = MlpScoreNetwork::initialized(net_cfg, init_rng);
  AdamState adam(net.params().size());

  const std::size_t batch = std::min<std::size_t>(train_cfg.batch_size, dataset.size());
  const std::size_t per_epoch = (dataset.size() + batch - 1) / batch;
  const std::size_t total = train_cfg.steps > 0 ? train_cfg.steps : train_cfg.epochs * per_epoch;

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();  // forces a shuffle before the first batch
  std::size_t epochs = 0;
  std::deque<double> window;
  double window_sum = 0.0;
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t step = 0; step < total; ++step) {
    if (cursor >= order.size()) {
      std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
      cursor = 0;
      ++epochs;
    }
    const std::size_t take = std::min(batch, order.size() - cursor);
    Eigen::MatrixXd xb(d, static_cast<Eigen::Index>(take));
    for (std::size_t j = 0; j < take; ++j) xb.col(static_cast<Eigen::Index>(j)) = data.col(order[cursor + j]);
    cursor += take;

    const LossAndGrad lg = dsm_loss_and_grad(net, sde, xb, train_cfg.weighting, noise_rng);
    adam.step(net.mutable_params(), lg.grad, train_cfg.learning_rate);
    for (double p : net.params()) {
      if (!std::isfinite(p)) {
        throw NumericalError("train: non-finite parameter after step " + std::to_string(step + 1));
      }
    }
    window.push_back(lg.loss);
    window_sum += lg.loss;
    if (window.size() > 100) {
      window_sum -= window.front();
      window.pop_front();
    }
    if (train_cfg.on_progress && train_cfg.log_every > 0 &&
        ((step + 1) % train_cfg.log_every == 0 || step + 1 == total)) {
      const std::chrono::duration<double> el = std::chrono::steady_clock::now() - start;
      train_cfg.on_progress({step + 1, lg.loss, window_sum / static_cast<double>(window.size()),
                             el.count()});
    }
  }

  TrainingMetadata meta;
  meta.epochs_run = epochs;
  meta.steps_run = total;
  meta.final_loss = window.empty() ? 0.0 : window_sum / static_cast<double>(window.size());
  meta.seed = train_cfg.seed;
  MlpScoreNetwork rounded(net.config(), round_to_float(net.params()));
  return ScoreModelCheckpoint{sde, scale, std::move(rounded), std::move(norm), meta};
}

// --- checkpoint file --------------------------------------------------------

void ScoreModelCheckpoint::validate() const {
  sde.validate();
  if (scale.dim() != net.input_dim()) {
    std::ostringstream os;
    os << "checkpoint: scale dims (" << scale.h << ", " << scale.w << ", " << scale.c
       << ") do not match network input_dim " << net.input_dim();
    throw DataError(os.str());
  }
  const MlpScoreConfig& nc = net.config();
  if (nc.head == ScoreHead::kPriorResidual &&
      (nc.sde.beta_min != sde.beta_min || nc.sde.beta_max != sde.beta_max ||
       nc.sde.t_min != sde.t_min || nc.sde.t_max != sde.t_max)) {
    throw ConfigError("checkpoint: network score head uses a different SDE than the checkpoint");
  }
  if (norm.channels() != scale.c || norm.std.size() != scale.c) {
    throw DataError("checkpoint: normalization stats do not match channel count");
  }
  for (double s : norm.std) {
    if (!(s > 0.0)) throw DataError("checkpoint: normalization std must be positive");
  }
}

namespace {

constexpr char kCkptMagic[8] = {'A', 'D', 'O', 'D', 'E', 'C', 'K', 'P'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ScoreModelCheckpoint& ckpt) {
  ckpt.validate();
  const MlpScoreConfig& nc = ckpt.net.config();
  nlohmann::ordered_json h;
  h["sde"] = {{"beta_min", ckpt.sde.beta_min},
              {"beta_max", ckpt.sde.beta_max},
              {"t_min", ckpt.sde.t_min},
              {"t_max", ckpt.sde.t_max}};
  h["scale"] = {{"label", ckpt.scale.label},
                {"h", ckpt.scale.h},
                {"w", ckpt.scale.w},
                {"c", ckpt.scale.c}};
  h["net"] = {{"kind", "mlp"},
              {"input_dim", nc.input_dim},
              {"hidden_dims", nc.hidden_dims},
              {"time_embed_dim", nc.time_embed_dim},
              {"activation", std::string(to_string(nc.activation))},
              {"head", std::string(to_string(nc.head))},
              {"param_count", nc.param_count()}};
  h["norm"] = {{"mean", ckpt.norm.mean}, {"std", ckpt.norm.std}};
  h["meta"] = {{"epochs_run", ckpt.meta.epochs_run},
               {"steps_run", ckpt.meta.steps_run},
               {"final_loss", ckpt.meta.final_loss},
               {"seed", ckpt.meta.seed}};
  const std::string header = h.dump();

  std::vector<std::uint8_t> out(kCkptMagic, kCkptMagic + 8);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  for (double p : ckpt.net.params()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(p)));
  return out;
}

ScoreModelCheckpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) throw DataError("checkpoint: truncated preamble");
  if (!std::equal(kCkptMagic, kCkptMagic + 8, bytes.begin())) {
    throw DataError("checkpoint: bad magic (not an ADODECKP file)");
  }
  const std::uint32_t version = get_u32(bytes, 8);
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported format version " + std::to_string(version) +
                    " (this build reads version " + std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t header_len = get_u32(bytes, 12);
  if (bytes.size() - 16 < header_len) throw DataError("checkpoint: truncated header");
  const std::string text(reinterpret_cast<const char*>(bytes.data() + 16), header_len);

  try {
    const nlohmann::json h = nlohmann::json::parse(text);
    VpSdeConfig sde;
    sde.beta_min = h.at("sde").at("beta_min").get<double>();
    sde.beta_max = h.at("sde").at("beta_max").get<double>();
    sde.t_min = h.at("sde").at("t_min").get<double>();
    sde.t_max = h.at("sde").at("t_max").get<double>();
    ScaleDescriptor scale{h.at("scale").at("label").get<std::string>(),
                          h.at("scale").at("h").get<std::size_t>(),
                          h.at("scale").at("w").get<std::size_t>(),
                          h.at("scale").at("c").get<std::size_t>()};
    const auto& jn = h.at("net");
    if (jn.at("kind").get<std::string>() != "mlp") throw DataError("checkpoint: unknown network kind");
    MlpScoreConfig nc;
    nc.input_dim = jn.at("input_dim").get<std::size_t>();
    nc.hidden_dims = jn.at("hidden_dims").get<std::vector<std::size_t>>();
    nc.time_embed_dim = jn.at("time_embed_dim").get<std::size_t>();
    nc.activation = activation_from_string(jn.at("activation").get<std::string>());
    nc.head = score_head_from_string(jn.at("head").get<std::string>());
    nc.sde = sde;
    nc.validate();
    const std::size_t count = jn.at("param_count").get<std::size_t>();
    if (count != nc.param_count()) {
      throw DataError("checkpoint: header param_count disagrees with network shape");
    }
    const std::size_t payload = bytes.size() - 16 - header_len;
    if (payload != count * 4) {
      std::ostringstream os;
      os << "checkpoint: parameter block holds " << payload << " bytes, expected " << count * 4;
      throw DataError(os.str());
    }
    std::vector<double> params(count);
    for (std::size_t i = 0; i < count; ++i) {
      params[i] = std::bit_cast<float>(get_u32(bytes, 16 + header_len + 4 * i));
    }
    NormStats norm{h.at("norm").at("mean").get<std::vector<double>>(),
                   h.at("norm").at("std").get<std::vector<double>>()};
    TrainingMetadata meta{h.at("meta").at("epochs_run").get<std::size_t>(),
                          h.at("meta").at("steps_run").get<std::size_t>(),
                          h.at("meta").at("final_loss").get<double>(),
                          h.at("meta").at("seed").get<std::uint64_t>()};
    ScoreModelCheckpoint ckpt{sde, std::move(scale), MlpScoreNetwork(nc, std::move(params)),
                              std::move(norm), meta};
    ckpt.validate();
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: malformed header: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const ScoreModelCheckpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ckpt);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

ScoreModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  try {
    return decode_checkpoint(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace adode
