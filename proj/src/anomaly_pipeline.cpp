// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

#include "adode/anomaly_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "adode/error.hpp"

namespace adode {
namespace {

std::string join(std::span<const std::string> v) {
  std::string out = "{";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
  return out + "}";
}

}  // namespace

// --- multi-scale model -------------------------------------------------------

void MultiScaleModel::validate() const {
  if (scales.empty()) throw ConfigError("multi-scale model: no scales");
  std::set<std::string> seen;
  for (const auto& c : scales) {
    if (!seen.insert(c.scale.label).second) {
      throw ConfigError("multi-scale model: duplicate scale '" + c.scale.label + "'");
    }
    if (c.sde.beta_min != sde.beta_min || c.sde.beta_max != sde.beta_max ||
        c.sde.t_min != sde.t_min || c.sde.t_max != sde.t_max) {
      throw ConfigError("multi-scale model: scale '" + c.scale.label +
                        "' was trained with a different diffusion config");
    }
  }
}

const ScoreModelCheckpoint& MultiScaleModel::at(const std::string& label) const {
  for (const auto& c : scales) {
    if (c.scale.label == label) return c;
  }
  throw ConfigError("multi-scale model: no scale '" + label + "'");
}

std::vector<std::string> MultiScaleModel::labels() const {
  std::vector<std::string> out;
  for (const auto& c : scales) out.push_back(c.scale.label);
  return out;
}

std::string MultiScaleModel::largest_spatial_scale() const {
  validate();
  const auto it = std::max_element(scales.begin(), scales.end(), [](const auto& a, const auto& b) {
    return a.scale.h * a.scale.w < b.scale.h * b.scale.w;
  });
  return it->scale.label;
}

MultiScaleModel make_multiscale(std::vector<ScoreModelCheckpoint> checkpoints) {
  if (checkpoints.empty()) throw ConfigError("multi-scale model: no checkpoints");
  MultiScaleModel m{checkpoints.front().sde, std::move(checkpoints)};
  m.validate();
  return m;
}

const ScaleScore* AnomalyReport::find(const std::string& scale) const {
  for (const auto& s : scales) {
    if (s.scale == scale) return &s;
  }
  return nullptr;
}

// --- scoring -----------------------------------------------------------------

LikelihoodResult feature_log_likelihood(const ScoreModelCheckpoint& ckpt,
                                        const FeatureTensor& features, const ScoringConfig& cfg) {
  features.validate();
  if (features.h != ckpt.scale.h || features.w != ckpt.scale.w || features.c != ckpt.scale.c) {
    std::ostringstream os;
    os << "scale '" << ckpt.scale.label << "': features have dims (" << features.h << ", "
       << features.w << ", " << features.c << "), model expects (" << ckpt.scale.h << ", "
       << ckpt.scale.w << ", " << ckpt.scale.c << ")";
    throw ConfigError(os.str());
  }
  const std::vector<double> z = ckpt.norm.normalize(std::span<const float>(features.values));
  LikelihoodResult res = log_likelihood(ckpt.net, ckpt.sde, z, cfg.solver, cfg.hutch);
  res.log_likelihood -= ckpt.norm.log_abs_det(z.size());
  res.bpd = bpd(res.log_likelihood, ckpt.scale.dims());
  return res;
}

double mean_score(std::span<const double> bpds) {
  if (bpds.empty()) throw ConfigError("mean_score: no scales");
  double acc = 0.0;
  for (double b : bpds) acc += b;
  return acc / static_cast<double>(bpds.size());
}

AnomalyReport score_sample(const MultiScaleModel& models, std::span<const FeatureTensor> features,
                           const ScoringConfig& cfg, std::string sample_id) {
  models.validate();
  std::vector<std::string> have;
  for (const auto& f : features) have.push_back(f.scale_id);
  std::vector<std::string> want = models.labels();
  std::vector<std::string> have_sorted = have, want_sorted = want;
  std::sort(have_sorted.begin(), have_sorted.end());
  std::sort(want_sorted.begin(), want_sorted.end());
  if (have_sorted != want_sorted) {
    throw ConfigError("score_sample: feature scales " + join(have) + " do not match model scales " +
                      join(want));
  }
  AnomalyReport report;
  report.sample_id = std::move(sample_id);
  std::vector<double> bpds;
  for (const auto& ckpt : models.scales) {
    const auto it = std::find_if(features.begin(), features.end(),
                                 [&](const auto& f) { return f.scale_id == ckpt.scale.label; });
    ScoringConfig local = cfg;
    local.hutch.seed = derive_seed(cfg.hutch.seed, ckpt.scale.label);
    const LikelihoodResult r = feature_log_likelihood(ckpt, *it, local);
    report.scales.push_back({ckpt.scale.label, r.bpd, r.log_likelihood, r.n_function_evals});
    bpds.push_back(r.bpd);
  }
  report.score = mean_score(bpds);
  return report;
}

// --- decoder -----------------------------------------------------------------

LinearPatchDecoder::LinearPatchDecoder(std::size_t image_h, std::size_t image_w,
                                       std::vector<ScaleDescriptor> scales, std::size_t upsample)
    : image_h_(image_h), image_w_(image_w), upsample_(upsample) {
  if (image_h == 0 || image_w == 0) throw ConfigError("decoder: empty image size");
  if (upsample == 0) throw ConfigError("decoder: upsample must be >= 1");
  if (scales.empty()) throw ConfigError("decoder: no scales");
  std::size_t offset = 0;
  for (auto& s : scales) {
    if (s.h == 0 || s.w == 0 || s.c == 0 || image_h % s.h != 0 || image_w % s.w != 0) {
      std::ostringstream os;
      os << "decoder: scale '" << s.label << "' grid " << s.h << "x" << s.w
         << " does not tile a " << image_h << "x" << image_w << " image";
      throw ConfigError(os.str());
    }
    ScaleLayout l;
    l.cell_h = image_h / s.h;
    l.cell_w = image_w / s.w;
    if (l.cell_h % upsample != 0 || l.cell_w % upsample != 0) {
      throw ConfigError("decoder: upsample factor must divide the cell size of scale '" + s.label + "'");
    }
    l.patch_h = l.cell_h / upsample;
    l.patch_w = l.cell_w / upsample;
    l.scale = std::move(s);
    l.param_offset = offset;
    offset += l.param_count();
    layouts_.push_back(std::move(l));
  }
  params_.assign(offset, 0.0);
}

std::vector<std::string> LinearPatchDecoder::scales() const {
  std::vector<std::string> out;
  for (const auto& l : layouts_) out.push_back(l.scale.label);
  return out;
}

std::vector<const FeatureTensor*> LinearPatchDecoder::select(
    std::span<const FeatureTensor> features) const {
  std::vector<const FeatureTensor*> out;
  for (const auto& l : layouts_) {
    const auto it = std::find_if(features.begin(), features.end(),
                                 [&](const auto& f) { return f.scale_id == l.scale.label; });
    if (it == features.end()) throw ConfigError("decoder: missing features for scale '" + l.scale.label + "'");
    if (it->h != l.scale.h || it->w != l.scale.w || it->c != l.scale.c) {
      throw ConfigError("decoder: feature dims for scale '" + l.scale.label + "' differ from training");
    }
    out.push_back(&*it);
  }
  return out;
}

void LinearPatchDecoder::decode_into(std::span<const FeatureTensor> features,
                                     std::span<const double> params, std::span<double> image) const {
  const auto sel = select(features);
  std::fill(image.begin(), image.end(), 0.0);
  const double inv = 1.0 / static_cast<double>(layouts_.size());
  std::vector<double> patch;
  for (std::size_t k = 0; k < layouts_.size(); ++k) {
    const ScaleLayout& l = layouts_[k];
    const FeatureTensor& f = *sel[k];
    const std::size_t np = l.patch_h * l.patch_w, c = l.scale.c;
    const double* w = params.data() + l.param_offset;
    const double* b = w + np * c;
    patch.resize(np);
    for (std::size_t gy = 0; gy < l.scale.h; ++gy) {
      for (std::size_t gx = 0; gx < l.scale.w; ++gx) {
        const float* feat = f.values.data() + (gy * l.scale.w + gx) * c;
        for (std::size_t p = 0; p < np; ++p) {
          double acc = b[p];
          for (std::size_t ch = 0; ch < c; ++ch) acc += w[p * c + ch] * feat[ch];
          patch[p] = acc;
        }
        for (std::size_t y = 0; y < l.cell_h; ++y) {
          for (std::size_t x = 0; x < l.cell_w; ++x) {
            const std::size_t p = (y / upsample_) * l.patch_w + x / upsample_;
            image[(gy * l.cell_h + y) * image_w_ + gx * l.cell_w + x] += inv * patch[p];
          }
        }
      }
    }
  }
}

void LinearPatchDecoder::accumulate_adjoint(std::span<const FeatureTensor> features,
                                            std::span<const double> residual,
                                            std::span<double> grad) const {
  const auto sel = select(features);
  const double inv = 1.0 / static_cast<double>(layouts_.size());
  std::vector<double> patch_r;
  for (std::size_t k = 0; k < layouts_.size(); ++k) {
    const ScaleLayout& l = layouts_[k];
    const FeatureTensor& f = *sel[k];
    const std::size_t np = l.patch_h * l.patch_w, c = l.scale.c;
    double* gw = grad.data() + l.param_offset;
    double* gb = gw + np * c;
    patch_r.resize(np);
    for (std::size_t gy = 0; gy < l.scale.h; ++gy) {
      for (std::size_t gx = 0; gx < l.scale.w; ++gx) {
        std::fill(patch_r.begin(), patch_r.end(), 0.0);
        for (std::size_t y = 0; y < l.cell_h; ++y) {
          for (std::size_t x = 0; x < l.cell_w; ++x) {
            const std::size_t p = (y / upsample_) * l.patch_w + x / upsample_;
            patch_r[p] += inv * residual[(gy * l.cell_h + y) * image_w_ + gx * l.cell_w + x];
          }
        }
        const float* feat = f.values.data() + (gy * l.scale.w + gx) * c;
        for (std::size_t p = 0; p < np; ++p) {
          for (std::size_t ch = 0; ch < c; ++ch) gw[p * c + ch] += patch_r[p] * feat[ch];
          gb[p] += patch_r[p];
        }
      }
    }
  }
}

Image LinearPatchDecoder::decode(std::span<const FeatureTensor> features) const {
  std::vector<double> img(image_h_ * image_w_);
  decode_into(features, params_, img);
  Image out{image_h_, image_w_, std::vector<float>(img.size())};
  std::transform(img.begin(), img.end(), out.pixels.begin(),
                 [](double v) { return static_cast<float>(v); });
  return out;
}

void LinearPatchDecoder::save(const std::filesystem::path& path) const {
  nlohmann::ordered_json j;
  j["kind"] = "linear_patch";
  j["image_h"] = image_h_;
  j["image_w"] = image_w_;
  j["upsample"] = upsample_;
  j["scales"] = nlohmann::ordered_json::array();
  for (const auto& l : layouts_) {
    j["scales"].push_back({{"label", l.scale.label}, {"h", l.scale.h}, {"w", l.scale.w}, {"c", l.scale.c}});
  }
  j["params"] = params_;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write decoder " + path.string());
  out << j.dump() << '\n';
}

LinearPatchDecoder LinearPatchDecoder::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open decoder " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    if (j.at("kind").get<std::string>() != "linear_patch") throw DataError("decoder: unknown kind");
    std::vector<ScaleDescriptor> scales;
    for (const auto& s : j.at("scales")) {
      scales.push_back({s.at("label").get<std::string>(), s.at("h").get<std::size_t>(),
                        s.at("w").get<std::size_t>(), s.at("c").get<std::size_t>()});
    }
    LinearPatchDecoder dec(j.at("image_h").get<std::size_t>(), j.at("image_w").get<std::size_t>(),
                           std::move(scales), j.at("upsample").get<std::size_t>());
    const auto params = j.at("params").get<std::vector<double>>();
    if (params.size() != dec.params_.size()) throw DataError("decoder: parameter count mismatch");
    dec.params_ = params;
    return dec;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("decoder " + path.string() + ": " + e.what());
  }
}

DecoderTrainingResult train_decoder(std::span<const DecoderSample> data, const DecoderConfig& cfg) {
  if (data.empty()) throw DataError("train_decoder: empty dataset");
  const DecoderSample& first = data.front();
  std::vector<ScaleDescriptor> scales;
  if (cfg.scales.empty()) {
    for (const auto& f : first.features) scales.push_back(f.descriptor());
  } else {
    for (const auto& label : cfg.scales) {
      const auto it = std::find_if(first.features.begin(), first.features.end(),
                                   [&](const auto& f) { return f.scale_id == label; });
      if (it == first.features.end()) throw ConfigError("train_decoder: no features for scale '" + label + "'");
      scales.push_back(it->descriptor());
    }
  }
  LinearPatchDecoder dec(first.image.h, first.image.w, std::move(scales), cfg.upsample);
  Rng rng(cfg.seed);
  for (double& p : dec.mutable_params()) p = rng.uniform(-0.01, 0.01);

  const std::size_t n_pix = dec.image_h() * dec.image_w();
  for (const auto& s : data) {
    if (s.image.h != dec.image_h() || s.image.w != dec.image_w()) {
      throw DataError("train_decoder: images have different sizes");
    }
  }
  const std::size_t np = dec.params().size();
  std::vector<double> x(dec.params().begin(), dec.params().end());
  // r = y - A x per sample, concatenated.
  std::vector<double> r(data.size() * n_pix);
  auto apply = [&](std::span<const double> params, std::vector<double>& out) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      dec.decode_into(data[i].features, params, std::span(out).subspan(i * n_pix, n_pix));
    }
  };
  auto adjoint = [&](const std::vector<double>& res, std::vector<double>& g) {
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
      dec.accumulate_adjoint(data[i].features, std::span(res).subspan(i * n_pix, n_pix), g);
    }
  };
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  };

  apply(x, r);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t p = 0; p < n_pix; ++p) r[i * n_pix + p] = data[i].image.pixels[p] - r[i * n_pix + p];
  }
  std::vector<double> s(np), p(np), q(r.size());
  adjoint(r, s);
  p = s;
  double gamma = dot(s, s);
  const double gamma0 = gamma;
  std::size_t it = 0;
  for (; it < cfg.iterations; ++it) {
    if (gamma <= 1e-30 * std::max(1.0, gamma0)) break;
    apply(p, q);
    const double qq = dot(q, q);
    if (qq <= 0.0) break;
    const double alpha = gamma / qq;
    for (std::size_t k = 0; k < np; ++k) x[k] += alpha * p[k];
    for (std::size_t k = 0; k < r.size(); ++k) r[k] -= alpha * q[k];
    adjoint(r, s);
    const double gamma_new = dot(s, s);
    const double b = gamma_new / gamma;
    for (std::size_t k = 0; k < np; ++k) p[k] = s[k] + b * p[k];
    gamma = gamma_new;
  }
  std::copy(x.begin(), x.end(), dec.mutable_params().begin());
  // Recompute the residual from scratch for the reported error.
  apply(x, q);
  double sse = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t k = 0; k < n_pix; ++k) {
      const double e = data[i].image.pixels[k] - q[i * n_pix + k];
      sse += e * e;
    }
  }
  return {std::move(dec), sse / static_cast<double>(r.size()), it};
}

Image squared_error_heatmap(const Image& x, const Image& x_rec) {
  if (x.h != x_rec.h || x.w != x_rec.w) throw ConfigError("heatmap: image sizes differ");
  Image out{x.h, x.w, std::vector<float>(x.pixels.size())};
  for (std::size_t i = 0; i < x.pixels.size(); ++i) {
    const double d = static_cast<double>(x.pixels[i]) - static_cast<double>(x_rec.pixels[i]);
    out.pixels[i] = static_cast<float>(d * d);
  }
  return out;
}

LocalizationResult localize(const MultiScaleModel& models, const Decoder& decoder,
                            const Image& image, std::span<const ExtractorScale> extractor,
                            const SamplerConfig& sampler, std::span<const std::string> scales,
                            Rng& rng) {
  if (image.h != decoder.image_h() || image.w != decoder.image_w()) {
    throw ConfigError("localize: image size does not match the decoder");
  }
  std::vector<std::string> targets(scales.begin(), scales.end());
  if (targets.empty()) targets.push_back(models.largest_spatial_scale());
  LocalizationResult out;
  out.reconstructed_features = extract_baseline(image, extractor);
  for (const auto& label : targets) {
    const ScoreModelCheckpoint& ckpt = models.at(label);
    auto it = std::find_if(out.reconstructed_features.begin(), out.reconstructed_features.end(),
                           [&](const auto& f) { return f.scale_id == label; });
    if (it == out.reconstructed_features.end()) {
      throw ConfigError("localize: extractor does not produce scale '" + label + "'");
    }
    const std::vector<double> z = ckpt.norm.normalize(std::span<const float>(it->values));
    const std::vector<double> z_rec = reconstruct(ckpt.net, ckpt.sde, z, sampler, rng);
    const std::vector<double> raw = ckpt.norm.denormalize(z_rec);
    std::transform(raw.begin(), raw.end(), it->values.begin(),
                   [](double v) { return static_cast<float>(v); });
  }
  out.reconstruction = decoder.decode(out.reconstructed_features);
  out.heatmap = squared_error_heatmap(image, out.reconstruction);
  return out;
}

// --- ablation ------------------------------------------------------------------

double subset_score(const AnomalyReport& report, std::span<const std::string> subset) {
  if (subset.empty()) throw ConfigError("ablation: empty scale subset");
  std::vector<double> bpds;
  for (const auto& label : subset) {
    const ScaleScore* s = report.find(label);
    if (s == nullptr) {
      throw ConfigError("ablation: unknown scale '" + label + "' for sample '" + report.sample_id + "'");
    }
    bpds.push_back(s->bpd);
  }
  return mean_score(bpds);
}

LabeledScores labeled_scores(std::span<const AnomalyReport> reports) {
  LabeledScores out;
  for (const auto& r : reports) {
    if (!r.label || *r.label == SampleLabel::kUnlabeled) {
      throw ConfigError("metrics: sample '" + r.sample_id + "' has no normal/abnormal label");
    }
    out.score.push_back(r.score);
    out.label.push_back(*r.label == SampleLabel::kAbnormal ? 1 : 0);
  }
  return out;
}

std::vector<AblationRow> scale_ablation(std::span<const AnomalyReport> reports,
                                        std::span<const std::vector<std::string>> subsets) {
  LabeledScores base = labeled_scores(reports);
  std::vector<AblationRow> rows;
  for (const auto& subset : subsets) {
    LabeledScores ls = base;
    for (std::size_t i = 0; i < reports.size(); ++i) ls.score[i] = subset_score(reports[i], subset);
    rows.push_back({subset, summarize(ls)});
  }
  return rows;
}

// --- report files --------------------------------------------------------------

std::string report_to_json_line(const AnomalyReport& r) {
  nlohmann::ordered_json j;
  j["id"] = r.sample_id;
  if (r.label) j["label"] = std::string(to_string(*r.label));
  j["scales"] = nlohmann::ordered_json::array();
  for (const auto& s : r.scales) {
    j["scales"].push_back({{"scale", s.scale}, {"bpd", s.bpd}, {"log_likelihood", s.log_likelihood},
                           {"nfe", s.nfe}});
  }
  j["score"] = r.score;
  return j.dump();
}

AnomalyReport report_from_json_line(const std::string& line) {
  try {
    const nlohmann::json j = nlohmann::json::parse(line);
    AnomalyReport r;
    r.sample_id = j.at("id").get<std::string>();
    if (j.contains("label")) r.label = sample_label_from_string(j.at("label").get<std::string>());
    for (const auto& s : j.at("scales")) {
      r.scales.push_back({s.at("scale").get<std::string>(), s.at("bpd").get<double>(),
                          s.at("log_likelihood").get<double>(), s.at("nfe").get<std::size_t>()});
    }
    r.score = j.at("score").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("report: malformed record: ") + e.what());
  }
}

void write_reports(const std::filesystem::path& path, std::span<const AnomalyReport> reports) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write report " + path.string());
  for (const auto& r : reports) out << report_to_json_line(r) << '\n';
}

std::vector<AnomalyReport> read_reports(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report " + path.string());
  std::vector<AnomalyReport> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(report_from_json_line(line));
  }
  return out;
}

}  // namespace adode
