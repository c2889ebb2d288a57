// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

#include "adode/feature_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "adode/error.hpp"

namespace adode {
namespace {

constexpr char kAdftMagic[4] = {'A', 'D', 'F', 'T'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      std::ostringstream os;
      os << "ADFT: truncated " << what << " at byte offset " << pos_ << " (need " << n
         << " bytes, " << bytes_.size() - pos_ << " left)";
      throw DataError(os.str());
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace

void FeatureTensor::validate() const {
  if (values.size() != h * w * c) {
    std::ostringstream os;
    os << "feature tensor '" << scale_id << "': " << values.size() << " values for dims (" << h
       << ", " << w << ", " << c << ")";
    throw DataError(os.str());
  }
  for (float v : values) {
    if (!std::isfinite(v)) throw DataError("feature tensor '" + scale_id + "': non-finite value");
  }
}

std::vector<std::uint8_t> encode_features(std::span<const FeatureTensor> tensors) {
  std::vector<std::uint8_t> out(kAdftMagic, kAdftMagic + 4);
  put_u32(out, kAdftVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const FeatureTensor& t : tensors) {
    t.validate();
    if (t.scale_id.size() > 255) throw DataError("ADFT: scale label longer than 255 bytes");
    constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
    if (t.h > kMax || t.w > kMax || t.c > kMax) throw DataError("ADFT: dimension overflow");
    out.push_back(static_cast<std::uint8_t>(t.scale_id.size()));
    out.insert(out.end(), t.scale_id.begin(), t.scale_id.end());
    put_u32(out, static_cast<std::uint32_t>(t.h));
    put_u32(out, static_cast<std::uint32_t>(t.w));
    put_u32(out, static_cast<std::uint32_t>(t.c));
    for (float v : t.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

std::vector<FeatureTensor> decode_features(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const std::string magic = r.str(4, "magic");
  if (magic != std::string_view(kAdftMagic, 4)) throw DataError("ADFT: bad magic");
  const std::uint32_t version = r.u32("version");
  if (version != kAdftVersion) {
    throw DataError("ADFT: unsupported version " + std::to_string(version) + " (expected " +
                    std::to_string(kAdftVersion) + ")");
  }
  const std::uint32_t n = r.u32("scale count");
  std::vector<FeatureTensor> out;
  for (std::uint32_t s = 0; s < n; ++s) {
    FeatureTensor t;
    const std::uint8_t len = r.u8("label length");
    t.scale_id = r.str(len, "label");
    t.h = r.u32("h");
    t.w = r.u32("w");
    t.c = r.u32("c");
    const std::uint64_t count = static_cast<std::uint64_t>(t.h) * t.w * t.c;
    if (t.h != 0 && t.w != 0 && count / t.h / t.w != t.c) throw DataError("ADFT: dimension overflow");
    if (count > (bytes.size() - r.offset()) / 4) {
      r.need(static_cast<std::size_t>(std::min<std::uint64_t>(count * 4, SIZE_MAX)), "payload");
    }
    t.values.resize(count);
    for (auto& v : t.values) v = std::bit_cast<float>(r.u32("payload"));
    t.validate();
    out.push_back(std::move(t));
  }
  if (!r.done()) {
    std::ostringstream os;
    os << "ADFT: trailing bytes after offset " << r.offset();
    throw DataError(os.str());
  }
  return out;
}

void write_features(const std::filesystem::path& path, std::span<const FeatureTensor> tensors) {
  write_file(path, encode_features(tensors));
}

std::vector<FeatureTensor> read_features(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_features(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

FeatureTensor Image::to_tensor(std::string label) const {
  return FeatureTensor{std::move(label), h, w, 1, pixels};
}

Image Image::from_tensor(const FeatureTensor& t) {
  if (t.c != 1) throw DataError("image tensor must have a single channel");
  return Image{t.h, t.w, t.values};
}

void write_image(const std::filesystem::path& path, const Image& image, const std::string& label) {
  const FeatureTensor t = image.to_tensor(label);
  write_features(path, std::span(&t, 1));
}

Image read_image(const std::filesystem::path& path) {
  const auto tensors = read_features(path);
  if (tensors.size() != 1) throw DataError(path.string() + ": expected exactly one image tensor");
  return Image::from_tensor(tensors.front());
}

// --- manifest ---------------------------------------------------------------

std::string_view to_string(SampleLabel l) {
  switch (l) {
    case SampleLabel::kNormal:
      return "normal";
    case SampleLabel::kAbnormal:
      return "abnormal";
    case SampleLabel::kUnlabeled:
      return "unlabeled";
  }
  return "unlabeled";
}

SampleLabel sample_label_from_string(std::string_view s) {
  if (s == "normal") return SampleLabel::kNormal;
  if (s == "abnormal") return SampleLabel::kAbnormal;
  if (s == "unlabeled") return SampleLabel::kUnlabeled;
  throw DataError("unknown sample label '" + std::string(s) + "'");
}

const ManifestSample* DatasetManifest::find(std::string_view id) const {
  for (const auto& s : samples) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

std::vector<std::string> DatasetManifest::scale_labels() const {
  if (samples.empty()) return {};
  std::vector<std::string> out;
  for (const auto& [label, path] : samples.front().features) {
    const bool everywhere = std::all_of(samples.begin(), samples.end(), [&](const auto& s) {
      return s.features.contains(label);
    });
    if (everywhere) out.push_back(label);
  }
  return out;
}

DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + path.string() + ": " + e.what());
  }
  DatasetManifest m;
  m.base_dir = path.parent_path();
  try {
    m.version = j.at("version").get<std::uint32_t>();
    if (m.version != 1) throw DataError("manifest: unsupported version " + std::to_string(m.version));
    std::set<std::string> ids;
    for (const auto& js : j.at("samples")) {
      ManifestSample s;
      s.id = js.at("id").get<std::string>();
      s.label = sample_label_from_string(js.value("label", std::string("unlabeled")));
      s.features = js.at("features").get<std::map<std::string, std::string>>();
      if (js.contains("image")) s.image = js.at("image").get<std::string>();
      if (js.contains("mask")) s.mask = js.at("mask").get<std::string>();
      if (!ids.insert(s.id).second) throw DataError("manifest: duplicate sample id '" + s.id + "'");
      m.samples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + path.string() + ": " + e.what());
  }
  if (check_files) {
    for (const auto& s : m.samples) {
      auto check = [&](const std::string& rel) {
        if (!std::filesystem::exists(m.resolve(rel))) {
          throw DataError("manifest: sample '" + s.id + "' references missing file " +
                          m.resolve(rel).string());
        }
      };
      for (const auto& [scale, rel] : s.features) check(rel);
      if (s.image) check(*s.image);
      if (s.mask) check(*s.mask);
    }
  }
  return m;
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  nlohmann::json j;
  j["version"] = manifest.version;
  j["samples"] = nlohmann::json::array();
  for (const auto& s : manifest.samples) {
    nlohmann::json js;
    js["id"] = s.id;
    js["label"] = std::string(to_string(s.label));
    js["features"] = s.features;
    if (s.image) js["image"] = *s.image;
    if (s.mask) js["mask"] = *s.mask;
    j["samples"].push_back(std::move(js));
  }
  const std::string text = j.dump(1) + "\n";
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

FeatureTensor load_sample_features(const DatasetManifest& m, const ManifestSample& s,
                                   const std::string& scale) {
  const auto it = s.features.find(scale);
  if (it == s.features.end()) {
    throw DataError("sample '" + s.id + "' has no features for scale '" + scale + "'");
  }
  for (auto& t : read_features(m.resolve(it->second))) {
    if (t.scale_id == scale) return std::move(t);
  }
  throw DataError("file " + it->second + " holds no tensor labelled '" + scale + "'");
}

// --- baseline extractor -----------------------------------------------------

Image resize_bilinear(const Image& image, std::size_t out_h, std::size_t out_w) {
  if (image.h == 0 || image.w == 0) throw ConfigError("resize: empty image");
  Image out{out_h, out_w, std::vector<float>(out_h * out_w)};
  const double sy = static_cast<double>(image.h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(image.w) / static_cast<double>(out_w);
  auto coord = [](double pos, std::size_t n, std::size_t& i0, std::size_t& i1, double& frac) {
    pos = std::clamp(pos, 0.0, static_cast<double>(n - 1));
    i0 = static_cast<std::size_t>(std::floor(pos));
    i1 = std::min(i0 + 1, n - 1);
    frac = pos - static_cast<double>(i0);
  };
  for (std::size_t y = 0; y < out_h; ++y) {
    std::size_t y0, y1;
    double fy;
    coord((static_cast<double>(y) + 0.5) * sy - 0.5, image.h, y0, y1, fy);
    for (std::size_t x = 0; x < out_w; ++x) {
      std::size_t x0, x1;
      double fx;
      coord((static_cast<double>(x) + 0.5) * sx - 0.5, image.w, x0, x1, fx);
      const double top = (1.0 - fx) * image.at(y0, x0) + fx * image.at(y0, x1);
      const double bot = (1.0 - fx) * image.at(y1, x0) + fx * image.at(y1, x1);
      out.at(y, x) = static_cast<float>((1.0 - fy) * top + fy * bot);
    }
  }
  return out;
}

std::vector<FeatureTensor> extract_baseline(const Image& image,
                                            std::span<const ExtractorScale> scales) {
  if (image.h == 0 || image.w == 0 || image.pixels.size() != image.h * image.w) {
    throw ConfigError("extract_baseline: empty or malformed image");
  }
  std::vector<FeatureTensor> out;
  for (const ExtractorScale& sc : scales) {
    if (sc.resize == 0 || sc.grid == 0 || sc.resize % sc.grid != 0) {
      std::ostringstream os;
      os << "extract_baseline: grid " << sc.grid << " does not divide resize " << sc.resize;
      throw ConfigError(os.str());
    }
    const Image r = resize_bilinear(image, sc.resize, sc.resize);
    const std::size_t cell = sc.resize / sc.grid;
    FeatureTensor t{sc.label, sc.grid, sc.grid, ExtractorScale::kBaselineChannels, {}};
    t.values.reserve(t.dim());
    for (std::size_t gy = 0; gy < sc.grid; ++gy) {
      for (std::size_t gx = 0; gx < sc.grid; ++gx) {
        double sum = 0.0, sq = 0.0, dx = 0.0, dy = 0.0;
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        std::size_t ndx = 0, ndy = 0;
        for (std::size_t y = gy * cell; y < (gy + 1) * cell; ++y) {
          for (std::size_t x = gx * cell; x < (gx + 1) * cell; ++x) {
            const double v = r.at(y, x);
            sum += v;
            sq += v * v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            if (x + 1 < (gx + 1) * cell) {
              dx += r.at(y, x + 1) - v;
              ++ndx;
            }
            if (y + 1 < (gy + 1) * cell) {
              dy += r.at(y + 1, x) - v;
              ++ndy;
            }
          }
        }
        const double n = static_cast<double>(cell * cell);
        const double mean = sum / n;
        const double var = std::max(0.0, sq / n - mean * mean);
        t.values.push_back(static_cast<float>(mean));
        t.values.push_back(static_cast<float>(std::sqrt(var)));
        t.values.push_back(static_cast<float>(lo));
        t.values.push_back(static_cast<float>(hi));
        t.values.push_back(static_cast<float>(ndx ? dx / static_cast<double>(ndx) : 0.0));
        t.values.push_back(static_cast<float>(ndy ? dy / static_cast<double>(ndy) : 0.0));
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

// --- synthetic data ---------------------------------------------------------

MixtureLaw::MixtureLaw(std::vector<MixtureComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw ConfigError("mixture: needs at least one component");
  const std::size_t d = components_.front().mean.size();
  double total = 0.0;
  for (const auto& c : components_) {
    if (d == 0 || c.mean.size() != d || c.std.size() != d) {
      throw ConfigError("mixture: component dimensions disagree");
    }
    if (!(c.weight > 0.0)) throw ConfigError("mixture: weights must be positive");
    for (double s : c.std) {
      if (!(s > 0.0)) throw ConfigError("mixture: stds must be positive");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("mixture: weights must sum to 1");
}

double MixtureLaw::logpdf(std::span<const double> z) const {
  if (z.size() != dim()) throw ConfigError("mixture: dimension mismatch");
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  std::vector<double> terms;
  terms.reserve(components_.size());
  for (const auto& c : components_) {
    double lp = std::log(c.weight);
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double u = (z[i] - c.mean[i]) / c.std[i];
      lp += -0.5 * u * u - std::log(c.std[i]) - half_log_2pi;
    }
    terms.push_back(lp);
  }
  const double m = *std::max_element(terms.begin(), terms.end());
  double acc = 0.0;
  for (double v : terms) acc += std::exp(v - m);
  return m + std::log(acc);
}

std::vector<double> MixtureLaw::sample(Rng& rng) const {
  double u = rng.uniform();
  std::size_t k = 0;
  while (k + 1 < components_.size() && u >= components_[k].weight) {
    u -= components_[k].weight;
    ++k;
  }
  const auto& c = components_[k];
  std::vector<double> z(dim());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = c.mean[i] + c.std[i] * rng.normal();
  return z;
}

std::string_view to_string(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::kGaussian:
      return "gaussian";
    case SyntheticKind::kGaussianMixture:
      return "gaussian_mixture";
    case SyntheticKind::kBlobImages:
      return "blob_images";
  }
  return "gaussian";
}

SyntheticKind synthetic_kind_from_string(std::string_view s) {
  if (s == "gaussian") return SyntheticKind::kGaussian;
  if (s == "gaussian_mixture") return SyntheticKind::kGaussianMixture;
  if (s == "blob_images") return SyntheticKind::kBlobImages;
  throw ConfigError("unknown synthetic kind '" + std::string(s) + "'");
}

namespace {

std::vector<double> broadcast(const std::vector<double>& v, std::size_t d, const char* what) {
  if (v.size() == 1) return std::vector<double>(d, v.front());
  if (v.size() != d) {
    std::ostringstream os;
    os << "synthetic: " << what << " has " << v.size() << " entries, scale dimension is " << d;
    throw ConfigError(os.str());
  }
  return v;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (kind == SyntheticKind::kBlobImages) {
    if (image_size == 0 || extractor_scales.empty()) {
      throw ConfigError("synthetic: blob images need an image size and extractor scales");
    }
    if (anomaly_size == 0 || anomaly_size > image_size) {
      throw ConfigError("synthetic: anomaly square must fit in the image");
    }
    return;
  }
  if (scales.empty()) throw ConfigError("synthetic: at least one scale is required");
  if (components.empty()) throw ConfigError("synthetic: at least one component is required");
  if (kind == SyntheticKind::kGaussian && components.size() != 1) {
    throw ConfigError("synthetic: gaussian kind takes exactly one component");
  }
  std::set<std::string> labels;
  for (const auto& s : scales) {
    if (s.dim() == 0) throw ConfigError("synthetic: scale '" + s.label + "' has zero dimension");
    if (!labels.insert(s.label).second) throw ConfigError("synthetic: duplicate scale label");
  }
  if (!(anomaly_scale > 0.0)) throw ConfigError("synthetic: anomaly_scale must be positive");
}

MixtureLaw build_law(const SyntheticSpec& spec, const ScaleDescriptor& scale) {
  std::vector<MixtureComponent> comps;
  for (const auto& c : spec.components) {
    comps.push_back({c.weight, broadcast(c.mean, scale.dim(), "mean"),
                     broadcast(c.std, scale.dim(), "std")});
  }
  return MixtureLaw(std::move(comps));
}

namespace {

FeatureTensor to_tensor(const ScaleDescriptor& s, const std::vector<double>& z) {
  FeatureTensor t{s.label, s.h, s.w, s.c, std::vector<float>(z.size())};
  std::transform(z.begin(), z.end(), t.values.begin(), [](double v) { return static_cast<float>(v); });
  return t;
}

std::string make_id(const char* prefix, std::size_t i) {
  std::ostringstream os;
  os << prefix << '_';
  os.width(5);
  os.fill('0');
  os << i;
  return os.str();
}

Image blob_image(const SyntheticSpec& spec, Rng& rng) {
  const std::size_t n = spec.image_size;
  std::vector<double> acc(n * n, spec.background);
  for (std::size_t b = 0; b < spec.n_blobs; ++b) {
    const double cy = rng.uniform(0.0, static_cast<double>(n));
    const double cx = rng.uniform(0.0, static_cast<double>(n));
    const double sigma = rng.uniform(spec.blob_sigma_min, spec.blob_sigma_max);
    const double amp = spec.blob_amplitude * rng.uniform(0.5, 1.0);
    for (std::size_t y = 0; y < n; ++y) {
      for (std::size_t x = 0; x < n; ++x) {
        const double ry = static_cast<double>(y) + 0.5 - cy;
        const double rx = static_cast<double>(x) + 0.5 - cx;
        acc[y * n + x] += amp * std::exp(-(rx * rx + ry * ry) / (2.0 * sigma * sigma));
      }
    }
  }
  Image img{n, n, std::vector<float>(n * n)};
  for (std::size_t i = 0; i < acc.size(); ++i) {
    img.pixels[i] = static_cast<float>(std::clamp(acc[i], 0.0, 1.0));
  }
  return img;
}

SyntheticSample make_blob_sample(const SyntheticSpec& spec, std::string id, bool abnormal,
                                 Rng& rng) {
  SyntheticSample s;
  s.id = std::move(id);
  s.label = abnormal ? SampleLabel::kAbnormal : SampleLabel::kNormal;
  Image img = blob_image(spec, rng);
  if (abnormal) {
    const std::size_t span = spec.image_size - spec.anomaly_size + 1;
    const auto y0 = static_cast<std::size_t>(rng.uniform() * static_cast<double>(span)) % span;
    const auto x0 = static_cast<std::size_t>(rng.uniform() * static_cast<double>(span)) % span;
    Image mask{img.h, img.w, std::vector<float>(img.pixels.size(), 0.0f)};
    for (std::size_t y = y0; y < y0 + spec.anomaly_size; ++y) {
      for (std::size_t x = x0; x < x0 + spec.anomaly_size; ++x) {
        img.at(y, x) = static_cast<float>(spec.anomaly_value);
        mask.at(y, x) = 1.0f;
      }
    }
    s.mask = std::move(mask);
  }
  s.features = extract_baseline(img, spec.extractor_scales);
  s.image = std::move(img);
  return s;
}

}  // namespace

SyntheticDataset gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticDataset ds;
  Rng rng(spec.seed);

  // Test order interleaves the two classes deterministically.
  std::vector<bool> abnormal(spec.n_test_normal, false);
  abnormal.resize(spec.n_test_normal + spec.n_test_abnormal, true);
  std::shuffle(abnormal.begin(), abnormal.end(), rng.engine());

  if (spec.kind == SyntheticKind::kBlobImages) {
    for (std::size_t i = 0; i < spec.n_train; ++i) {
      ds.train.push_back(make_blob_sample(spec, make_id("train", i), false, rng));
    }
    for (std::size_t i = 0; i < abnormal.size(); ++i) {
      ds.test.push_back(make_blob_sample(spec, make_id("test", i), abnormal[i], rng));
    }
    return ds;
  }

  std::vector<MixtureLaw> laws;
  std::vector<std::vector<double>> shifts;
  for (const auto& sc : spec.scales) {
    laws.push_back(build_law(spec, sc));
    shifts.push_back(broadcast(spec.anomaly_shift, sc.dim(), "anomaly_shift"));
    ds.oracles.emplace(sc.label, laws.back());
  }
  auto draw = [&](std::string id, bool is_abnormal) {
    SyntheticSample s;
    s.id = std::move(id);
    s.label = is_abnormal ? SampleLabel::kAbnormal : SampleLabel::kNormal;
    for (std::size_t k = 0; k < spec.scales.size(); ++k) {
      std::vector<double> z = laws[k].sample(rng);
      if (is_abnormal) {
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = spec.anomaly_scale * z[i] + shifts[k][i];
      }
      s.features.push_back(to_tensor(spec.scales[k], z));
    }
    return s;
  };
  for (std::size_t i = 0; i < spec.n_train; ++i) ds.train.push_back(draw(make_id("train", i), false));
  for (std::size_t i = 0; i < abnormal.size(); ++i) {
    ds.test.push_back(draw(make_id("test", i), abnormal[i]));
  }
  return ds;
}

double analytic_bpd(const MixtureLaw& law, std::span<const std::vector<double>> samples) {
  if (samples.empty()) throw ConfigError("analytic_bpd: empty sample set");
  double acc = 0.0;
  for (const auto& z : samples) {
    acc += -law.logpdf(z) / (std::numbers::ln2 * static_cast<double>(z.size()));
  }
  return acc / static_cast<double>(samples.size());
}

}  // namespace adode
