// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adode/rng.hpp"

namespace adode {

// Shape of one feature scale: an h x w grid of c-channel vectors.
struct ScaleDescriptor {
  std::string label;
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t c = 0;

  std::size_t dim() const noexcept { return h * w * c; }
  std::array<std::size_t, 3> dims() const noexcept { return {h, w, c}; }
  friend bool operator==(const ScaleDescriptor&, const ScaleDescriptor&) = default;
};

// One scale's feature map, values row-major over (h, w, c).
struct FeatureTensor {
  std::string scale_id;
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t c = 0;
  std::vector<float> values;

  ScaleDescriptor descriptor() const { return {scale_id, h, w, c}; }
  std::size_t dim() const noexcept { return h * w * c; }
  // Throws DataError on size mismatch or non-finite values.
  void validate() const;
  std::vector<double> as_doubles() const { return {values.begin(), values.end()}; }
  friend bool operator==(const FeatureTensor&, const FeatureTensor&) = default;
};

// ADFT binary file: "ADFT", u32 version (1), u32 n_scales, then per scale a
// u8 label length, the UTF-8 label, u32 h, u32 w, u32 c and h*w*c float32.
// All integers and floats little-endian.
inline constexpr std::uint32_t kAdftVersion = 1;

void write_features(const std::filesystem::path& path, std::span<const FeatureTensor> tensors);
std::vector<FeatureTensor> read_features(const std::filesystem::path& path);

// In-memory codec used by the file functions.
std::vector<std::uint8_t> encode_features(std::span<const FeatureTensor> tensors);
std::vector<FeatureTensor> decode_features(std::span<const std::uint8_t> bytes);

// Single-channel float image; stored on disk as an ADFT tensor with c = 1.
struct Image {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<float> pixels;  // row-major

  float at(std::size_t y, std::size_t x) const { return pixels[y * w + x]; }
  float& at(std::size_t y, std::size_t x) { return pixels[y * w + x]; }
  FeatureTensor to_tensor(std::string label) const;
  static Image from_tensor(const FeatureTensor& t);
  friend bool operator==(const Image&, const Image&) = default;
};

void write_image(const std::filesystem::path& path, const Image& image,
                 const std::string& label = "image");
Image read_image(const std::filesystem::path& path);

// Dataset manifest (JSON). Paths are stored relative to the manifest file.
enum class SampleLabel { kNormal, kAbnormal, kUnlabeled };

std::string_view to_string(SampleLabel l);
SampleLabel sample_label_from_string(std::string_view s);

struct ManifestSample {
  std::string id;
  SampleLabel label = SampleLabel::kUnlabeled;
  std::map<std::string, std::string> features;  // scale label -> ADFT file
  std::optional<std::string> image;
  std::optional<std::string> mask;
};

struct DatasetManifest {
  std::uint32_t version = 1;
  std::vector<ManifestSample> samples;
  std::filesystem::path base_dir;  // directory the relative paths resolve against

  const ManifestSample* find(std::string_view id) const;
  std::filesystem::path resolve(const std::string& rel) const { return base_dir / rel; }
  // Scale labels present in every sample, sorted.
  std::vector<std::string> scale_labels() const;
};

// Checks unique ids; `check_files` additionally requires every referenced file to exist.
DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files = true);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

// Loads the tensor of `scale` for a sample.
FeatureTensor load_sample_features(const DatasetManifest& m, const ManifestSample& s,
                                   const std::string& scale);

// Baseline extractor: per scale, bilinear resize to resize x resize, split
// into a grid x grid array of cells and emit six channels per cell: mean,
// population std, min, max, mean horizontal difference, mean vertical difference.
struct ExtractorScale {
  std::string label;
  std::size_t resize = 0;
  std::size_t grid = 0;

  ScaleDescriptor descriptor() const { return {label, grid, grid, kBaselineChannels}; }
  static constexpr std::size_t kBaselineChannels = 6;
};

Image resize_bilinear(const Image& image, std::size_t out_h, std::size_t out_w);
std::vector<FeatureTensor> extract_baseline(const Image& image,
                                            std::span<const ExtractorScale> scales);

// Diagonal Gaussian mixture with an exact log-density.
struct MixtureComponent {
  double weight = 1.0;
  std::vector<double> mean;
  std::vector<double> std;
};

class MixtureLaw {
 public:
  explicit MixtureLaw(std::vector<MixtureComponent> components);

  std::size_t dim() const noexcept { return components_.front().mean.size(); }
  const std::vector<MixtureComponent>& components() const noexcept { return components_; }
  double logpdf(std::span<const double> z) const;
  std::vector<double> sample(Rng& rng) const;

 private:
  std::vector<MixtureComponent> components_;
};

enum class SyntheticKind { kGaussian, kGaussianMixture, kBlobImages };

std::string_view to_string(SyntheticKind k);
SyntheticKind synthetic_kind_from_string(std::string_view s);

struct SyntheticComponentSpec {
  double weight = 1.0;
  std::vector<double> mean{0.0};  // one entry broadcasts
  std::vector<double> std{1.0};
};

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::kGaussian;
  std::uint64_t seed = 0;
  std::size_t n_train = 1000;
  std::size_t n_test_normal = 250;
  std::size_t n_test_abnormal = 250;

  // gaussian / gaussian_mixture
  std::vector<ScaleDescriptor> scales{{"s0", 1, 1, 2}};
  std::vector<SyntheticComponentSpec> components{SyntheticComponentSpec{}};
  std::vector<double> anomaly_shift{0.0};  // one entry broadcasts
  double anomaly_scale = 1.0;

  // blob_images
  std::size_t image_size = 32;
  std::size_t n_blobs = 4;
  double blob_sigma_min = 3.0;
  double blob_sigma_max = 7.0;
  double blob_amplitude = 0.35;
  double background = 0.1;
  std::size_t anomaly_size = 8;
  double anomaly_value = 1.0;
  std::vector<ExtractorScale> extractor_scales{{"r32g8", 32, 8}};

  void validate() const;
};

struct SyntheticSample {
  std::string id;
  SampleLabel label = SampleLabel::kNormal;
  std::vector<FeatureTensor> features;
  std::optional<Image> image;
  std::optional<Image> mask;  // 1 inside the inserted anomaly
};

struct SyntheticDataset {
  std::vector<SyntheticSample> train;
  std::vector<SyntheticSample> test;
  // Exact density of the normal law per scale (feature kinds only).
  std::map<std::string, MixtureLaw> oracles;
};

// Builds the normal law of one scale from the component specs.
MixtureLaw build_law(const SyntheticSpec& spec, const ScaleDescriptor& scale);

SyntheticDataset gen_synthetic(const SyntheticSpec& spec);

// Mean of -logpdf / (ln 2 d) over the samples.
double analytic_bpd(const MixtureLaw& law, std::span<const std::vector<double>> samples);

}  // namespace adode
