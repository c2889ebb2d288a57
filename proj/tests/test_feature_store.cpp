// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "adode/error.hpp"
#include "adode/feature_store.hpp"
#include "adode/rng.hpp"

using namespace adode;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("adode_fs_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string error_text(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_features(bytes);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

Image constant_image(std::size_t n, float v) { return {n, n, std::vector<float>(n * n, v)}; }

}  // namespace

TEST_CASE("ADFT byte layout") {
  const FeatureTensor t{"ab", 1, 1, 2, {1.0f, -2.5f}};
  const std::vector<std::uint8_t> bytes = encode_features(std::span(&t, 1));
  const std::vector<std::uint8_t> want{
      'A', 'D', 'F', 'T', 1, 0, 0, 0, 1, 0, 0, 0,  // magic, version, n_scales
      2,   'a', 'b',                                // label
      1,   0,   0,   0, 1, 0, 0, 0, 2, 0, 0, 0,    // h, w, c
      0x00, 0x00, 0x80, 0x3f,                       // 1.0f
      0x00, 0x00, 0x20, 0xc0};                      // -2.5f
  CHECK(bytes == want);
}

TEST_CASE("ADFT round trip") {
  Rng rng(1);
  std::vector<FeatureTensor> ts;
  for (std::size_t k = 0; k < 3; ++k) {
    FeatureTensor t{"scale" + std::to_string(k), k + 1, k + 2, 3, {}};
    for (std::size_t i = 0; i < t.dim(); ++i) t.values.push_back(static_cast<float>(rng.normal()));
    ts.push_back(t);
  }
  ts[0].values[0] = -0.0f;
  ts[0].values[1] = std::numeric_limits<float>::denorm_min();
  const auto dir = scratch("roundtrip");
  write_features(dir / "f.adft", ts);
  const auto back = read_features(dir / "f.adft");
  REQUIRE(back.size() == ts.size());
  for (std::size_t k = 0; k < ts.size(); ++k) {
    CHECK(back[k].scale_id == ts[k].scale_id);
    CHECK(back[k].descriptor() == ts[k].descriptor());
    REQUIRE(back[k].values.size() == ts[k].values.size());
    for (std::size_t i = 0; i < ts[k].values.size(); ++i) {
      CHECK(std::bit_cast<std::uint32_t>(back[k].values[i]) ==
            std::bit_cast<std::uint32_t>(ts[k].values[i]));
    }
  }

  write_features(dir / "empty.adft", {});
  CHECK(std::filesystem::file_size(dir / "empty.adft") == 12);
  CHECK(read_features(dir / "empty.adft").empty());
  std::filesystem::remove_all(dir);
}

TEST_CASE("ADFT format errors") {
  const FeatureTensor t{"x", 2, 2, 1, {1, 2, 3, 4}};
  const std::vector<std::uint8_t> good = encode_features(std::span(&t, 1));

  SUBCASE("truncated payload names the offset") {
    std::vector<std::uint8_t> cut(good.begin(), good.end() - 6);
    const std::string msg = error_text(cut);
    CHECK(msg.find("truncated") != std::string::npos);
    CHECK(msg.find("byte offset 26") != std::string::npos);
  }
  SUBCASE("bad magic") {
    std::vector<std::uint8_t> bad = good;
    bad[0] = 'X';
    CHECK(error_text(bad).find("bad magic") != std::string::npos);
  }
  SUBCASE("unsupported version") {
    std::vector<std::uint8_t> bad = good;
    bad[4] = 2;
    CHECK(error_text(bad).find("version") != std::string::npos);
  }
  SUBCASE("dimension overflow") {
    std::vector<std::uint8_t> bad = good;
    for (int i = 15; i < 27; ++i) bad[i] = 0xff;
    CHECK_FALSE(error_text(bad).empty());
  }
  SUBCASE("trailing bytes") {
    std::vector<std::uint8_t> bad = good;
    bad.push_back(0);
    CHECK(error_text(bad).find("trailing") != std::string::npos);
  }
  SUBCASE("non-finite values are rejected") {
    FeatureTensor nan{"x", 1, 1, 1, {std::numeric_limits<float>::quiet_NaN()}};
    CHECK_THROWS_AS(encode_features(std::span(&nan, 1)), DataError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(read_features("/nonexistent/f.adft"), DataError); }
}

TEST_CASE("manifest") {
  const auto dir = scratch("manifest");
  const FeatureTensor t{"s0", 1, 1, 2, {0.5f, 1.5f}};
  write_features(dir / "a.adft", std::span(&t, 1));
  write_features(dir / "b.adft", std::span(&t, 1));

  DatasetManifest m;
  m.samples.push_back({"a", SampleLabel::kNormal, {{"s0", "a.adft"}}, std::nullopt, std::nullopt});
  m.samples.push_back({"b", SampleLabel::kAbnormal, {{"s0", "b.adft"}}, std::nullopt, std::nullopt});
  save_manifest(dir / "manifest.json", m);

  // Relocating the directory keeps the manifest valid.
  const auto moved = dir.string() + "_moved";
  std::filesystem::remove_all(moved);
  std::filesystem::rename(dir, moved);
  const DatasetManifest back = load_manifest(std::filesystem::path(moved) / "manifest.json");
  REQUIRE(back.samples.size() == 2);
  CHECK(back.samples[1].label == SampleLabel::kAbnormal);
  CHECK(back.scale_labels() == std::vector<std::string>{"s0"});
  CHECK(load_sample_features(back, *back.find("b"), "s0") == t);
  CHECK(back.find("zzz") == nullptr);
  CHECK_THROWS_AS(load_sample_features(back, *back.find("a"), "s1"), DataError);

  SUBCASE("duplicate ids") {
    DatasetManifest dup = m;
    dup.samples[1].id = "a";
    save_manifest(std::filesystem::path(moved) / "dup.json", dup);
    CHECK_THROWS_AS(load_manifest(std::filesystem::path(moved) / "dup.json"), DataError);
  }
  SUBCASE("missing referenced file") {
    std::filesystem::remove(std::filesystem::path(moved) / "b.adft");
    CHECK_THROWS_AS(load_manifest(std::filesystem::path(moved) / "manifest.json"), DataError);
    CHECK_NOTHROW(load_manifest(std::filesystem::path(moved) / "manifest.json", false));
  }
  SUBCASE("unknown label") {
    std::ofstream(std::filesystem::path(moved) / "bad.json")
        << R"({"version": 1, "samples": [{"id": "a", "label": "weird", "features": {}}]})";
    CHECK_THROWS_AS(load_manifest(std::filesystem::path(moved) / "bad.json"), DataError);
  }
  std::filesystem::remove_all(moved);
}

TEST_CASE("baseline extractor") {
  SUBCASE("constant image") {
    const std::vector<ExtractorScale> sc{{"a", 16, 4}};
    const auto out = extract_baseline(constant_image(16, 0.3f), sc);
    REQUIRE(out.size() == 1);
    CHECK(out[0].descriptor() == ScaleDescriptor{"a", 4, 4, 6});
    for (std::size_t cell = 0; cell < 16; ++cell) {
      const float* v = &out[0].values[cell * 6];
      CHECK(v[0] == doctest::Approx(0.3).epsilon(1e-6));
      CHECK(v[1] == doctest::Approx(0.0).epsilon(1e-6));
      CHECK(v[2] == v[3]);
      CHECK(v[2] == doctest::Approx(0.3).epsilon(1e-6));
      CHECK(v[4] == 0.0f);
      CHECK(v[5] == 0.0f);
    }
  }
  SUBCASE("vertical step") {
    Image img = constant_image(8, 0.0f);
    for (std::size_t y = 0; y < 8; ++y) {
      for (std::size_t x = 4; x < 8; ++x) img.at(y, x) = 1.0f;
    }
    const std::vector<ExtractorScale> sc{{"a", 8, 2}};
    const auto out = extract_baseline(img, sc);
    for (std::size_t gy = 0; gy < 2; ++gy) {
      CHECK(out[0].values[(gy * 2 + 0) * 6] == doctest::Approx(0.0));
      CHECK(out[0].values[(gy * 2 + 1) * 6] == doctest::Approx(1.0));
    }
  }
  SUBCASE("output dims and multiple scales") {
    const std::vector<ExtractorScale> sc{{"big", 64, 2}, {"small", 16, 8}};
    const auto out = extract_baseline(constant_image(32, 0.5f), sc);
    REQUIRE(out.size() == 2);
    CHECK(out[0].descriptor() == ScaleDescriptor{"big", 2, 2, 6});
    CHECK(out[1].descriptor() == ScaleDescriptor{"small", 8, 8, 6});
  }
  SUBCASE("grid must divide the resize") {
    const std::vector<ExtractorScale> sc{{"a", 10, 3}};
    CHECK_THROWS_AS(extract_baseline(constant_image(10, 0.f), sc), ConfigError);
    CHECK_THROWS_AS(extract_baseline(Image{}, std::vector<ExtractorScale>{{"a", 8, 2}}), ConfigError);
  }
  SUBCASE("insensitive to tiny perturbations") {
    Rng rng(2);
    Image img = constant_image(32, 0.0f);
    for (float& p : img.pixels) p = static_cast<float>(rng.uniform());
    Image noisy = img;
    for (float& p : noisy.pixels) p += static_cast<float>(1e-9 * rng.normal());
    const std::vector<ExtractorScale> sc{{"a", 32, 8}, {"b", 24, 4}};
    const auto a = extract_baseline(img, sc);
    const auto b = extract_baseline(noisy, sc);
    for (std::size_t k = 0; k < a.size(); ++k) {
      for (std::size_t i = 0; i < a[k].values.size(); ++i) {
        CHECK(std::abs(a[k].values[i] - b[k].values[i]) <= 1e-6);
      }
    }
  }
}

TEST_CASE("resize_bilinear") {
  Rng rng(3);
  Image img{5, 7, std::vector<float>(35)};
  for (float& p : img.pixels) p = static_cast<float>(rng.uniform());
  CHECK(resize_bilinear(img, 5, 7) == img);
  const Image up = resize_bilinear(constant_image(4, 0.7f), 9, 9);
  for (float p : up.pixels) CHECK(p == doctest::Approx(0.7f));
}

TEST_CASE("synthetic oracles") {
  SUBCASE("gaussian density at the mean") {
    SyntheticSpec spec;
    spec.components = {{1.0, {1.0, -2.0}, {0.5, 2.0}}};
    const MixtureLaw law = build_law(spec, {"s", 1, 1, 2});
    const double want = -std::log(2.0 * std::numbers::pi) - std::log(0.5) - std::log(2.0);
    CHECK(law.logpdf(std::vector<double>{1.0, -2.0}) == doctest::Approx(want).epsilon(1e-14));
  }
  SUBCASE("single component mixture equals the gaussian") {
    SyntheticSpec g;
    g.components = {{1.0, {0.3}, {1.5}}};
    SyntheticSpec m = g;
    m.kind = SyntheticKind::kGaussianMixture;
    const ScaleDescriptor s{"s", 2, 1, 2};
    const MixtureLaw a = build_law(g, s), b = build_law(m, s);
    Rng rng(4);
    for (int k = 0; k < 20; ++k) {
      const auto z = a.sample(rng);
      CHECK(a.logpdf(z) == b.logpdf(z));
    }
  }
  SUBCASE("symmetric mixture") {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::kGaussianMixture;
    spec.components = {{0.5, {2.0, -1.0, 0.5}, {1.0}}, {0.5, {-2.0, 1.0, -0.5}, {1.0}}};
    const MixtureLaw law = build_law(spec, {"s", 1, 1, 3});
    Rng rng(5);
    for (int k = 0; k < 100; ++k) {
      std::vector<double> z(3), nz(3);
      for (int i = 0; i < 3; ++i) {
        z[i] = 3.0 * rng.normal();
        nz[i] = -z[i];
      }
      CHECK(law.logpdf(z) == doctest::Approx(law.logpdf(nz)).epsilon(1e-13));
    }
  }
  SUBCASE("invalid laws") {
    CHECK_THROWS_AS(MixtureLaw({{0.5, {0.0}, {1.0}}}), ConfigError);
    CHECK_THROWS_AS(MixtureLaw({{1.0, {0.0}, {0.0}}}), ConfigError);
  }
}

TEST_CASE("analytic_bpd") {
  const MixtureLaw unit({{1.0, {0.0}, {1.0}}});
  Rng rng(6);
  std::vector<std::vector<double>> xs;
  for (int i = 0; i < 100000; ++i) xs.push_back(unit.sample(rng));
  const double bpd = analytic_bpd(unit, xs);
  CHECK(std::abs(bpd - 0.5 * std::log2(2.0 * std::numbers::pi * std::numbers::e)) <= 0.02);

  const MixtureLaw doubled({{1.0, {0.0}, {2.0}}});
  std::vector<std::vector<double>> ys = xs;
  for (auto& y : ys) y[0] *= 2.0;
  CHECK(analytic_bpd(doubled, ys) == doctest::Approx(bpd + 1.0).epsilon(1e-12));

  CHECK_THROWS_AS(analytic_bpd(unit, std::vector<std::vector<double>>{}), ConfigError);
}

TEST_CASE("gen_synthetic") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::kGaussianMixture;
  spec.seed = 42;
  spec.n_train = 50;
  spec.n_test_normal = 10;
  spec.n_test_abnormal = 15;
  spec.scales = {{"a", 1, 1, 3}, {"b", 2, 2, 1}};
  spec.components = {{0.5, {1.0}, {1.0}}, {0.5, {-1.0}, {1.0}}};
  spec.anomaly_shift = {2.5};
  const SyntheticDataset a = gen_synthetic(spec);
  const SyntheticDataset b = gen_synthetic(spec);
  CHECK(a.train.size() == 50);
  CHECK(a.test.size() == 25);
  std::size_t abnormal = 0;
  for (const auto& s : a.test) abnormal += s.label == SampleLabel::kAbnormal ? 1 : 0;
  CHECK(abnormal == 15);
  for (const auto& s : a.train) CHECK(s.label == SampleLabel::kNormal);
  CHECK(a.oracles.size() == 2);
  for (std::size_t i = 0; i < a.test.size(); ++i) {
    CHECK(a.test[i].id == b.test[i].id);
    CHECK(a.test[i].features == b.test[i].features);
  }

  SUBCASE("blob images carry masks only when abnormal") {
    SyntheticSpec blob;
    blob.kind = SyntheticKind::kBlobImages;
    blob.seed = 3;
    blob.n_train = 2;
    blob.n_test_normal = 2;
    blob.n_test_abnormal = 2;
    const SyntheticDataset ds = gen_synthetic(blob);
    for (const auto& s : ds.test) {
      REQUIRE(s.image.has_value());
      CHECK(s.mask.has_value() == (s.label == SampleLabel::kAbnormal));
      if (s.mask) {
        double inside = 0.0;
        for (float v : s.mask->pixels) inside += v;
        CHECK(inside == 64.0);
      }
      CHECK(s.features[0].descriptor() == ScaleDescriptor{"r32g8", 8, 8, 6});
    }
  }
}
