// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "hand3d/dataset_io.hpp"
#include "test_util.hpp"

using namespace hand3d;
using hand3d::testing::TempDir;
using hand3d::testing::fixture_dir;

namespace {

template <typename Fn>
Errc error_code_of(Fn fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return Errc::InvalidArgument;
}

nlohmann::json minimal_manifest() {
  return nlohmann::json::parse(R"({
    "schema_version": 1, "clip_id": "c1", "source": "unit", "fps": 30, "task_text": "Wave.",
    "frames": [{
      "timestamp_s": 0.0,
      "intrinsics": {"fx": 100, "fy": 100, "cx": 32, "cy": 24, "width": 64, "height": 48},
      "pose": {"rotation": [1,0,0, 0,1,0, 0,0,1], "translation": [0, 0, 0.5]},
      "hands": {"left": [)" + [] {
    std::string s;
    for (int j = 0; j < 21; ++j) s += std::string(j ? "," : "") + "[0.01, 0.02, 0.6]";
    return s;
  }() + R"(]},
      "objects": [{"label": "cup", "bbox": [1, 2, 10, 12]}],
      "hand_meta": {"mano_pose": [0.1, 0.2]}
    }]
  })");
}

}  // namespace

TEST(DatasetIo, RasterRoundTripBitExact) {
  PointRaster r(2, 2);
  r.at(0, 0) = {1.5f, -2.25f, 3.0f};
  r.at(1, 0) = {0.1f, 0.2f, 0.3f};
  r.at(1, 1) = {-0.0f, 1e-30f, 7.0f};
  const auto bytes = encode_raster(r);
  ASSERT_EQ(bytes.size(), 14u + 4 * 12);
  EXPECT_EQ(std::memcmp(bytes.data(), "PC3R", 4), 0);
  const PointRaster back = decode_raster(bytes);
  EXPECT_EQ(back.width, 2u);
  EXPECT_EQ(back.height, 2u);
  EXPECT_EQ(encode_raster(back), bytes);
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    EXPECT_EQ(PointRaster::is_nan_pixel(back.points[i]), PointRaster::is_nan_pixel(r.points[i]));
    if (!PointRaster::is_nan_pixel(r.points[i])) EXPECT_EQ(back.points[i], r.points[i]);
  }
  EXPECT_TRUE(std::signbit(back.at(1, 1).x));
}

TEST(DatasetIo, NanPixelIsCanonicalOnDisk) {
  PointRaster r(1, 1);
  r.at(0, 0) = {1.0, std::nan(""), 2.0};  // partly NaN counts as invalid
  const auto bytes = encode_raster(r);
  for (int a = 0; a < 3; ++a) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= std::uint32_t{bytes[14 + 4 * a + b]} << (8 * b);
    EXPECT_EQ(bits, kCanonicalNaNBits);
  }
  const PointRaster back = decode_raster(bytes);
  EXPECT_TRUE(PointRaster::is_nan_pixel(back.at(0, 0)));
  EXPECT_FALSE(back.is_valid(0, 0));
}

TEST(DatasetIo, RasterFileRoundTrip) {
  TempDir dir;
  PointRaster r(3, 2);
  r.at(2, 1) = {0.5, 0.25, 1.0};
  write_raster(r, dir / "r.pc3r");
  EXPECT_EQ(encode_raster(read_raster(dir / "r.pc3r")), encode_raster(r));
  EXPECT_EQ(error_code_of([&] { read_raster(dir / "missing.pc3r"); }), Errc::IoError);
}

TEST(DatasetIo, RasterDecodeErrors) {
  auto bytes = encode_raster(PointRaster(4, 4));
  auto shortened = bytes;
  shortened.resize(bytes.size() - 12);
  EXPECT_EQ(error_code_of([&] { decode_raster(shortened); }), Errc::TruncatedFile);
  auto longer = bytes;
  longer.push_back(0);
  EXPECT_EQ(error_code_of([&] { decode_raster(longer); }), Errc::DimensionMismatch);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(error_code_of([&] { decode_raster(bad); }), Errc::BadMagic);
  auto version = bytes;
  version[4] = 2;
  EXPECT_EQ(error_code_of([&] { decode_raster(version); }), Errc::BadMagic);
  EXPECT_EQ(error_code_of([&] { decode_raster(std::vector<std::uint8_t>{'P', 'C'}); }), Errc::TruncatedFile);
}

TEST(DatasetIo, RandomRastersRoundTrip) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> dim(1, 9);
  std::uniform_real_distribution<float> v(-5, 5);
  std::bernoulli_distribution nan(0.2);
  for (int i = 0; i < 100; ++i) {
    PointRaster r(static_cast<std::uint32_t>(dim(rng)), static_cast<std::uint32_t>(dim(rng)));
    for (auto& p : r.points) p = nan(rng) ? PointRaster::invalid_point() : Vec3{v(rng), v(rng), v(rng)};
    const auto bytes = encode_raster(r);
    EXPECT_EQ(encode_raster(decode_raster(bytes)), bytes);
  }
}

TEST(DatasetIo, ManifestRoundTrip) {
  TempDir dir;
  const ClipManifest m = parse_manifest(minimal_manifest(), dir.path());
  ASSERT_EQ(m.frames.size(), 1u);
  EXPECT_EQ(m.clip_id, "c1");
  EXPECT_EQ(m.frames[0].intrinsics.width, 64);
  EXPECT_TRUE(m.frames[0].left_world.has_value());
  EXPECT_FALSE(m.frames[0].right_world.has_value());
  EXPECT_EQ(m.frames[0].objects.at(0).label, "cup");
  const auto hand = m.frames[0].hand_in_camera(HandSide::Left);
  ASSERT_TRUE(hand.has_value());
  EXPECT_DOUBLE_EQ(hand->joints[0].z, 1.1);

  write_manifest(m, dir / "manifest.json");
  const ClipManifest back = load_manifest(dir / "manifest.json");
  EXPECT_EQ(manifest_to_json(back).dump(), manifest_to_json(m).dump());
  EXPECT_EQ(back.frames[0].hand_meta->value["mano_pose"][1], 0.2);
}

TEST(DatasetIo, ManifestSchemaErrors) {
  auto j = minimal_manifest();
  j["frames"][0].erase("intrinsics");
  try {
    parse_manifest(j, ".");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SchemaError);
    EXPECT_NE(e.where().find("$.frames[0]"), std::string::npos);
  }

  auto bad_rot = minimal_manifest();
  bad_rot["frames"][0]["pose"]["rotation"] = {2, 0, 0, 0, 1, 0, 0, 0, 1};
  EXPECT_THROW(parse_manifest(bad_rot, "."), Error);

  auto off_grid = minimal_manifest();
  off_grid["frames"][0]["timestamp_s"] = 0.017;
  EXPECT_EQ(error_code_of([&] { parse_manifest(off_grid, "."); }), Errc::SchemaError);

  auto missing_raster = minimal_manifest();
  missing_raster["frames"][0]["raster"] = "nope.pc3r";
  EXPECT_EQ(error_code_of([&] { parse_manifest(missing_raster, "/nonexistent"); }), Errc::MissingRaster);
  EXPECT_NO_THROW(parse_manifest(missing_raster, "/nonexistent", false));

  TempDir dir;
  write_text_file(dir / "broken.json", "{\"clip_id\": ");
  EXPECT_EQ(error_code_of([&] { load_manifest(dir / "broken.json"); }), Errc::ParseError);
  EXPECT_EQ(error_code_of([&] { load_manifest(dir / "absent.json"); }), Errc::IoError);
}

TEST(DatasetIo, GoldenFixtureParses) {
  const ClipManifest m = load_manifest(fixture_dir() / "mini_clip" / "manifest.json");
  EXPECT_EQ(m.clip_id, "mini-clip");
  EXPECT_EQ(m.frames.size(), 3u);
  for (const auto& f : m.frames) {
    ASSERT_TRUE(f.raster_path.has_value());
    const PointRaster r = read_raster(*f.raster_path);
    EXPECT_EQ(r.width, 128u);
    EXPECT_EQ(r.height, 96u);
  }
}

TEST(DatasetIo, SampleFrames) {
  std::vector<double> ts;
  for (int i = 0; i < 90; ++i) ts.push_back(i / 30.0);
  EXPECT_EQ(sample_frame_times(ts, 1.0), (std::vector<std::size_t>{0, 30, 60}));
  std::vector<std::size_t> all(90);
  for (std::size_t i = 0; i < 90; ++i) all[i] = i;
  EXPECT_EQ(sample_frame_times(ts, 30.0), all);
  EXPECT_EQ(sample_frame_times(ts, 60.0), all);
  EXPECT_THROW(sample_frame_times(ts, 0.0), Error);
}

TEST(DatasetIo, SampleFramesNtscMatchesBruteForce) {
  const double fps = 30000.0 / 1001.0;
  std::vector<double> ts;
  for (int i = 0; i < 1000; ++i) ts.push_back(i / fps);
  for (double rate : {1.0, 2.5, 7.0}) {
    std::vector<std::size_t> expected;
    for (int k = 0; k / rate <= ts.back() + 1e-9; ++k) {
      const double target = k / rate;
      std::size_t best = 0;
      for (std::size_t i = 1; i < ts.size(); ++i)
        if (std::abs(ts[i] - target) < std::abs(ts[best] - target)) best = i;
      if (expected.empty() || expected.back() != best) expected.push_back(best);
    }
    EXPECT_EQ(sample_frame_times(ts, rate), expected) << "rate " << rate;
  }
}

TEST(DatasetIo, ChunkClip) {
  std::vector<double> ts;
  for (int i = 0; i < 750; ++i) ts.push_back(i / 30.0);  // 25 s
  const auto spans = chunk_frame_times(ts, 10.0);
  ASSERT_EQ(spans.size(), 3u);
  EXPECT_EQ(spans[0], (FrameSpan{0, 300}));
  EXPECT_EQ(spans[1], (FrameSpan{300, 600}));
  EXPECT_EQ(spans[2], (FrameSpan{600, 750}));
  EXPECT_EQ(chunk_frame_times(std::span(ts).first(300), 10.0).size(), 1u);

  // Brute-force partition on an irregular clock.
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> dt(0.01, 0.7);
  std::vector<double> irregular{0.0};
  while (irregular.size() < 400) irregular.push_back(irregular.back() + dt(rng));
  for (double s : {0.5, 3.0, 10.0}) {
    const auto got = chunk_frame_times(irregular, s);
    std::size_t covered = 0;
    for (const auto& sp : got) {
      EXPECT_EQ(sp.begin, covered);
      covered = sp.end;
      const auto id = static_cast<long>(std::floor(irregular[sp.begin] / s));
      for (std::size_t i = sp.begin; i < sp.end; ++i) EXPECT_EQ(static_cast<long>(std::floor(irregular[i] / s)), id);
      EXPECT_LE(irregular[sp.end - 1] - irregular[sp.begin], s);
    }
    EXPECT_EQ(covered, irregular.size());
  }
}

TEST(DatasetIo, JsonlEmission) {
  TempDir dir;
  emit_jsonl({}, dir / "empty.jsonl");
  EXPECT_EQ(read_file_bytes(dir / "empty.jsonl").size(), 0u);

  std::vector<nlohmann::ordered_json> recs;
  for (int i = 0; i < 3; ++i) recs.push_back({{"schema_version", 1}, {"id", "r" + std::to_string(i)}, {"z", 0.1 * i}});
  emit_jsonl(recs, dir / "a.jsonl");
  emit_jsonl(recs, dir / "b.jsonl");
  const auto a = read_file_bytes(dir / "a.jsonl");
  EXPECT_EQ(a, read_file_bytes(dir / "b.jsonl"));
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 3);
  EXPECT_EQ(read_jsonl(dir / "a.jsonl").size(), 3u);

  write_text_file(dir / "bad.jsonl", "{\"a\": 1}\n{oops\n");
  try {
    read_jsonl(dir / "bad.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ParseError);
    EXPECT_NE(e.where().find(":2"), std::string::npos);
  }
}

TEST(DatasetIo, TokenizerJsonRoundTrip) {
  TokenizerConfig cfg;
  cfg.k_bins = 64;
  cfg.z = {0.1, 0.9};
  const TokenizerConfig back = tokenizer_from_json(nlohmann::json::parse(tokenizer_json(cfg).dump()));
  EXPECT_EQ(back.k_bins, 64);
  EXPECT_EQ(back.z.min, 0.1);
  EXPECT_EQ(back.z.max, 0.9);
}

TEST(DatasetIo, ReportProportions) {
  CorpusCounts c;
  c.add("a", "x", 50);
  c.add("b", "y", 30);
  c.add("c", "z", 20);
  const CorpusReport r = make_report(c);
  ASSERT_EQ(r.categories.size(), 3u);
  EXPECT_EQ(r.categories[0].proportion_pct, 50.0);
  EXPECT_EQ(r.categories[1].proportion_pct, 30.0);
  EXPECT_EQ(r.categories[2].proportion_pct, 20.0);

  const CorpusReport empty = make_report({});
  EXPECT_EQ(empty.total, 0u);
  EXPECT_TRUE(empty.categories.empty());
  EXPECT_EQ(report_json(empty).dump(), R"({"total":0,"sources":[],"categories":[]})");
}

TEST(DatasetIo, ReportHalfUpRounding) {
  // 18867 / 300368 = 6.2813...% rounds to 6.3.
  EXPECT_EQ(proportion_one_decimal(206409, 300368), 68.7);
  EXPECT_EQ(proportion_one_decimal(74887, 300368), 24.9);
  EXPECT_EQ(proportion_one_decimal(18867, 300368), 6.3);
  EXPECT_EQ(proportion_one_decimal(205, 300368), 0.1);
  EXPECT_EQ(proportion_one_decimal(1, 8), 12.5);
  EXPECT_EQ(proportion_one_decimal(1, 16), 6.3);  // 6.25 exactly, half-up
}

TEST(DatasetIo, ReportProportionsSumNear100) {
  std::mt19937_64 rng(15);
  std::uniform_int_distribution<int> n(1, 100000), k(1, 6);
  for (int trial = 0; trial < 500; ++trial) {
    CorpusCounts c;
    const int groups = k(rng);
    for (int g = 0; g < groups; ++g) c.add("s" + std::to_string(g), "c" + std::to_string(g), static_cast<std::uint64_t>(n(rng)));
    std::uint64_t raw = 0;
    double pct = 0.0;
    for (const auto& e : make_report(c).categories) {
      raw += e.count;
      pct += e.proportion_pct;
    }
    EXPECT_EQ(raw, c.total);
    EXPECT_LE(std::abs(pct - 100.0), 0.1 * groups / 2.0 + 1e-9);
  }
}

TEST(DatasetIo, CountCorpusMergesAssociatively) {
  TempDir dir;
  write_text_file(dir / "v.jsonl", "{\"source\":\"s1\",\"category\":\"hand_movement\"}\n{\"source\":\"s2\",\"category\":\"camera_movement\"}\n");
  write_text_file(dir / "a.jsonl", "{\"source\":\"s1\",\"tokens\":[1,2,3]}\n");
  const std::vector<std::filesystem::path> both{dir / "v.jsonl", dir / "a.jsonl"};
  const CorpusCounts all = count_corpus(both);
  CorpusCounts merged = count_corpus(std::span(both).first(1));
  merged.merge(count_corpus(std::span(both).subspan(1)));
  EXPECT_EQ(all.by_category, merged.by_category);
  EXPECT_EQ(all.by_source, merged.by_source);
  EXPECT_EQ(all.by_category.at("action"), 1u);
  EXPECT_EQ(all.total, 3u);
}
