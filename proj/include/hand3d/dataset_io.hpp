// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hand3d/error.hpp"
#include "hand3d/geometry.hpp"
#include "hand3d/hand_kinematics.hpp"
#include "hand3d/motion_tokens.hpp"
#include "hand3d/scale_calibration.hpp"
#include "hand3d/spatial_labeling.hpp"
#include "hand3d/vqa_generator.hpp"

namespace hand3d {

inline constexpr int kManifestSchemaVersion = 1;
inline constexpr int kRecordSchemaVersion = 1;

/// Source MANO parameters carried through untouched.
struct RawHandMeta {
  nlohmann::json value;
};

using JointSet = std::array<Vec3, kNumJoints>;

struct ManifestFrame {
  double timestamp_s = 0.0;
  CameraIntrinsics intrinsics;
  CameraPose pose;  // world-to-camera
  std::optional<JointSet> left_world;
  std::optional<JointSet> right_world;
  std::optional<std::filesystem::path> raster_path;  // resolved against the manifest directory
  std::vector<BBox2D> objects;
  std::optional<RawHandMeta> hand_meta;

  const std::optional<JointSet>& hand_world(HandSide side) const {
    return side == HandSide::Left ? left_world : right_world;
  }
  std::optional<JointSet>& hand_world(HandSide side) { return side == HandSide::Left ? left_world : right_world; }

  /// Hand joints in this frame's camera coordinates.
  std::optional<HandFrame> hand_in_camera(HandSide side) const { return hand_in_camera(side, pose); }

  /// Hand joints expressed in the camera frame of `reference` (another frame's pose).
  std::optional<HandFrame> hand_in_camera(HandSide side, const CameraPose& reference) const {
    const auto& world = hand_world(side);
    if (!world) return std::nullopt;
    HandFrame hf;
    hf.side = side;
    hf.timestamp_s = timestamp_s;
    for (int j = 0; j < kNumJoints; ++j) hf.joints[j] = transform_to_camera((*world)[j], reference);
    return hf;
  }
};

struct ClipManifest {
  std::string clip_id;
  std::string source_name;
  double fps = 30.0;
  std::string task_text;
  std::vector<ManifestFrame> frames;
};

// ---------------------------------------------------------------------------
// Point raster codec: "PC3R", u16 version, u32 width, u32 height, then
// height*width*3 float32, all little-endian, row-major (x, y, z).

inline constexpr std::array<char, 4> kRasterMagic{'P', 'C', '3', 'R'};
inline constexpr std::uint16_t kRasterVersion = 1;
inline constexpr std::size_t kRasterHeaderSize = 4 + 2 + 4 + 4;
inline constexpr std::uint32_t kCanonicalNaNBits = 0x7FC00000u;

namespace detail {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(p[i]) << (8 * i));
  return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_raster(const PointRaster& raster) {
  raster.check_dimensions();
  std::vector<std::uint8_t> out;
  out.reserve(kRasterHeaderSize + raster.points.size() * 12);
  out.insert(out.end(), kRasterMagic.begin(), kRasterMagic.end());
  detail::put_le<std::uint16_t>(out, kRasterVersion);
  detail::put_le<std::uint32_t>(out, raster.width);
  detail::put_le<std::uint32_t>(out, raster.height);
  for (const Vec3& p : raster.points) {
    const bool invalid = PointRaster::is_nan_pixel(p);
    for (int a = 0; a < 3; ++a) {
      const std::uint32_t bits =
          invalid ? kCanonicalNaNBits : std::bit_cast<std::uint32_t>(static_cast<float>(p[a]));
      detail::put_le<std::uint32_t>(out, bits);
    }
  }
  return out;
}

inline PointRaster decode_raster(std::span<const std::uint8_t> bytes, const std::string& name = {}) {
  if (bytes.size() < kRasterHeaderSize) {
    if (bytes.size() >= 4 && !std::equal(kRasterMagic.begin(), kRasterMagic.end(), bytes.begin()))
      throw Error(Errc::BadMagic, "not a PC3R raster", name);
    throw Error(Errc::TruncatedFile, "raster header is truncated", name);
  }
  if (!std::equal(kRasterMagic.begin(), kRasterMagic.end(), bytes.begin()))
    throw Error(Errc::BadMagic, "not a PC3R raster", name);
  const auto version = detail::get_le<std::uint16_t>(bytes.data() + 4);
  if (version != kRasterVersion)
    throw Error(Errc::BadMagic, "unsupported PC3R version " + std::to_string(version), name);
  PointRaster r;
  r.width = detail::get_le<std::uint32_t>(bytes.data() + 6);
  r.height = detail::get_le<std::uint32_t>(bytes.data() + 10);
  const std::uint64_t payload = std::uint64_t{r.width} * r.height * 12;
  const std::uint64_t available = bytes.size() - kRasterHeaderSize;
  if (available < payload) throw Error(Errc::TruncatedFile, "raster payload is shorter than width x height", name);
  if (available > payload) throw Error(Errc::DimensionMismatch, "raster payload is longer than width x height", name);
  r.points.resize(std::size_t{r.width} * r.height);
  const std::uint8_t* p = bytes.data() + kRasterHeaderSize;
  for (Vec3& pt : r.points) {
    for (int a = 0; a < 3; ++a, p += 4) pt[a] = std::bit_cast<float>(detail::get_le<std::uint32_t>(p));
    if (PointRaster::is_nan_pixel(pt)) pt = PointRaster::invalid_point();
  }
  return r;
}

inline void write_raster(const PointRaster& raster, const std::filesystem::path& path) {
  const auto bytes = encode_raster(raster);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(Errc::IoError, "cannot open raster for writing", path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error(Errc::IoError, "failed writing raster", path.string());
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::IoError, "cannot open file", path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline PointRaster read_raster(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_raster(bytes, path.string());
}

// ---------------------------------------------------------------------------
// Manifest JSON.

namespace detail {

using nlohmann::json;

inline const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw Error(Errc::SchemaError, "expected an object", path);
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(Errc::SchemaError, std::string("missing field '") + key + "'", path);
  return *it;
}

inline double get_number(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number()) throw Error(Errc::SchemaError, "expected a number", path + "." + key);
  return v.get<double>();
}

inline std::string get_string(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_string()) throw Error(Errc::SchemaError, "expected a string", path + "." + key);
  return v.get<std::string>();
}

inline Vec3 parse_vec3(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) throw Error(Errc::SchemaError, "expected [x, y, z]", path);
  Vec3 out;
  for (int a = 0; a < 3; ++a) {
    if (!v[a].is_number()) throw Error(Errc::SchemaError, "expected a number", path + "[" + std::to_string(a) + "]");
    out[a] = v[a].get<double>();
  }
  if (!out.finite()) throw Error(Errc::SchemaError, "non-finite coordinate", path);
  return out;
}

inline json vec3_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

inline CameraIntrinsics parse_intrinsics(const json& j, const std::string& path) {
  CameraIntrinsics k;
  k.fx = get_number(j, "fx", path);
  k.fy = get_number(j, "fy", path);
  k.cx = get_number(j, "cx", path);
  k.cy = get_number(j, "cy", path);
  k.width = static_cast<int>(get_number(j, "width", path));
  k.height = static_cast<int>(get_number(j, "height", path));
  try {
    k.validate();
  } catch (const Error& e) {
    throw Error(Errc::SchemaError, e.what(), path);
  }
  return k;
}

inline CameraPose parse_pose(const json& j, const std::string& path) {
  const json& rot = require(j, "rotation", path);
  if (!rot.is_array() || rot.size() != 9)
    throw Error(Errc::SchemaError, "rotation must be 9 numbers, row-major", path + ".rotation");
  Mat3 m{};
  for (int i = 0; i < 9; ++i) {
    if (!rot[i].is_number()) throw Error(Errc::SchemaError, "expected a number", path + ".rotation");
    m[i / 3][i % 3] = rot[i].get<double>();
  }
  CameraPose pose;
  try {
    pose.rotation = Rotation3::from_matrix(m);
  } catch (const Error&) {
    throw Error(Errc::SchemaError, "rotation is not orthonormal", path + ".rotation");
  }
  pose.translation = parse_vec3(require(j, "translation", path), path + ".translation");
  return pose;
}

inline JointSet parse_joints(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != kNumJoints) throw Error(Errc::SchemaError, "expected 21 joints", path);
  JointSet out{};
  for (int i = 0; i < kNumJoints; ++i) out[i] = parse_vec3(j[i], path + "[" + std::to_string(i) + "]");
  return out;
}

}  // namespace detail

inline ClipManifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir,
                                   bool check_rasters = true) {
  using detail::get_number;
  using detail::get_string;
  using detail::require;
  ClipManifest m;
  m.clip_id = get_string(j, "clip_id", "$");
  m.source_name = get_string(j, "source", "$");
  m.fps = get_number(j, "fps", "$");
  if (!(m.fps > 0.0) || !std::isfinite(m.fps)) throw Error(Errc::SchemaError, "fps must be positive", "$.fps");
  if (j.contains("task_text")) m.task_text = get_string(j, "task_text", "$");
  const auto& frames = require(j, "frames", "$");
  if (!frames.is_array()) throw Error(Errc::SchemaError, "frames must be an array", "$.frames");

  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string path = "$.frames[" + std::to_string(i) + "]";
    const auto& fj = frames[i];
    ManifestFrame f;
    f.timestamp_s = get_number(fj, "timestamp_s", path);
    if (!(f.timestamp_s >= 0.0)) throw Error(Errc::SchemaError, "timestamp must be non-negative", path);
    if (!m.frames.empty() && !(f.timestamp_s > m.frames.back().timestamp_s))
      throw Error(Errc::SchemaError, "timestamps must be strictly increasing", path + ".timestamp_s");
    const double grid = std::round(f.timestamp_s * m.fps) / m.fps;
    if (std::abs(grid - f.timestamp_s) > 1e-3)
      throw Error(Errc::SchemaError, "timestamp is not on the fps grid (1 ms tolerance)", path + ".timestamp_s");
    f.intrinsics = detail::parse_intrinsics(require(fj, "intrinsics", path), path + ".intrinsics");
    f.pose = detail::parse_pose(require(fj, "pose", path), path + ".pose");
    if (fj.contains("hands")) {
      const auto& hands = fj["hands"];
      if (!hands.is_object()) throw Error(Errc::SchemaError, "hands must be an object", path + ".hands");
      for (auto it = hands.begin(); it != hands.end(); ++it) {
        HandSide side;
        try {
          side = hand_side_from_string(it.key());
        } catch (const Error&) {
          throw Error(Errc::SchemaError, "hand side must be left or right", path + ".hands." + it.key());
        }
        f.hand_world(side) = detail::parse_joints(it.value(), path + ".hands." + it.key());
      }
    }
    if (fj.contains("raster") && !fj["raster"].is_null()) {
      const std::filesystem::path rel = get_string(fj, "raster", path);
      f.raster_path = rel.is_absolute() ? rel : base_dir / rel;
      if (check_rasters && !std::filesystem::exists(*f.raster_path))
        throw Error(Errc::MissingRaster, "raster file does not exist: " + f.raster_path->string(), path + ".raster");
    }
    if (fj.contains("objects")) {
      const auto& objs = fj["objects"];
      if (!objs.is_array()) throw Error(Errc::SchemaError, "objects must be an array", path + ".objects");
      for (std::size_t o = 0; o < objs.size(); ++o) {
        const std::string opath = path + ".objects[" + std::to_string(o) + "]";
        BBox2D b;
        b.label = get_string(objs[o], "label", opath);
        const auto& bb = require(objs[o], "bbox", opath);
        if (!bb.is_array() || bb.size() != 4 || !std::all_of(bb.begin(), bb.end(), [](const auto& v) { return v.is_number(); }))
          throw Error(Errc::SchemaError, "bbox must be [u_min, v_min, u_max, v_max]", opath + ".bbox");
        b.u_min = bb[0].get<double>();
        b.v_min = bb[1].get<double>();
        b.u_max = bb[2].get<double>();
        b.v_max = bb[3].get<double>();
        if (!(b.u_min <= b.u_max) || !(b.v_min <= b.v_max))
          throw Error(Errc::SchemaError, "bbox min must not exceed max", opath + ".bbox");
        f.objects.push_back(std::move(b));
      }
    }
    if (fj.contains("hand_meta")) f.hand_meta = RawHandMeta{fj["hand_meta"]};
    m.frames.push_back(std::move(f));
  }
  return m;
}

inline ClipManifest load_manifest(const std::filesystem::path& path, bool check_rasters = true) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::IoError, "cannot open manifest", path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::ParseError, e.what(), path.string());
  }
  try {
    return parse_manifest(j, path.parent_path(), check_rasters);
  } catch (const Error& e) {
    throw Error(e.code(), e.what(), path.string() + ":" + e.where());
  }
}

/// Raster paths are written relative to `base_dir` when they live under it.
inline nlohmann::ordered_json manifest_to_json(const ClipManifest& m, const std::filesystem::path& base_dir = {}) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["schema_version"] = kManifestSchemaVersion;
  j["clip_id"] = m.clip_id;
  j["source"] = m.source_name;
  j["fps"] = m.fps;
  j["task_text"] = m.task_text;
  ordered_json frames = ordered_json::array();
  for (const auto& f : m.frames) {
    ordered_json fj;
    fj["timestamp_s"] = f.timestamp_s;
    fj["intrinsics"] = {{"fx", f.intrinsics.fx}, {"fy", f.intrinsics.fy}, {"cx", f.intrinsics.cx},
                        {"cy", f.intrinsics.cy}, {"width", f.intrinsics.width}, {"height", f.intrinsics.height}};
    ordered_json rot = ordered_json::array();
    for (const auto& row : f.pose.rotation.matrix())
      for (double v : row) rot.push_back(v);
    fj["pose"] = {{"rotation", rot}, {"translation", {f.pose.translation.x, f.pose.translation.y, f.pose.translation.z}}};
    ordered_json hands = ordered_json::object();
    for (HandSide side : {HandSide::Left, HandSide::Right}) {
      const auto& joints = f.hand_world(side);
      if (!joints) continue;
      ordered_json arr = ordered_json::array();
      for (const Vec3& p : *joints) arr.push_back({p.x, p.y, p.z});
      hands[std::string(to_string(side))] = arr;
    }
    fj["hands"] = hands;
    if (f.raster_path) {
      std::filesystem::path p = *f.raster_path;
      if (!base_dir.empty()) {
        const auto rel = p.lexically_relative(base_dir);
        if (!rel.empty() && *rel.begin() != "..") p = rel;
      }
      fj["raster"] = p.generic_string();
    }
    if (!f.objects.empty()) {
      ordered_json objs = ordered_json::array();
      for (const auto& b : f.objects)
        objs.push_back({{"label", b.label}, {"bbox", {b.u_min, b.v_min, b.u_max, b.v_max}}});
      fj["objects"] = objs;
    }
    if (f.hand_meta) fj["hand_meta"] = f.hand_meta->value;
    frames.push_back(std::move(fj));
  }
  j["frames"] = std::move(frames);
  return j;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(Errc::IoError, "cannot open for writing", path.string());
  os << text;
  if (!os) throw Error(Errc::IoError, "write failed", path.string());
}

inline void write_manifest(const ClipManifest& m, const std::filesystem::path& path) {
  write_text_file(path, manifest_to_json(m, path.parent_path()).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Frame sampling and chunking.

/// Indices of the frames nearest to t0, t0 + 1/rate, ... within the clip; ascending, unique.
inline std::vector<std::size_t> sample_frame_times(std::span<const double> timestamps, double rate_hz) {
  if (!(rate_hz > 0.0)) throw Error(Errc::InvalidArgument, "rate_hz must be positive");
  std::vector<std::size_t> out;
  if (timestamps.empty()) return out;
  const double t0 = timestamps.front();
  const double t_end = timestamps.back();
  std::size_t cursor = 0;
  for (std::uint64_t k = 0;; ++k) {
    const double target = t0 + static_cast<double>(k) / rate_hz;
    if (target > t_end + 1e-9) break;
    while (cursor + 1 < timestamps.size() &&
           std::abs(timestamps[cursor + 1] - target) < std::abs(timestamps[cursor] - target))
      ++cursor;
    if (out.empty() || out.back() != cursor) out.push_back(cursor);
  }
  return out;
}

inline std::vector<std::size_t> sample_frames(const ClipManifest& m, double rate_hz) {
  std::vector<double> ts;
  ts.reserve(m.frames.size());
  for (const auto& f : m.frames) ts.push_back(f.timestamp_s);
  return sample_frame_times(ts, rate_hz);
}

/// Half-open frame index range.
struct FrameSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  friend bool operator==(const FrameSpan&, const FrameSpan&) = default;
};

/// Frame i belongs to chunk floor((t_i − t_0) / seconds).
inline std::vector<FrameSpan> chunk_frame_times(std::span<const double> timestamps, double seconds) {
  if (!(seconds > 0.0)) throw Error(Errc::InvalidArgument, "chunk length must be positive");
  std::vector<FrameSpan> spans;
  if (timestamps.empty()) return spans;
  const double t0 = timestamps.front();
  auto chunk_of = [&](double t) { return static_cast<std::int64_t>(std::floor((t - t0) / seconds + 1e-9)); };
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= timestamps.size(); ++i) {
    if (i == timestamps.size() || chunk_of(timestamps[i]) != chunk_of(timestamps[begin])) {
      spans.push_back({begin, i});
      begin = i;
    }
  }
  return spans;
}

inline std::vector<FrameSpan> chunk_clip(const ClipManifest& m, double seconds) {
  std::vector<double> ts;
  ts.reserve(m.frames.size());
  for (const auto& f : m.frames) ts.push_back(f.timestamp_s);
  return chunk_frame_times(ts, seconds);
}

/// Splits an ascending index list wherever consecutive timestamps differ by more than max_gap_s.
inline std::vector<std::vector<std::size_t>> split_at_gaps(const ClipManifest& m, std::span<const std::size_t> indices,
                                                           double max_gap_s) {
  std::vector<std::vector<std::size_t>> runs;
  for (std::size_t idx : indices) {
    if (runs.empty() || m.frames[idx].timestamp_s - m.frames[runs.back().back()].timestamp_s > max_gap_s + 1e-9)
      runs.emplace_back();
    runs.back().push_back(idx);
  }
  return runs;
}

// ---------------------------------------------------------------------------
// JSONL records.

struct RecordMeta {
  std::string id;
  std::string source;
  double gamma = kDefaultGamma;
  std::uint64_t seed = 0;
};

inline nlohmann::ordered_json displacement_json(const Displacement3D& d) {
  return {{"v", {d.v.x, d.v.y, d.v.z}}, {"distance_m", d.distance_m}, {"directions", d.directions.word_strings()}};
}

inline nlohmann::ordered_json visual_record_json(const VqaPair& p, const RecordMeta& meta) {
  nlohmann::ordered_json j;
  j["schema_version"] = kRecordSchemaVersion;
  j["id"] = meta.id;
  j["clip_id"] = p.clip_id;
  j["source"] = meta.source;
  j["category"] = std::string(to_string(p.category));
  if (p.side) j["side"] = std::string(to_string(*p.side));
  if (p.object) j["object"] = *p.object;
  j["frame_ids"] = p.frame_ids;
  j["question"] = p.question;
  j["answer"] = p.answer;
  if (const auto* d = std::get_if<Displacement3D>(&p.gt)) {
    j["gt"] = displacement_json(*d);
  } else {
    const auto& cm = std::get<CameraMotionLabel>(p.gt);
    nlohmann::ordered_json rot;
    rot["axis"] = {cm.rotation.axis.x, cm.rotation.axis.y, cm.rotation.axis.z};
    rot["angle_deg"] = cm.rotation.angle_deg;
    j["gt"] = {{"rotation", rot}, {"translation", displacement_json(cm.translation)}};
  }
  j["gamma"] = meta.gamma;
  j["seed"] = meta.seed;
  return j;
}

struct ActionSample {
  std::string clip_id;
  std::string source;
  HandSide side = HandSide::Right;
  FrameSpan chunk_span;
  std::string instruction;
  MotionTokenSequence tokens;
};

inline nlohmann::ordered_json tokenizer_json(const TokenizerConfig& cfg) {
  nlohmann::ordered_json ranges;
  ranges["x"] = {cfg.x.min, cfg.x.max};
  ranges["y"] = {cfg.y.min, cfg.y.max};
  ranges["z"] = {cfg.z.min, cfg.z.max};
  return {{"k", cfg.k_bins}, {"ranges", ranges}};
}

inline TokenizerConfig tokenizer_from_json(const nlohmann::json& j) {
  TokenizerConfig cfg;
  cfg.k_bins = j.at("k").get<int>();
  const auto& r = j.at("ranges");
  cfg.x = {r.at("x").at(0).get<double>(), r.at("x").at(1).get<double>()};
  cfg.y = {r.at("y").at(0).get<double>(), r.at("y").at(1).get<double>()};
  cfg.z = {r.at("z").at(0).get<double>(), r.at("z").at(1).get<double>()};
  cfg.validate();
  return cfg;
}

inline nlohmann::ordered_json action_record_json(const ActionSample& s, const TokenizerConfig& cfg) {
  nlohmann::ordered_json j;
  j["schema_version"] = kRecordSchemaVersion;
  j["clip_id"] = s.clip_id;
  j["source"] = s.source;
  j["side"] = std::string(to_string(s.side));
  j["chunk_span"] = {s.chunk_span.begin, s.chunk_span.end};
  j["instruction"] = s.instruction;
  j["tokens"] = s.tokens.tokens;
  j["tokenizer"] = tokenizer_json(cfg);
  return j;
}

/// One compact JSON object per line, "\n"-terminated.
inline std::string to_jsonl(std::span<const nlohmann::ordered_json> records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

inline void emit_jsonl(std::span<const nlohmann::ordered_json> records, const std::filesystem::path& path) {
  write_text_file(path, to_jsonl(records));
}

inline std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::IoError, "cannot open", path.string());
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::ParseError, e.what(), path.string() + ":" + std::to_string(lineno));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus distribution report.

/// Raw counts; merging is associative and commutative.
struct CorpusCounts {
  std::map<std::string, std::uint64_t> by_source;
  std::map<std::string, std::uint64_t> by_category;
  std::uint64_t total = 0;

  void add(const std::string& source, const std::string& category, std::uint64_t n = 1) {
    by_source[source] += n;
    by_category[category] += n;
    total += n;
  }

  CorpusCounts& merge(const CorpusCounts& o) {
    for (const auto& [k, v] : o.by_source) by_source[k] += v;
    for (const auto& [k, v] : o.by_category) by_category[k] += v;
    total += o.total;
    return *this;
  }
};

struct CorpusReport {
  struct Entry {
    std::string name;
    std::uint64_t count = 0;
    double proportion_pct = 0.0;  // one decimal, half-up
  };
  std::vector<Entry> sources;
  std::vector<Entry> categories;
  std::uint64_t total = 0;
};

/// count/total in percent rounded half-up to one decimal, in exact integer arithmetic.
inline double proportion_one_decimal(std::uint64_t count, std::uint64_t total) {
  if (total == 0) return 0.0;
  const std::uint64_t tenths = (count * 2000 + total) / (2 * total);
  return static_cast<double>(tenths) / 10.0;
}

inline CorpusReport make_report(const CorpusCounts& counts) {
  CorpusReport r;
  r.total = counts.total;
  auto build = [&](const std::map<std::string, std::uint64_t>& m) {
    std::vector<CorpusReport::Entry> out;
    for (const auto& [name, n] : m) out.push_back({name, n, proportion_one_decimal(n, counts.total)});
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.count > b.count; });
    return out;
  };
  r.sources = build(counts.by_source);
  r.categories = build(counts.by_category);
  return r;
}

/// Visual records count under their category; action records (no category) under "action".
inline CorpusCounts count_corpus(std::span<const std::filesystem::path> paths) {
  CorpusCounts counts;
  for (const auto& path : paths) {
    const auto records = read_jsonl(path);
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      const std::string where = path.string() + ":" + std::to_string(i + 1);
      if (!r.is_object() || !r.contains("source") || !r["source"].is_string())
        throw Error(Errc::SchemaError, "record has no string 'source'", where);
      std::string category = "action";
      if (r.contains("category")) {
        if (!r["category"].is_string()) throw Error(Errc::SchemaError, "category must be a string", where);
        category = r["category"].get<std::string>();
      }
      counts.add(r["source"].get<std::string>(), category);
    }
  }
  return counts;
}

inline CorpusReport report(std::span<const std::filesystem::path> paths) { return make_report(count_corpus(paths)); }

inline nlohmann::ordered_json report_json(const CorpusReport& r) {
  auto entries = [](const std::vector<CorpusReport::Entry>& es) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& e : es) {
      char pct[32];
      std::snprintf(pct, sizeof(pct), "%.1f", e.proportion_pct);
      arr.push_back({{"name", e.name}, {"count", e.count}, {"proportion_pct", pct}});
    }
    return arr;
  };
  nlohmann::ordered_json j;
  j["total"] = r.total;
  j["sources"] = entries(r.sources);
  j["categories"] = entries(r.categories);
  return j;
}

}  // namespace hand3d
