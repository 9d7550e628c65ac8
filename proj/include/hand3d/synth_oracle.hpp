// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "hand3d/dataset_io.hpp"
#include "hand3d/error.hpp"
#include "hand3d/geometry.hpp"
#include "hand3d/hand_kinematics.hpp"
#include "hand3d/scale_calibration.hpp"

// Synthetic scenes with closed-form geometry. Everything the annotation
// pipeline estimates (scale, object positions, camera motion) has an exact
// analytic counterpart here, computed without going through the pipeline.

namespace hand3d::synth {

enum class CameraMotion { Static, Orbit, Dolly };

struct CameraTrajectory {
  CameraMotion kind = CameraMotion::Static;
  // Dolly: pose translation grows linearly, t(t_s) = velocity · t_s (world-to-camera convention).
  Vec3 dolly_velocity{0.0, 0.0, 0.0};
  // Orbit: the scene turns about the world y axis through `pivot` at this rate.
  double orbit_deg_per_s = 0.0;
  Vec3 orbit_pivot{0.0, 0.0, 1.0};
};

enum class PathKind { Line, Arc };

struct HandPath {
  HandSide side = HandSide::Right;
  PathKind kind = PathKind::Line;
  Vec3 start;  // world wrist position at the first frame
  Vec3 end;    // ... and at the last frame
  Vec3 bulge;  // arc only: displacement of the midpoint off the chord
};

struct ObjectPlacement {
  std::string label;
  Vec3 position;  // world
};

struct SceneSpec {
  std::uint64_t seed = 7;
  std::string clip_id = "synth-0000";
  std::string source = "synthetic";
  std::string task_text = "Pick up the cup.";
  int n_frames = 360;
  double fps = 30.0;
  CameraTrajectory camera;
  double true_scale = 1.7;
  std::vector<HandPath> hands;
  std::vector<ObjectPlacement> objects;
  std::uint32_t width = 128;
  std::uint32_t height = 96;
  double focal_px = 128.0;
  double background_depth = 2.0;
  int invalid_rows = 4;          // top rows carry no depth
  int object_half_size_px = 3;   // object boxes are (2h+1)² pixels
  int corrupted_joints = 0;      // per frame, raster depth replaced by an outlier
  double depth_jitter_sigma = 0.0;
  double raster_rate_hz = 1.0;   // rasters only on frames k·fps/rate; <= 0 means every frame

  void validate() const {
    if (n_frames < 1) throw Error(Errc::InvalidArgument, "n_frames must be at least 1");
    if (!(fps > 0.0)) throw Error(Errc::InvalidArgument, "fps must be positive");
    if (!(true_scale > 0.0)) throw Error(Errc::InvalidArgument, "true_scale must be positive");
    if (width < 8 || height < 8) throw Error(Errc::InvalidArgument, "raster resolution must be at least 8x8");
    if (!(focal_px > 0.0)) throw Error(Errc::InvalidArgument, "focal length must be positive");
    if (corrupted_joints < 0 || corrupted_joints > kNumJoints)
      throw Error(Errc::InvalidArgument, "corrupted_joints must be in [0, 21]");
    if (invalid_rows < 0 || static_cast<std::uint32_t>(invalid_rows) >= height)
      throw Error(Errc::InvalidArgument, "invalid_rows must leave part of the image valid");
    for (std::size_t i = 0; i < hands.size(); ++i)
      for (std::size_t k = i + 1; k < hands.size(); ++k)
        if (hands[i].side == hands[k].side) throw Error(Errc::InvalidArgument, "one path per hand side");
  }

  CameraIntrinsics intrinsics() const {
    return {focal_px, focal_px, 0.5 * width, 0.5 * height, static_cast<int>(width), static_cast<int>(height)};
  }
};

/// Rigid hand: wrist plus 20 fixed offsets (five fingers of four joints).
inline JointSet joint_offsets(HandSide side) {
  JointSet off{};
  const double mirror = side == HandSide::Left ? -1.0 : 1.0;
  for (int f = 0; f < 5; ++f)
    for (int k = 1; k <= 4; ++k)
      off[1 + 4 * f + (k - 1)] = {mirror * (-0.04 + 0.02 * f), -0.02 - 0.018 * k, 0.004 * k};
  return off;
}

struct FrameTruth {
  double timestamp_s = 0.0;
  CameraPose pose;
  std::map<HandSide, Vec3> wrist_world;
  std::map<HandSide, Vec3> wrist_camera;
  std::map<std::string, Vec3> objects_camera;  // only objects in view
};

struct GroundTruth {
  double scale = 1.0;
  CameraTrajectory camera;
  std::vector<FrameTruth> frames;
};

struct Scene {
  ClipManifest manifest;
  std::map<std::size_t, PointRaster> rasters;  // frame index -> relative-scale raster
  GroundTruth truth;
};

// --- closed-form trajectories ------------------------------------------------

inline double frame_time(const SceneSpec& s, int i) { return static_cast<double>(i) / s.fps; }

/// (cos θ, sin θ) rotation about +y applied to p, written out.
inline Vec3 yaw(const Vec3& p, double theta_rad) {
  const double c = std::cos(theta_rad), s = std::sin(theta_rad);
  return {c * p.x + s * p.z, p.y, -s * p.x + c * p.z};
}

inline CameraPose camera_pose_at(const CameraTrajectory& cam, double t) {
  switch (cam.kind) {
    case CameraMotion::Static: return CameraPose::identity();
    case CameraMotion::Dolly: return {Rotation3::identity(), t * cam.dolly_velocity};
    case CameraMotion::Orbit: {
      const double deg = cam.orbit_deg_per_s * t;
      const double th = deg * std::numbers::pi / 180.0;
      return {Rotation3::about_y(deg), cam.orbit_pivot - yaw(cam.orbit_pivot, th)};
    }
  }
  return CameraPose::identity();
}

/// Camera motion between two instants, from the trajectory parameters alone.
struct AnalyticCameraMotion {
  Vec3 axis;
  double angle_deg = 0.0;
  Vec3 translation;
};

inline AnalyticCameraMotion camera_motion_between(const CameraTrajectory& cam, double t1, double t2) {
  AnalyticCameraMotion m;
  const double dt = t2 - t1;
  switch (cam.kind) {
    case CameraMotion::Static: break;
    case CameraMotion::Dolly: m.translation = dt * cam.dolly_velocity; break;
    case CameraMotion::Orbit: {
      const double deg = cam.orbit_deg_per_s * dt;
      if (deg != 0.0) {
        m.axis = {0.0, deg > 0.0 ? 1.0 : -1.0, 0.0};
        m.angle_deg = std::abs(deg);
      }
      m.translation = cam.orbit_pivot - yaw(cam.orbit_pivot, deg * std::numbers::pi / 180.0);
      break;
    }
  }
  return m;
}

inline Vec3 wrist_at(const HandPath& path, double u) {
  Vec3 p = path.start + u * (path.end - path.start);
  if (path.kind == PathKind::Arc) p = p + (4.0 * u * (1.0 - u)) * path.bulge;
  return p;
}

// --- generation ----------------------------------------------------------------

namespace detail {

inline bool frame_has_raster(const SceneSpec& s, int i) {
  if (!(s.raster_rate_hz > 0.0)) return true;
  const double period = s.fps / s.raster_rate_hz;
  const double k = std::round(i / period);
  return std::abs(k * period - i) < 0.5 && static_cast<int>(std::lround(k * period)) == i;
}

struct PixelIndex {
  std::int64_t col, row;
};

inline std::optional<PixelIndex> pixel_of(const Vec3& p_cam, const CameraIntrinsics& k) {
  if (!(p_cam.z > kDefaultDepthEpsilon)) return std::nullopt;
  const PixelCoord px = project(p_cam, k);
  if (!is_visible(px, k)) return std::nullopt;
  return PixelIndex{std::llround(px.u), std::llround(px.v)};
}

}  // namespace detail

inline Scene generate(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const CameraIntrinsics k = spec.intrinsics();

  Scene scene;
  scene.truth.scale = spec.true_scale;
  scene.truth.camera = spec.camera;
  ClipManifest& m = scene.manifest;
  m.clip_id = spec.clip_id;
  m.source_name = spec.source;
  m.fps = spec.fps;
  m.task_text = spec.task_text;

  const double inv_s = 1.0 / spec.true_scale;
  for (int i = 0; i < spec.n_frames; ++i) {
    const double t = frame_time(spec, i);
    const double u = spec.n_frames > 1 ? static_cast<double>(i) / (spec.n_frames - 1) : 0.0;
    ManifestFrame f;
    f.timestamp_s = t;
    f.intrinsics = k;
    f.pose = camera_pose_at(spec.camera, t);

    FrameTruth truth;
    truth.timestamp_s = t;
    truth.pose = f.pose;
    for (const HandPath& hp : spec.hands) {
      const Vec3 wrist = wrist_at(hp, u);
      const JointSet off = joint_offsets(hp.side);
      JointSet joints{};
      for (int j = 0; j < kNumJoints; ++j) joints[j] = wrist + off[j];
      f.hand_world(hp.side) = joints;
      truth.wrist_world[hp.side] = wrist;
      truth.wrist_camera[hp.side] = f.pose.rotation * wrist + f.pose.translation;
    }

    if (detail::frame_has_raster(spec, i)) {
      PointRaster r(spec.width, spec.height);
      std::normal_distribution<double> jitter(0.0, spec.depth_jitter_sigma > 0.0 ? spec.depth_jitter_sigma : 1.0);
      for (std::uint32_t row = static_cast<std::uint32_t>(spec.invalid_rows); row < spec.height; ++row)
        for (std::uint32_t col = 0; col < spec.width; ++col) {
          double z = spec.background_depth;
          if (spec.depth_jitter_sigma > 0.0) z += jitter(rng);
          const Vec3 p{(col - k.cx) / k.fx * z, (row - k.cy) / k.fy * z, z};
          r.at(col, row) = inv_s * p;
        }

      // Objects are compact: every pixel of the box carries the object centre.
      std::vector<std::array<std::int64_t, 4>> boxes;
      for (const ObjectPlacement& o : spec.objects) {
        const Vec3 pc = f.pose.rotation * o.position + f.pose.translation;
        const auto px = detail::pixel_of(pc, k);
        if (!px) continue;
        const std::int64_t h = spec.object_half_size_px;
        const std::int64_t c0 = std::max<std::int64_t>(0, px->col - h);
        const std::int64_t r0 = std::max<std::int64_t>(0, px->row - h);
        const std::int64_t c1 = std::min<std::int64_t>(spec.width - 1, px->col + h);
        const std::int64_t r1 = std::min<std::int64_t>(spec.height - 1, px->row + h);
        for (std::int64_t rr = r0; rr <= r1; ++rr)
          for (std::int64_t cc = c0; cc <= c1; ++cc)
            r.at(static_cast<std::uint32_t>(cc), static_cast<std::uint32_t>(rr)) = inv_s * pc;
        f.objects.push_back({static_cast<double>(c0), static_cast<double>(r0), static_cast<double>(c1),
                             static_cast<double>(r1), o.label});
        boxes.push_back({c0, r0, c1, r1});
        truth.objects_camera[o.label] = pc;
      }

      std::vector<std::pair<std::int64_t, std::int64_t>> used;
      for (const HandPath& hp : spec.hands) {
        std::vector<int> order(kNumJoints);
        for (int j = 0; j < kNumJoints; ++j) order[j] = j;
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<bool> corrupt(kNumJoints, false);
        for (int c = 0; c < spec.corrupted_joints; ++c) corrupt[order[c]] = true;
        std::uniform_real_distribution<double> low(0.3, 0.8), high(1.25, 3.0);
        std::bernoulli_distribution coin(0.5);
        for (int j = 0; j < kNumJoints; ++j) {
          const Vec3 pc = f.pose.rotation * (*f.hand_world(hp.side))[j] + f.pose.translation;
          const auto px = detail::pixel_of(pc, k);
          if (!px) continue;
          for (const auto& b : boxes)
            if (px->col >= b[0] && px->col <= b[2] && px->row >= b[1] && px->row <= b[3])
              throw Error(Errc::InvalidArgument, "hand joint projects into an object box", spec.clip_id);
          for (const auto& u2 : used)
            if (u2.first == px->col && u2.second == px->row)
              throw Error(Errc::InvalidArgument, "two hand joints project to the same pixel", spec.clip_id);
          used.emplace_back(px->col, px->row);
          double factor = 1.0;
          if (corrupt[j]) factor = coin(rng) ? low(rng) : high(rng);
          r.at(static_cast<std::uint32_t>(px->col), static_cast<std::uint32_t>(px->row)) = (factor * inv_s) * pc;
        }
      }
      scene.rasters.emplace(static_cast<std::size_t>(i), std::move(r));
    }
    m.frames.push_back(std::move(f));
    scene.truth.frames.push_back(std::move(truth));
  }
  return scene;
}

inline std::string raster_file_name(std::size_t frame) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "frame_%06zu.pc3r", frame);
  return buf;
}

inline nlohmann::ordered_json truth_json(const GroundTruth& g) {
  using nlohmann::ordered_json;
  auto vec = [](const Vec3& v) { return ordered_json::array({v.x, v.y, v.z}); };
  ordered_json j;
  j["scale"] = g.scale;
  ordered_json frames = ordered_json::array();
  for (std::size_t i = 0; i < g.frames.size(); ++i) {
    const FrameTruth& f = g.frames[i];
    ordered_json fj;
    fj["frame"] = i;
    fj["timestamp_s"] = f.timestamp_s;
    ordered_json wrists = ordered_json::object();
    for (const auto& [side, p] : f.wrist_camera) wrists[std::string(to_string(side))] = vec(p);
    fj["wrist_camera"] = wrists;
    ordered_json objs = ordered_json::object();
    for (const auto& [label, p] : f.objects_camera) objs[label] = vec(p);
    fj["objects_camera"] = objs;
    frames.push_back(std::move(fj));
  }
  j["frames"] = std::move(frames);
  return j;
}

/// Writes manifest.json, rasters/, and ground_truth.json into `dir`.
inline std::filesystem::path write_scene(const Scene& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "rasters");
  ClipManifest m = scene.manifest;
  for (const auto& [idx, raster] : scene.rasters) {
    const auto path = dir / "rasters" / raster_file_name(idx);
    write_raster(raster, path);
    m.frames[idx].raster_path = path;
  }
  const auto manifest_path = dir / "manifest.json";
  write_manifest(m, manifest_path);
  write_text_file(dir / "ground_truth.json", truth_json(scene.truth).dump(2) + "\n");
  return manifest_path;
}

// --- oracle answers for pipeline records ---------------------------------------

/// Expected structured answer for a generated visual record: {id, directions,
/// distance_m}, plus the rotation for camera records. Labels come from
/// label_displacement on the analytic displacement.
inline nlohmann::ordered_json expected_visual_answer(const GroundTruth& truth, const nlohmann::json& record,
                                                     double gamma) {
  const std::string category = record.at("category").get<std::string>();
  const auto frame_ids = record.at("frame_ids").get<std::vector<std::size_t>>();
  if (frame_ids.empty()) throw Error(Errc::SchemaError, "record has no frames");
  for (std::size_t f : frame_ids)
    if (f >= truth.frames.size()) throw Error(Errc::SchemaError, "frame id outside the scene");

  Vec3 v;
  nlohmann::ordered_json out;
  out["id"] = record.at("id");
  if (category == "camera_movement") {
    const FrameTruth& a = truth.frames[frame_ids.front()];
    const FrameTruth& b = truth.frames[frame_ids.back()];
    const AnalyticCameraMotion cm = camera_motion_between(truth.camera, a.timestamp_s, b.timestamp_s);
    v = cm.translation;
    out["rotation"] = {{"axis", {cm.axis.x, cm.axis.y, cm.axis.z}}, {"angle_deg", cm.angle_deg}};
  } else {
    const HandSide side = hand_side_from_string(record.at("side").get<std::string>());
    if (category == "hand_movement") {
      const FrameTruth& a = truth.frames[frame_ids.front()];
      const FrameTruth& b = truth.frames[frame_ids.back()];
      v = a.pose.rotation * (b.wrist_world.at(side) - a.wrist_world.at(side));
    } else {
      const FrameTruth& anchor = truth.frames[frame_ids.back()];
      v = anchor.objects_camera.at(record.at("object").get<std::string>()) - anchor.wrist_camera.at(side);
    }
  }
  const Displacement3D d = label_displacement(v, gamma);
  out["directions"] = d.directions.word_strings();
  out["distance_m"] = d.distance_m;
  return out;
}

/// Expected motion tokens for an action record, binned directly from the
/// analytic camera-frame wrist positions.
inline std::vector<int> expected_action_tokens(const GroundTruth& truth, const nlohmann::json& record,
                                               const TokenizerConfig& cfg) {
  const HandSide side = hand_side_from_string(record.at("side").get<std::string>());
  const auto span = record.at("chunk_span").get<std::vector<std::size_t>>();
  std::vector<int> tokens;
  for (std::size_t i = span.at(0); i < span.at(1) && i < truth.frames.size(); ++i) {
    const auto it = truth.frames[i].wrist_camera.find(side);
    if (it == truth.frames[i].wrist_camera.end()) continue;
    for (int a = 0; a < 3; ++a) {
      const AxisRange& r = cfg.range(a);
      const double c = std::min(std::max(it->second[a], r.min), r.max);
      long bin = static_cast<long>(std::floor((c - r.min) * cfg.k_bins / (r.max - r.min)));
      if (bin > cfg.k_bins - 1) bin = cfg.k_bins - 1;
      tokens.push_back(static_cast<int>(a * cfg.k_bins + bin));
    }
  }
  return tokens;
}

/// Desk-scale default: dolly-in camera, right hand reaching along a line,
/// a stationary left hand, and two objects.
inline SceneSpec default_scene(std::uint64_t seed = 7) {
  SceneSpec s;
  s.seed = seed;
  s.clip_id = "synth-" + std::to_string(seed);
  s.camera.kind = CameraMotion::Dolly;
  s.camera.dolly_velocity = {0.0, 0.0, 0.05};
  s.hands.push_back({HandSide::Right, PathKind::Line, {0.06, 0.06, 0.55}, {0.16, 0.0, 0.68}, {}});
  s.hands.push_back({HandSide::Left, PathKind::Line, {-0.2, 0.08, 0.6}, {-0.2, 0.08, 0.6}, {}});
  s.objects.push_back({"cup", {-0.03, 0.2, 0.9}});
  s.objects.push_back({"box", {0.28, -0.18, 1.0}});
  return s;
}

/// Overlays the keys present in `j` onto `base`. Unknown keys are rejected.
inline SceneSpec scene_from_json(const nlohmann::json& j, SceneSpec base = {}) {
  if (!j.is_object()) throw Error(Errc::SchemaError, "scene must be a JSON object");
  auto vec = [](const nlohmann::json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 3) throw Error(Errc::SchemaError, "expected [x, y, z]", where);
    return Vec3{v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
  };
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& key = it.key();
      const auto& v = it.value();
      if (key == "seed") base.seed = v.get<std::uint64_t>();
      else if (key == "clip_id") base.clip_id = v.get<std::string>();
      else if (key == "source") base.source = v.get<std::string>();
      else if (key == "task_text") base.task_text = v.get<std::string>();
      else if (key == "n_frames") base.n_frames = v.get<int>();
      else if (key == "fps") base.fps = v.get<double>();
      else if (key == "true_scale") base.true_scale = v.get<double>();
      else if (key == "width") base.width = v.get<std::uint32_t>();
      else if (key == "height") base.height = v.get<std::uint32_t>();
      else if (key == "focal_px") base.focal_px = v.get<double>();
      else if (key == "background_depth") base.background_depth = v.get<double>();
      else if (key == "invalid_rows") base.invalid_rows = v.get<int>();
      else if (key == "object_half_size_px") base.object_half_size_px = v.get<int>();
      else if (key == "corrupted_joints") base.corrupted_joints = v.get<int>();
      else if (key == "depth_jitter_sigma") base.depth_jitter_sigma = v.get<double>();
      else if (key == "raster_rate_hz") base.raster_rate_hz = v.get<double>();
      else if (key == "camera") {
        CameraTrajectory c;
        const std::string kind = v.at("kind").get<std::string>();
        if (kind == "static") c.kind = CameraMotion::Static;
        else if (kind == "dolly") c.kind = CameraMotion::Dolly;
        else if (kind == "orbit") c.kind = CameraMotion::Orbit;
        else throw Error(Errc::SchemaError, "camera.kind must be static, dolly or orbit", "$.camera.kind");
        if (v.contains("dolly_velocity")) c.dolly_velocity = vec(v["dolly_velocity"], "$.camera.dolly_velocity");
        if (v.contains("orbit_deg_per_s")) c.orbit_deg_per_s = v["orbit_deg_per_s"].get<double>();
        if (v.contains("orbit_pivot")) c.orbit_pivot = vec(v["orbit_pivot"], "$.camera.orbit_pivot");
        base.camera = c;
      } else if (key == "hands") {
        base.hands.clear();
        for (std::size_t i = 0; i < v.size(); ++i) {
          const auto& h = v[i];
          const std::string where = "$.hands[" + std::to_string(i) + "]";
          HandPath path;
          path.side = hand_side_from_string(h.at("side").get<std::string>());
          const std::string kind = h.value("kind", std::string("line"));
          if (kind == "line") path.kind = PathKind::Line;
          else if (kind == "arc") path.kind = PathKind::Arc;
          else throw Error(Errc::SchemaError, "hand path kind must be line or arc", where);
          path.start = vec(h.at("start"), where + ".start");
          path.end = h.contains("end") ? vec(h["end"], where + ".end") : path.start;
          if (h.contains("bulge")) path.bulge = vec(h["bulge"], where + ".bulge");
          base.hands.push_back(path);
        }
      } else if (key == "objects") {
        base.objects.clear();
        for (std::size_t i = 0; i < v.size(); ++i)
          base.objects.push_back({v[i].at("label").get<std::string>(),
                                  vec(v[i].at("position"), "$.objects[" + std::to_string(i) + "].position")});
      } else {
        throw Error(Errc::SchemaError, "unknown scene key", key);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::SchemaError, e.what(), "scene");
  }
  base.validate();
  return base;
}

}  // namespace hand3d::synth
