// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hand3d/error.hpp"
#include "hand3d/geometry.hpp"
#include "hand3d/hand_kinematics.hpp"
#include "hand3d/spatial_labeling.hpp"

namespace hand3d {

enum class VqaCategory { SpatialRelationship, TaskCompletion, HandMovement, CameraMovement };

constexpr std::string_view to_string(VqaCategory c) {
  switch (c) {
    case VqaCategory::SpatialRelationship: return "spatial_relationship";
    case VqaCategory::TaskCompletion: return "task_completion";
    case VqaCategory::HandMovement: return "hand_movement";
    case VqaCategory::CameraMovement: return "camera_movement";
  }
  return "";
}

inline VqaCategory vqa_category_from_string(std::string_view s) {
  for (VqaCategory c : {VqaCategory::SpatialRelationship, VqaCategory::TaskCompletion, VqaCategory::HandMovement,
                        VqaCategory::CameraMovement})
    if (to_string(c) == s) return c;
  throw Error(Errc::SchemaError, "unknown VQA category: " + std::string(s));
}

using VqaGroundTruth = std::variant<Displacement3D, CameraMotionLabel>;

struct VqaPair {
  VqaCategory category = VqaCategory::SpatialRelationship;
  std::string question;
  std::string answer;
  VqaGroundTruth gt;
  std::string clip_id;
  std::vector<int> frame_ids;
  std::optional<HandSide> side;
  std::optional<std::string> object;  // label, for object-centric categories
};

/// Provenance shared by every pair generated from one context window.
struct VqaContext {
  std::string clip_id;
  std::vector<int> frame_ids;
};

// Rendering helpers. Distances: meters, two decimals, half-up. Angles: integer degrees, half-up.
inline double round_half_up(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::floor(value * scale + 0.5) / scale;
}

inline std::string format_meters(double d) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", round_half_up(d, 2));
  return buf;
}

inline long rounded_degrees(double deg) { return static_cast<long>(std::floor(deg + 0.5)); }

/// "right", "right and forward", "right, up and forward".
inline std::string join_directions(const DirectionSet& dirs) {
  const auto words = dirs.word_strings();
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out += (i + 1 == words.size()) ? " and " : ", ";
    out += words[i];
  }
  return out;
}

namespace detail {

inline void check_context(const VqaContext& ctx) {
  if (ctx.frame_ids.empty()) throw Error(Errc::InvalidArgument, "a VQA pair needs at least one frame id", ctx.clip_id);
}

inline std::string side_phrase(HandSide side) { return std::string(to_string(side)) + " hand"; }

}  // namespace detail

inline VqaPair gen_spatial_relationship(const VqaContext& ctx, const HandFrame& hand, const std::string& label,
                                        const Vec3& object_pos, double gamma = kDefaultGamma) {
  detail::check_context(ctx);
  const Displacement3D d = hand_object_relation(hand, object_pos, gamma);
  VqaPair p;
  p.category = VqaCategory::SpatialRelationship;
  p.question = "In the last frame, where is the " + label + " relative to the " + detail::side_phrase(hand.side) + "?";
  if (d.distance_m == 0.0)
    p.answer = "The object is at the hand's position, 0.00 m away.";
  else if (d.directions.empty())
    p.answer = "The object is " + format_meters(d.distance_m) + " m from the hand, with no dominant direction.";
  else
    p.answer = "The object is " + format_meters(d.distance_m) + " m from the hand, toward the " +
               join_directions(d.directions) + ".";
  p.gt = d;
  p.clip_id = ctx.clip_id;
  p.frame_ids = ctx.frame_ids;
  p.side = hand.side;
  p.object = label;
  return p;
}

inline VqaPair gen_task_completion(const VqaContext& ctx, const std::string& task_text, const HandFrame& hand,
                                   const std::string& label, const Vec3& object_pos, double gamma = kDefaultGamma) {
  detail::check_context(ctx);
  const Displacement3D d = hand_object_relation(hand, object_pos, gamma);
  VqaPair p;
  p.category = VqaCategory::TaskCompletion;
  std::string task = task_text;
  if (!task.empty() && task.back() != '.' && task.back() != '!' && task.back() != '?') task += '.';
  p.question = "Task: " + task + " How should the " + detail::side_phrase(hand.side) +
               " move in 3D to reach the " + label + "?";
  if (d.distance_m == 0.0)
    p.answer = "The hand is already at the object, no movement needed, 0.00 m.";
  else if (d.directions.empty())
    p.answer = "Move the hand by " + format_meters(d.distance_m) + " m with no dominant direction.";
  else
    p.answer = "Move the hand " + join_directions(d.directions) + " by " + format_meters(d.distance_m) + " m.";
  p.gt = d;
  p.clip_id = ctx.clip_id;
  p.frame_ids = ctx.frame_ids;
  p.side = hand.side;
  p.object = label;
  return p;
}

/// Both frames must be expressed in the same camera frame.
inline VqaPair gen_hand_movement(const VqaContext& ctx, const HandFrame& frame_a, const HandFrame& frame_b,
                                 double gamma = kDefaultGamma, int wrist_index = kDefaultWristIndex) {
  detail::check_context(ctx);
  const Displacement3D d = label_displacement(frame_b.joints[wrist_index] - frame_a.joints[wrist_index], gamma);
  VqaPair p;
  p.category = VqaCategory::HandMovement;
  p.question = "How did the " + detail::side_phrase(frame_a.side) + " move between the two frames?";
  if (d.distance_m == 0.0)
    p.answer = "No movement, 0.00 m.";
  else if (d.directions.empty())
    p.answer = "The hand moved " + format_meters(d.distance_m) + " m with no dominant direction.";
  else
    p.answer = "The hand moved " + join_directions(d.directions) + " by " + format_meters(d.distance_m) + " m.";
  p.gt = d;
  p.clip_id = ctx.clip_id;
  p.frame_ids = ctx.frame_ids;
  p.side = frame_a.side;
  return p;
}

/// Rotation axis as signed camera-axis names ("+y", "-x and +z"). Direction
/// words are kept out of the rotation clause so answer parsing only sees the
/// translation's words.
inline std::string rotation_axis_phrase(const AxisAngle& rot, double gamma = kDefaultGamma) {
  static const char* names[3] = {"x", "y", "z"};
  std::vector<std::string> parts;
  int dominant = 0;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(rot.axis[a]) > std::abs(rot.axis[dominant])) dominant = a;
    if (std::abs(rot.axis[a]) > gamma) parts.push_back((rot.axis[a] > 0 ? "+" : "-") + std::string(names[a]));
  }
  if (parts.empty()) parts.push_back((rot.axis[dominant] > 0 ? "+" : "-") + std::string(names[dominant]));
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += (i + 1 == parts.size()) ? " and " : ", ";
    out += parts[i];
  }
  return out;
}

/// Translation clause first, then the rotation clause.
inline std::string render_camera_motion(const CameraMotionLabel& m, double gamma = kDefaultGamma) {
  const Displacement3D& t = m.translation;
  const bool rotated = m.rotation.angle_deg != 0.0;
  if (!rotated && t.distance_m == 0.0) return "No rotation, no movement, 0.00 m.";
  std::string trans;
  if (t.distance_m == 0.0)
    trans = "No movement, 0.00 m";
  else if (t.directions.empty())
    trans = "Moved " + format_meters(t.distance_m) + " m with no dominant direction";
  else
    trans = "Moved " + join_directions(t.directions) + " by " + format_meters(t.distance_m) + " m";
  const std::string rot = rotated ? "rotated " + std::to_string(rounded_degrees(m.rotation.angle_deg)) +
                                        " degrees about the " + rotation_axis_phrase(m.rotation, gamma) + " axis"
                                  : "no rotation";
  return trans + ", " + rot + ".";
}

inline VqaPair gen_camera_movement(const VqaContext& ctx, const CameraPose& p1, const CameraPose& p2,
                                   double gamma = kDefaultGamma, const AxisAngleOptions& opt = {}) {
  detail::check_context(ctx);
  const CameraMotionLabel m = label_camera_motion(p1, p2, gamma, opt);
  VqaPair p;
  p.category = VqaCategory::CameraMovement;
  p.question = "How did the camera move between the two frames?";
  p.answer = render_camera_motion(m, gamma);
  p.gt = m;
  p.clip_id = ctx.clip_id;
  p.frame_ids = ctx.frame_ids;
  return p;
}

/// The displacement the pair's answer is scored on (translation for camera pairs).
inline const Displacement3D& scored_displacement(const VqaPair& p) {
  if (const auto* d = std::get_if<Displacement3D>(&p.gt)) return *d;
  return std::get<CameraMotionLabel>(p.gt).translation;
}

}  // namespace hand3d
