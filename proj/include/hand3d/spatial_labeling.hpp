// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hand3d/error.hpp"
#include "hand3d/geometry.hpp"
#include "hand3d/hand_kinematics.hpp"

namespace hand3d {

// Camera frame: x right, y down, z forward.
enum class Direction { Left, Right, Up, Down, Forward, Backward };

constexpr std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::Left: return "left";
    case Direction::Right: return "right";
    case Direction::Up: return "up";
    case Direction::Down: return "down";
    case Direction::Forward: return "forward";
    case Direction::Backward: return "backward";
  }
  return "";
}

inline std::optional<Direction> direction_from_string(std::string_view s) {
  for (Direction d : {Direction::Left, Direction::Right, Direction::Up, Direction::Down, Direction::Forward,
                      Direction::Backward})
    if (to_string(d) == s) return d;
  return std::nullopt;
}

constexpr int axis_of(Direction d) {
  switch (d) {
    case Direction::Left:
    case Direction::Right: return 0;
    case Direction::Up:
    case Direction::Down: return 1;
    default: return 2;
  }
}

constexpr int sign_of(Direction d) {
  return (d == Direction::Right || d == Direction::Down || d == Direction::Forward) ? 1 : -1;
}

constexpr Direction direction_for(int axis, int sign) {
  constexpr Direction pos[3] = {Direction::Right, Direction::Down, Direction::Forward};
  constexpr Direction neg[3] = {Direction::Left, Direction::Up, Direction::Backward};
  return sign > 0 ? pos[axis] : neg[axis];
}

/// At most one word per axis, stored as a per-axis sign (−1, 0, +1).
class DirectionSet {
 public:
  constexpr DirectionSet() = default;

  constexpr int sign(int axis) const { return signs_[axis]; }
  constexpr void set(int axis, int sign) { signs_[axis] = sign > 0 ? 1 : (sign < 0 ? -1 : 0); }

  /// Adds a word; returns false when its axis already carries one.
  constexpr bool insert(Direction d) {
    const int a = axis_of(d);
    if (signs_[a] != 0) return false;
    signs_[a] = sign_of(d);
    return true;
  }

  constexpr bool contains(Direction d) const { return signs_[axis_of(d)] == sign_of(d); }
  constexpr bool empty() const { return signs_[0] == 0 && signs_[1] == 0 && signs_[2] == 0; }
  constexpr int size() const { return (signs_[0] != 0) + (signs_[1] != 0) + (signs_[2] != 0); }

  /// Words in x, y, z order.
  std::vector<Direction> words() const {
    std::vector<Direction> out;
    for (int a = 0; a < 3; ++a)
      if (signs_[a] != 0) out.push_back(direction_for(a, signs_[a]));
    return out;
  }

  std::vector<std::string> word_strings() const {
    std::vector<std::string> out;
    for (Direction d : words()) out.emplace_back(to_string(d));
    return out;
  }

  constexpr DirectionSet mirrored() const {
    DirectionSet m;
    for (int a = 0; a < 3; ++a) m.signs_[a] = -signs_[a];
    return m;
  }

  friend constexpr bool operator==(const DirectionSet&, const DirectionSet&) = default;

 private:
  std::array<int, 3> signs_{0, 0, 0};
};

struct Displacement3D {
  Vec3 v;
  double distance_m = 0.0;
  DirectionSet directions;
};

struct CameraMotionLabel {
  AxisAngle rotation;
  Displacement3D translation;
};

inline constexpr double kDefaultGamma = 0.2;

inline Displacement3D label_displacement(const Vec3& v, double gamma = kDefaultGamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw Error(Errc::InvalidArgument, "gamma must be in [0, 1)");
  Displacement3D out{v, v.norm(), {}};
  if (out.distance_m == 0.0) return out;
  for (int a = 0; a < 3; ++a) {
    const double c = v[a] / out.distance_m;
    if (std::abs(c) > gamma) out.directions.set(a, c > 0.0 ? 1 : -1);
  }
  return out;
}

inline CameraMotionLabel label_camera_motion(const CameraPose& p1, const CameraPose& p2,
                                             double gamma = kDefaultGamma,
                                             const AxisAngleOptions& opt = {}) {
  const CameraPose rel = relative_pose(p1, p2);
  return {to_axis_angle(rel.rotation, opt), label_displacement(rel.translation, gamma)};
}

/// Object position minus wrist position, both in the same camera frame.
inline Displacement3D hand_object_relation(const HandFrame& hand, const Vec3& object_pos,
                                           double gamma = kDefaultGamma,
                                           int wrist_index = kDefaultWristIndex) {
  return label_displacement(object_pos - hand.joints[wrist_index], gamma);
}

}  // namespace hand3d
