// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hand3d/error.hpp"
#include "hand3d/geometry.hpp"

namespace hand3d {

inline constexpr int kNumJoints = 21;

enum class HandSide { Left, Right };

constexpr std::string_view to_string(HandSide side) { return side == HandSide::Left ? "left" : "right"; }

inline HandSide hand_side_from_string(std::string_view s) {
  if (s == "left") return HandSide::Left;
  if (s == "right") return HandSide::Right;
  throw Error(Errc::SchemaError, "hand side must be \"left\" or \"right\"");
}

/// 21 joints of one hand in camera coordinates (meters).
struct HandFrame {
  std::array<Vec3, kNumJoints> joints{};
  double timestamp_s = 0.0;
  HandSide side = HandSide::Right;
};

struct WristTrajectory {
  struct Sample {
    double timestamp_s;
    Vec3 position;
  };
  std::vector<Sample> points;
  HandSide side = HandSide::Right;
};

using VisibilityMask = std::array<bool, kNumJoints>;

inline constexpr int kDefaultMinVisible = 11;
inline constexpr int kDefaultWristIndex = 0;
inline constexpr double kDefaultSignificanceDelta = 0.05;  // meters

inline VisibilityMask joint_visibility(const HandFrame& frame, const CameraIntrinsics& k,
                                       double depth_epsilon = kDefaultDepthEpsilon) {
  VisibilityMask mask{};
  for (int j = 0; j < kNumJoints; ++j) {
    const Vec3& p = frame.joints[j];
    mask[j] = p.finite() && p.z > depth_epsilon && is_visible(project(p, k, depth_epsilon), k);
  }
  return mask;
}

inline int count_visible(const VisibilityMask& mask) {
  return static_cast<int>(std::count(mask.begin(), mask.end(), true));
}

inline bool keep_frame(const VisibilityMask& mask, int min_visible = kDefaultMinVisible) {
  return count_visible(mask) >= min_visible;
}

inline WristTrajectory extract_wrist(std::span<const HandFrame> frames, int wrist_index = kDefaultWristIndex) {
  if (frames.empty()) throw Error(Errc::EmptyInput, "no frames to extract a wrist trajectory from");
  if (wrist_index < 0 || wrist_index >= kNumJoints)
    throw Error(Errc::InvalidArgument, "wrist_index must be in [0, 20]");
  WristTrajectory traj;
  traj.side = frames.front().side;
  traj.points.reserve(frames.size());
  for (const HandFrame& f : frames) {
    if (!traj.points.empty() && !(f.timestamp_s > traj.points.back().timestamp_s))
      throw Error(Errc::NonMonotonicTime, "frame timestamps must be strictly increasing");
    traj.points.push_back({f.timestamp_s, f.joints[wrist_index]});
  }
  return traj;
}

/// Maximum excursion of the trajectory from its first point.
inline double max_excursion(const WristTrajectory& traj) {
  double best = 0.0;
  if (traj.points.empty()) return best;
  const Vec3 origin = traj.points.front().position;
  for (const auto& s : traj.points) best = std::max(best, (s.position - origin).norm());
  return best;
}

inline bool is_significant(const WristTrajectory& traj, double delta_m = kDefaultSignificanceDelta) {
  if (!(delta_m >= 0.0)) throw Error(Errc::InvalidArgument, "delta_m must be non-negative");
  return !traj.points.empty() && max_excursion(traj) >= delta_m;
}

}  // namespace hand3d
