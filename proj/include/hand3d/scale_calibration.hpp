// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hand3d/error.hpp"
#include "hand3d/geometry.hpp"
#include "hand3d/hand_kinematics.hpp"

namespace hand3d {

/// Dense per-pixel point map, row-major, camera frame. Values are stored raw;
/// a pixel is invalid when any component is NaN (the on-disk form uses
/// all-three-NaN).
struct PointRaster {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<Vec3> points;

  PointRaster() = default;
  PointRaster(std::uint32_t w, std::uint32_t h) : width(w), height(h), points(std::size_t{w} * h, invalid_point()) {}

  static Vec3 invalid_point() {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, nan};
  }

  const Vec3& at(std::uint32_t col, std::uint32_t row) const { return points[std::size_t{row} * width + col]; }
  Vec3& at(std::uint32_t col, std::uint32_t row) { return points[std::size_t{row} * width + col]; }

  static bool is_nan_pixel(const Vec3& p) { return std::isnan(p.x) || std::isnan(p.y) || std::isnan(p.z); }

  /// Usable for geometry: finite and in front of the camera.
  bool is_valid(std::uint32_t col, std::uint32_t row) const {
    const Vec3& p = at(col, row);
    return p.finite() && p.z > 0.0;
  }

  void check_dimensions() const {
    if (points.size() != std::size_t{width} * height)
      throw Error(Errc::DimensionMismatch, "raster storage does not match declared width x height");
  }
};

struct ScaleFactor {
  double s = 1.0;
  int support_count = 0;
};

struct BBox2D {
  double u_min = 0.0;
  double v_min = 0.0;
  double u_max = 0.0;
  double v_max = 0.0;
  std::string label;
};

struct JointDepthPair {
  int joint_index = 0;
  double metric_z = 0.0;    // from the hand model
  double relative_z = 0.0;  // from the point raster
};

inline std::vector<JointDepthPair> valid_joint_set(const HandFrame& frame, const PointRaster& raster,
                                                   const CameraIntrinsics& k,
                                                   double depth_epsilon = kDefaultDepthEpsilon) {
  raster.check_dimensions();
  std::vector<JointDepthPair> out;
  if (raster.width == 0 || raster.height == 0) return out;
  const VisibilityMask mask = joint_visibility(frame, k, depth_epsilon);
  for (int j = 0; j < kNumJoints; ++j) {
    if (!mask[j]) continue;
    const PixelCoord px = project(frame.joints[j], k, depth_epsilon);
    const auto col = static_cast<std::uint32_t>(
        std::clamp(std::round(px.u), 0.0, static_cast<double>(raster.width - 1)));
    const auto row = static_cast<std::uint32_t>(
        std::clamp(std::round(px.v), 0.0, static_cast<double>(raster.height - 1)));
    if (!raster.is_valid(col, row)) continue;
    const double rel_z = raster.at(col, row).z;
    if (!(rel_z > depth_epsilon) || !(frame.joints[j].z > depth_epsilon)) continue;
    out.push_back({j, frame.joints[j].z, rel_z});
  }
  return out;
}

namespace detail {

// Median of a copy; even count averages the two middle elements.
inline double median(std::vector<double> values) {
  const std::size_t n = values.size();
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace detail

inline ScaleFactor estimate_scale(std::span<const JointDepthPair> pairs) {
  if (pairs.empty()) throw Error(Errc::EmptyOmega, "no valid joints to calibrate against");
  std::vector<double> ratios;
  ratios.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (!(p.relative_z > 0.0)) throw Error(Errc::NonPositiveDepth, "raster depth must be positive");
    ratios.push_back(p.metric_z / p.relative_z);
  }
  return {detail::median(std::move(ratios)), static_cast<int>(pairs.size())};
}

inline PointRaster apply_scale(const PointRaster& raster, const ScaleFactor& s) {
  if (!(s.s > 0.0)) throw Error(Errc::InvalidArgument, "scale must be positive");
  PointRaster out = raster;
  for (Vec3& p : out.points)
    if (!PointRaster::is_nan_pixel(p)) p = s.s * p;
  return out;
}

/// Componentwise median of the valid raster points whose pixel index lies in the box.
inline Vec3 locate_object(const PointRaster& raster, const BBox2D& box) {
  raster.check_dimensions();
  if (!(box.u_min <= box.u_max) || !(box.v_min <= box.v_max) || box.u_min < 0.0 || box.v_min < 0.0 ||
      box.u_max > static_cast<double>(raster.width) || box.v_max > static_cast<double>(raster.height))
    throw Error(Errc::InvalidArgument, "bounding box is outside the image");
  const auto c0 = static_cast<std::uint32_t>(std::ceil(box.u_min));
  const auto r0 = static_cast<std::uint32_t>(std::ceil(box.v_min));
  const auto c1 = std::min<std::uint32_t>(static_cast<std::uint32_t>(std::floor(box.u_max)), raster.width - 1);
  const auto r1 = std::min<std::uint32_t>(static_cast<std::uint32_t>(std::floor(box.v_max)), raster.height - 1);
  std::vector<double> xs, ys, zs;
  for (std::uint32_t r = r0; r <= r1 && r < raster.height; ++r)
    for (std::uint32_t c = c0; c <= c1 && c < raster.width; ++c) {
      if (!raster.is_valid(c, r)) continue;
      const Vec3& p = raster.at(c, r);
      xs.push_back(p.x);
      ys.push_back(p.y);
      zs.push_back(p.z);
    }
  if (xs.empty()) throw Error(Errc::NoValidPoints, "bounding box covers no valid points", box.label);
  return {detail::median(std::move(xs)), detail::median(std::move(ys)), detail::median(std::move(zs))};
}

}  // namespace hand3d
