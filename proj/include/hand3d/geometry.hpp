// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "hand3d/error.hpp"

namespace hand3d {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

  friend constexpr Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend constexpr Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr Vec3 operator*(double s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }
  friend constexpr Vec3 operator*(const Vec3& a, double s) { return s * a; }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;

  constexpr double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  constexpr Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

using Mat3 = std::array<std::array<double, 3>, 3>;

namespace detail {

inline Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
  return c;
}

inline Mat3 transpose(const Mat3& a) {
  Mat3 t{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t[i][j] = a[j][i];
  return t;
}

inline double det(const Mat3& m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

// Largest deviation of m from a proper rotation: max |(MᵀM − I)_ij| and |det − 1|.
inline double rotation_defect(const Mat3& m) {
  double worst = 0.0;
  const Mat3 mtm = matmul(transpose(m), m);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      worst = std::max(worst, std::abs(mtm[i][j] - (i == j ? 1.0 : 0.0)));
  worst = std::max(worst, std::abs(det(m) - 1.0));
  for (const auto& row : m)
    for (double v : row)
      if (!std::isfinite(v)) return INFINITY;
  return worst;
}

}  // namespace detail

inline constexpr double kRotationTolerance = 1e-9;

/// Proper rotation matrix. Construction from raw entries validates
/// orthonormality and det = +1 to kRotationTolerance.
class Rotation3 {
 public:
  Rotation3() : m_{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}} {}

  static Rotation3 from_matrix(const Mat3& m, double tolerance = kRotationTolerance) {
    if (!(detail::rotation_defect(m) <= tolerance))
      throw Error(Errc::NotARotation, "matrix is not a proper rotation");
    return Rotation3(m, Unchecked{});
  }

  static Rotation3 identity() { return {}; }

  static Rotation3 about_x(double deg) {
    const double a = deg * std::numbers::pi / 180.0, c = std::cos(a), s = std::sin(a);
    return Rotation3({{{1, 0, 0}, {0, c, -s}, {0, s, c}}}, Unchecked{});
  }
  static Rotation3 about_y(double deg) {
    const double a = deg * std::numbers::pi / 180.0, c = std::cos(a), s = std::sin(a);
    return Rotation3({{{c, 0, s}, {0, 1, 0}, {-s, 0, c}}}, Unchecked{});
  }
  static Rotation3 about_z(double deg) {
    const double a = deg * std::numbers::pi / 180.0, c = std::cos(a), s = std::sin(a);
    return Rotation3({{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}}, Unchecked{});
  }

  const Mat3& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_[r][c]; }

  Rotation3 transposed() const { return Rotation3(detail::transpose(m_), Unchecked{}); }

  Vec3 operator*(const Vec3& p) const {
    return {m_[0][0] * p.x + m_[0][1] * p.y + m_[0][2] * p.z,
            m_[1][0] * p.x + m_[1][1] * p.y + m_[1][2] * p.z,
            m_[2][0] * p.x + m_[2][1] * p.y + m_[2][2] * p.z};
  }
  Rotation3 operator*(const Rotation3& o) const { return Rotation3(detail::matmul(m_, o.m_), Unchecked{}); }

 private:
  struct Unchecked {};
  Rotation3(const Mat3& m, Unchecked) : m_(m) {}

  Mat3 m_;
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy))
      throw Error(Errc::InvalidArgument, "focal lengths must be positive");
    if (!std::isfinite(cx) || !std::isfinite(cy))
      throw Error(Errc::InvalidArgument, "principal point must be finite");
    if (width < 1 || height < 1) throw Error(Errc::InvalidArgument, "image size must be at least 1x1");
  }
};

/// World-to-camera rigid transform: p_cam = R·p_world + t.
struct CameraPose {
  Rotation3 rotation;
  Vec3 translation;

  static CameraPose identity() { return {}; }
};

struct AxisAngle {
  Vec3 axis;               // unit, or zero when angle_deg == 0
  double angle_deg = 0.0;  // [0, 180]
};

struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

inline constexpr double kDefaultDepthEpsilon = 0.01;  // meters
inline constexpr double kDefaultZeroAngleRad = 1e-7;
inline constexpr double kDefaultNearPiRad = 1e-3;

inline Vec3 transform_to_camera(const Vec3& p_world, const CameraPose& pose) {
  return pose.rotation * p_world + pose.translation;
}

inline PixelCoord project(const Vec3& p_cam, const CameraIntrinsics& k,
                          double depth_epsilon = kDefaultDepthEpsilon) {
  if (!(p_cam.z > depth_epsilon))
    throw Error(Errc::NonPositiveDepth, "point is behind or on the camera plane");
  return {k.fx * (p_cam.x / p_cam.z) + k.cx, k.fy * (p_cam.y / p_cam.z) + k.cy};
}

inline bool is_visible(const PixelCoord& px, const CameraIntrinsics& k) {
  return px.u >= 0.0 && px.u < static_cast<double>(k.width) && px.v >= 0.0 &&
         px.v < static_cast<double>(k.height);
}

/// Applies `second` after `first`: the result maps p to second(first(p)).
inline CameraPose compose(const CameraPose& second, const CameraPose& first) {
  return {second.rotation * first.rotation, second.rotation * first.translation + second.translation};
}

/// Camera-2 pose expressed relative to camera 1, so that compose(rel, p1) == p2.
inline CameraPose relative_pose(const CameraPose& p1, const CameraPose& p2) {
  const Rotation3 r_rel = p2.rotation * p1.rotation.transposed();
  return {r_rel, p2.translation - r_rel * p1.translation};
}

inline Rotation3 rotation_from_axis_angle(const AxisAngle& aa) {
  if (aa.angle_deg == 0.0) return Rotation3::identity();
  const double a = aa.angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(a), s = std::sin(a), C = 1.0 - c;
  const double x = aa.axis.x, y = aa.axis.y, z = aa.axis.z;
  const Mat3 m{{{c + x * x * C, x * y * C - z * s, x * z * C + y * s},
                {y * x * C + z * s, c + y * y * C, y * z * C - x * s},
                {z * x * C - y * s, z * y * C + x * s, c + z * z * C}}};
  return Rotation3::from_matrix(m, 1e-6);
}

struct AxisAngleOptions {
  double zero_angle_rad = kDefaultZeroAngleRad;
  // Below this distance from pi the axis comes from the symmetric part.
  double near_pi_rad = kDefaultNearPiRad;
};

inline AxisAngle to_axis_angle(const Mat3& r, const AxisAngleOptions& opt = {}) {
  if (!(detail::rotation_defect(r) <= 1e-6))
    throw Error(Errc::NotARotation, "matrix is not orthonormal with det +1");

  const double trace = r[0][0] + r[1][1] + r[2][2];
  const double c = std::clamp((trace - 1.0) / 2.0, -1.0, 1.0);
  const Vec3 w{r[2][1] - r[1][2], r[0][2] - r[2][0], r[1][0] - r[0][1]};  // 2·sinθ·u
  // atan2 equals arccos(c) on [0, π] but stays well conditioned near 0 and π.
  const double angle = std::atan2(0.5 * w.norm(), c);

  if (angle <= opt.zero_angle_rad) return {};

  Vec3 axis;
  if (angle < std::numbers::pi - opt.near_pi_rad) {
    axis = (1.0 / w.norm()) * w;
  } else {
    // Symmetric part: (R + Rᵀ)/2 = c·I + (1 − c)·u·uᵀ; at π this is (R + I)/2.
    Mat3 b{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        b[i][j] = (0.5 * (r[i][j] + r[j][i]) - (i == j ? c : 0.0)) / (1.0 - c);
    int k = 0;
    for (int i = 1; i < 3; ++i)
      if (b[i][i] > b[k][k]) k = i;
    const double len = std::sqrt(b[k][k]);
    axis = {b[0][k] / len, b[1][k] / len, b[2][k] / len};
    axis = (1.0 / axis.norm()) * axis;
    if (axis.dot(w) < 0.0) axis = -axis;
  }
  return {axis, angle * 180.0 / std::numbers::pi};
}

inline AxisAngle to_axis_angle(const Rotation3& r, const AxisAngleOptions& opt = {}) {
  return to_axis_angle(r.matrix(), opt);
}

}  // namespace hand3d
