// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "hand3d/error.hpp"
#include "hand3d/geometry.hpp"
#include "hand3d/hand_kinematics.hpp"

namespace hand3d {

struct AxisRange {
  double min = 0.0;
  double max = 1.0;
  double extent() const { return max - min; }
};

/// Token vocabulary is flat: x-bins in [0, K), y-bins in [K, 2K), z-bins in [2K, 3K).
struct TokenizerConfig {
  int k_bins = 1024;
  AxisRange x{-0.5, 0.5};
  AxisRange y{-0.5, 0.5};
  AxisRange z{0.0, 1.0};

  const AxisRange& range(int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }

  void validate() const {
    if (k_bins < 2) throw Error(Errc::InvalidArgument, "k_bins must be at least 2");
    for (int a = 0; a < 3; ++a) {
      const AxisRange& r = range(a);
      if (!std::isfinite(r.min) || !std::isfinite(r.max) || !(r.min < r.max))
        throw Error(Errc::InvalidArgument, "tokenizer range requires min < max");
    }
  }

  int vocab_size() const { return 3 * k_bins; }
  double half_bin(int axis) const { return range(axis).extent() / (2.0 * k_bins); }
};

using MotionTriplet = std::array<int, 3>;

struct MotionTokenSequence {
  std::vector<int> tokens;

  std::size_t num_points() const { return tokens.size() / 3; }
  friend bool operator==(const MotionTokenSequence&, const MotionTokenSequence&) = default;
};

/// Bin index (without vocabulary offset) of coordinate `a` on `axis`.
inline int axis_bin(double a, int axis, const TokenizerConfig& cfg) {
  const AxisRange& r = cfg.range(axis);
  const double clamped = std::clamp(a, r.min, r.max);
  const double scaled = std::floor((clamped - r.min) / r.extent() * cfg.k_bins);
  return static_cast<int>(std::clamp(scaled, 0.0, static_cast<double>(cfg.k_bins - 1)));
}

inline double axis_bin_center(int bin, int axis, const TokenizerConfig& cfg) {
  const AxisRange& r = cfg.range(axis);
  return r.min + (bin + 0.5) * r.extent() / cfg.k_bins;
}

inline MotionTriplet tokenize_point(const Vec3& p, const TokenizerConfig& cfg) {
  if (!p.finite()) throw Error(Errc::InvalidArgument, "cannot tokenize a non-finite point");
  MotionTriplet m{};
  for (int a = 0; a < 3; ++a) m[a] = a * cfg.k_bins + axis_bin(p[a], a, cfg);
  return m;
}

inline Vec3 detokenize_point(const MotionTriplet& m, const TokenizerConfig& cfg) {
  Vec3 p;
  for (int a = 0; a < 3; ++a) {
    const int bin = m[a] - a * cfg.k_bins;
    if (bin < 0 || bin >= cfg.k_bins) throw Error(Errc::TokenOutOfRange, "motion token outside its axis vocabulary");
    p[a] = axis_bin_center(bin, a, cfg);
  }
  return p;
}

inline MotionTokenSequence encode_points(std::span<const Vec3> points, const TokenizerConfig& cfg) {
  if (points.empty()) throw Error(Errc::EmptyInput, "cannot encode an empty trajectory");
  MotionTokenSequence seq;
  seq.tokens.reserve(points.size() * 3);
  for (const Vec3& p : points) {
    const MotionTriplet m = tokenize_point(p, cfg);
    seq.tokens.insert(seq.tokens.end(), m.begin(), m.end());
  }
  return seq;
}

inline MotionTokenSequence encode_trajectory(const WristTrajectory& traj, const TokenizerConfig& cfg) {
  std::vector<Vec3> points;
  points.reserve(traj.points.size());
  for (const auto& s : traj.points) points.push_back(s.position);
  return encode_points(points, cfg);
}

inline std::vector<Vec3> decode_trajectory(const MotionTokenSequence& seq, const TokenizerConfig& cfg) {
  if (seq.tokens.empty()) throw Error(Errc::EmptyInput, "token sequence is empty");
  if (seq.tokens.size() % 3 != 0) throw Error(Errc::MalformedSequence, "token count is not a multiple of 3");
  std::vector<Vec3> out;
  out.reserve(seq.num_points());
  for (std::size_t i = 0; i < seq.tokens.size(); i += 3) {
    const MotionTriplet m{seq.tokens[i], seq.tokens[i + 1], seq.tokens[i + 2]};
    for (int a = 0; a < 3; ++a) {
      const int bin = m[a] - a * cfg.k_bins;
      if (bin < 0 || bin >= cfg.k_bins)
        throw Error(Errc::MalformedSequence, "token " + std::to_string(i + a) + " is outside its axis slot");
    }
    out.push_back(detokenize_point(m, cfg));
  }
  return out;
}

}  // namespace hand3d
