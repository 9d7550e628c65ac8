// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hand3d/ref_model_math.hpp"

// Property checks over random inputs for the fusion layer and the
// flow-matching objective. Used by the `refmath-check` subcommand.

namespace hand3d::refmath {

struct CheckResult {
  std::string name;
  bool passed = true;
  double worst = 0.0;  // largest observed deviation
  double tolerance = 0.0;
};

inline Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = n(rng);
  return m;
}

inline FusionParams random_fusion_params(std::mt19937_64& rng, std::size_t d_v, std::size_t d_s, std::size_t d_a) {
  FusionParams p;
  p.w_query = random_matrix(rng, d_v, d_a, 0.5);
  p.w_key = random_matrix(rng, d_s, d_a, 0.5);
  p.w_value = random_matrix(rng, d_s, d_a, 0.5);
  p.w_out = random_matrix(rng, d_a, d_v, 0.5);
  return p;
}

/// Attention written as explicit loops with a two-pass softmax.
inline Matrix naive_fused_output(const Matrix& v_sem, const Matrix& v_spa, const FusionParams& p) {
  const std::size_t nv = v_sem.rows(), ns = v_spa.rows(), dv = v_sem.cols(), ds = v_spa.cols();
  const std::size_t da = p.w_query.cols();
  Matrix out(nv, dv);
  for (std::size_t i = 0; i < nv; ++i) {
    std::vector<double> q(da, 0.0);
    for (std::size_t a = 0; a < da; ++a)
      for (std::size_t c = 0; c < dv; ++c) q[a] += v_sem(i, c) * p.w_query(c, a);
    std::vector<double> logits(ns, 0.0);
    for (std::size_t j = 0; j < ns; ++j) {
      double dot = 0.0;
      for (std::size_t a = 0; a < da; ++a) {
        double k = 0.0;
        for (std::size_t c = 0; c < ds; ++c) k += v_spa(j, c) * p.w_key(c, a);
        dot += q[a] * k;
      }
      logits[j] = dot / std::sqrt(static_cast<double>(da));
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    std::vector<double> attended(da, 0.0);
    for (std::size_t j = 0; j < ns; ++j) {
      const double w = std::exp(logits[j] - mx) / z;
      for (std::size_t a = 0; a < da; ++a) {
        double val = 0.0;
        for (std::size_t c = 0; c < ds; ++c) val += v_spa(j, c) * p.w_value(c, a);
        attended[a] += w * val;
      }
    }
    std::vector<double> row(dv, 0.0);
    for (std::size_t c = 0; c < dv; ++c) {
      double f = 0.0;
      for (std::size_t a = 0; a < da; ++a) f += attended[a] * p.w_out(a, c);
      row[c] = v_sem(i, c) + p.alpha * f;
    }
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(dv);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(dv);
    for (std::size_t c = 0; c < dv; ++c) out(i, c) = (row[c] - mean) / std::sqrt(var + kLayerNormEpsilon);
  }
  return out;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  return worst;
}

inline std::vector<CheckResult> run_self_check(std::uint64_t seed = 1, int cases = 100) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim(1, 6);
  CheckResult fd{"flow_target equals d/dtau flow_interpolate", true, 0.0, 1e-8};
  CheckResult zero{"flow_loss(target) == 0", true, 0.0, 0.0};
  CheckResult collapse{"fuse(alpha=0) == LayerNorm(v_sem)", true, 0.0, 1e-12};
  CheckResult rows{"attention rows sum to 1", true, 0.0, 1e-12};
  CheckResult oracle{"fuse matches loop oracle", true, 0.0, 1e-9};

  const double taus[] = {0.1, 0.3, 0.5, 0.7, 0.9};
  const double h = 1e-5;
  for (int c = 0; c < cases; ++c) {
    const std::size_t horizon = static_cast<std::size_t>(dim(rng)), adim = static_cast<std::size_t>(dim(rng));
    const Matrix a = random_matrix(rng, horizon, adim), eps = random_matrix(rng, horizon, adim);
    const Matrix target = flow_target(a, eps);
    for (double tau : taus) {
      const Matrix up = flow_interpolate(a, eps, tau + h), down = flow_interpolate(a, eps, tau - h);
      for (std::size_t i = 0; i < target.size(); ++i)
        fd.worst = std::max(fd.worst, std::abs((up.values()[i] - down.values()[i]) / (2 * h) - target.values()[i]));
    }
    zero.worst = std::max(zero.worst, flow_loss(target, a, eps));

    const std::size_t nv = static_cast<std::size_t>(dim(rng)), ns = static_cast<std::size_t>(dim(rng));
    const std::size_t dv = static_cast<std::size_t>(dim(rng)) + 1, ds = static_cast<std::size_t>(dim(rng)),
                      da = static_cast<std::size_t>(dim(rng));
    const Matrix v_sem = random_matrix(rng, nv, dv), v_spa = random_matrix(rng, ns, ds);
    FusionParams p = random_fusion_params(rng, dv, ds, da);
    p.alpha = 0.0;
    collapse.worst = std::max(collapse.worst, max_abs_diff(fuse(v_sem, v_spa, p), layer_norm(v_sem)));
    p.alpha = kDefaultFusionAlpha;
    const Matrix attn = attention_weights(v_sem, v_spa, p);
    for (std::size_t i = 0; i < attn.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < attn.cols(); ++j) s += attn(i, j);
      rows.worst = std::max(rows.worst, std::abs(s - 1.0));
    }
    oracle.worst = std::max(oracle.worst, max_abs_diff(fuse(v_sem, v_spa, p), naive_fused_output(v_sem, v_spa, p)));
  }
  std::vector<CheckResult> out{fd, zero, collapse, rows, oracle};
  for (auto& r : out) r.passed = r.worst <= r.tolerance;
  return out;
}

}  // namespace hand3d::refmath
