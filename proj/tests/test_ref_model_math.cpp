// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "hand3d/ref_model_check.hpp"
#include "hand3d/ref_model_math.hpp"

using namespace hand3d;
using namespace hand3d::refmath;

namespace {

// Per-row attention oracle: log-sum-exp softmax, explicit projections.
Matrix oracle_fuse(const Matrix& sem, const Matrix& spa, const FusionParams& p) {
  const std::size_t da = p.w_query.cols();
  Matrix out(sem.rows(), sem.cols());
  for (std::size_t i = 0; i < sem.rows(); ++i) {
    std::vector<double> logits;
    for (std::size_t j = 0; j < spa.rows(); ++j) {
      double s = 0.0;
      for (std::size_t a = 0; a < da; ++a) {
        double q = 0.0, k = 0.0;
        for (std::size_t c = 0; c < sem.cols(); ++c) q += sem(i, c) * p.w_query(c, a);
        for (std::size_t c = 0; c < spa.cols(); ++c) k += spa(j, c) * p.w_key(c, a);
        s += q * k;
      }
      logits.push_back(s / std::sqrt(static_cast<double>(da)));
    }
    double mx = logits[0];
    for (double l : logits) mx = std::max(mx, l);
    double lse = 0.0;
    for (double l : logits) lse += std::exp(l - mx);
    lse = mx + std::log(lse);
    std::vector<double> row(sem.cols());
    for (std::size_t c = 0; c < sem.cols(); ++c) {
      double f = 0.0;
      for (std::size_t j = 0; j < spa.rows(); ++j) {
        const double w = std::exp(logits[j] - lse);
        for (std::size_t a = 0; a < da; ++a) {
          double v = 0.0;
          for (std::size_t cc = 0; cc < spa.cols(); ++cc) v += spa(j, cc) * p.w_value(cc, a);
          f += w * v * p.w_out(a, c);
        }
      }
      row[c] = sem(i, c) + p.alpha * f;
    }
    double mean = 0.0, var = 0.0;
    for (double v : row) mean += v / static_cast<double>(row.size());
    for (double v : row) var += (v - mean) * (v - mean) / static_cast<double>(row.size());
    for (std::size_t c = 0; c < row.size(); ++c) out(i, c) = (row[c] - mean) / std::sqrt(var + 1e-5);
  }
  return out;
}

}  // namespace

TEST(RefModelMath, AlphaZeroCollapsesToLayerNorm) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Matrix sem = random_matrix(rng, 3, 5), spa = random_matrix(rng, 4, 2);
    FusionParams p = random_fusion_params(rng, 5, 2, 3);
    p.alpha = 0.0;
    EXPECT_LE(max_abs_diff(fuse(sem, spa, p), layer_norm(sem)), 1e-12);
  }
}

TEST(RefModelMath, ZeroSpatialInputGivesLayerNorm) {
  std::mt19937_64 rng(2);
  const Matrix sem = random_matrix(rng, 2, 4), spa(3, 3, 0.0);
  const FusionParams p = random_fusion_params(rng, 4, 3, 2);
  EXPECT_LE(max_abs_diff(fuse(sem, spa, p), layer_norm(sem)), 1e-15);
}

TEST(RefModelMath, MatchesLoopOracle) {
  std::mt19937_64 rng(3);
  const Matrix sem = random_matrix(rng, 2, 4), spa = random_matrix(rng, 3, 4);
  const FusionParams p = random_fusion_params(rng, 4, 4, 4);
  EXPECT_LE(max_abs_diff(fuse(sem, spa, p), oracle_fuse(sem, spa, p)), 1e-9);
  for (int i = 0; i < 50; ++i) {
    const Matrix s2 = random_matrix(rng, 1 + i % 4, 3), v2 = random_matrix(rng, 1 + i % 5, 2);
    const FusionParams p2 = random_fusion_params(rng, 3, 2, 1 + i % 3);
    EXPECT_LE(max_abs_diff(fuse(s2, v2, p2), oracle_fuse(s2, v2, p2)), 1e-9);
  }
}

TEST(RefModelMath, AttentionRowsSumToOne) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const Matrix sem = random_matrix(rng, 4, 3, 3.0), spa = random_matrix(rng, 6, 2, 3.0);
    const Matrix a = attention_weights(sem, spa, random_fusion_params(rng, 3, 2, 4));
    for (std::size_t r = 0; r < a.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < a.cols(); ++c) {
        EXPECT_GE(a(r, c), 0.0);
        s += a(r, c);
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(RefModelMath, FuseIsContinuousInAlpha) {
  std::mt19937_64 rng(5);
  const Matrix sem = random_matrix(rng, 3, 6), spa = random_matrix(rng, 4, 3);
  FusionParams p = random_fusion_params(rng, 6, 3, 2);
  p.alpha = 0.5;
  const Matrix base = fuse(sem, spa, p);
  double prev = 1e9;
  for (double h : {1e-1, 1e-2, 1e-3, 1e-4}) {
    p.alpha = 0.5 + h;
    const double d = max_abs_diff(fuse(sem, spa, p), base);
    EXPECT_LT(d, prev);
    EXPECT_LT(d, 100.0 * h);  // Lipschitz at desk scale
    prev = d;
  }
}

TEST(RefModelMath, DropoutMask) {
  std::mt19937_64 rng(6);
  const Matrix sem = random_matrix(rng, 2, 3), spa = random_matrix(rng, 2, 3);
  FusionParams p = random_fusion_params(rng, 3, 3, 2);
  p.dropout_rate = 0.5;
  EXPECT_LE(max_abs_diff(fuse(sem, spa, p, Matrix(2, 3, 0.0)), layer_norm(sem)), 1e-15);
  // All-ones mask at rate r scales F_spa by 1/(1-r), same as alpha·2.
  FusionParams doubled = p;
  doubled.alpha *= 2.0;
  doubled.dropout_rate = 0.0;
  EXPECT_LE(max_abs_diff(fuse(sem, spa, p, Matrix(2, 3, 1.0)), fuse(sem, spa, doubled)), 1e-12);
  EXPECT_THROW(fuse(sem, spa, p, Matrix(3, 3, 1.0)), Error);
}

TEST(RefModelMath, ShapeErrors) {
  std::mt19937_64 rng(7);
  const FusionParams p = random_fusion_params(rng, 3, 2, 2);
  try {
    fuse(random_matrix(rng, 2, 4), random_matrix(rng, 2, 2), p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ShapeMismatch);
  }
  EXPECT_THROW(flow_target(Matrix(2, 2), Matrix(2, 3)), Error);
}

TEST(RefModelMath, FlowInterpolateExamples) {
  const Matrix a(2, 3, 4.0), eps(2, 3, -1.0);
  EXPECT_EQ(flow_interpolate(a, eps, 0.0), eps);
  EXPECT_EQ(flow_interpolate(a, eps, 1.0), a);
  EXPECT_EQ(flow_interpolate(Matrix(1, 1, 4.0), Matrix(1, 1, 0.0), 0.25)(0, 0), 1.0);
  try {
    flow_interpolate(a, eps, 1.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TauOutOfRange);
  }
}

TEST(RefModelMath, FlowTargetAndLoss) {
  const Matrix a(2, 2, 3.0);
  EXPECT_EQ(flow_target(a, a), Matrix(2, 2, 0.0));
  EXPECT_EQ(flow_target(Matrix(1, 1, 1.0), Matrix(1, 1, 0.0))(0, 0), 1.0);
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    const Matrix x = random_matrix(rng, 4, 7), e = random_matrix(rng, 4, 7);
    Matrix tgt = flow_target(x, e);
    EXPECT_EQ(flow_loss(tgt, x, e), 0.0);
    for (double& v : tgt.values()) v += 1.0;
    EXPECT_NEAR(flow_loss(tgt, x, e), 1.0, 1e-12);
    const Matrix pred = random_matrix(rng, 4, 7);
    double sum = 0.0;
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 7; ++c) sum += std::pow(pred(r, c) - (x(r, c) - e(r, c)), 2);
    EXPECT_NEAR(flow_loss(pred, x, e), sum / 28.0, 1e-12);
    EXPECT_GE(flow_loss(pred, x, e), 0.0);
  }
}

TEST(RefModelMath, FiniteDifferenceDerivative) {
  std::mt19937_64 rng(9);
  const double h = 1e-5;
  for (int i = 0; i < 100; ++i) {
    const Matrix x = random_matrix(rng, 5, 3), e = random_matrix(rng, 5, 3);
    const Matrix tgt = flow_target(x, e);
    for (double tau : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const Matrix up = flow_interpolate(x, e, tau + h), down = flow_interpolate(x, e, tau - h);
      for (std::size_t k = 0; k < tgt.size(); ++k)
        EXPECT_NEAR((up.values()[k] - down.values()[k]) / (2 * h), tgt.values()[k], 1e-8);
    }
  }
}

TEST(RefModelMath, SelfCheckPasses) {
  for (const auto& r : run_self_check(11, 50)) EXPECT_TRUE(r.passed) << r.name << " worst " << r.worst;
}
