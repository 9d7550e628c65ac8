// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "hand3d/error.hpp"

namespace hand3d::refmath {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows_ * cols_) throw Error(Errc::ShapeMismatch, "value count does not match shape");
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  const std::vector<double>& values() const { return data_; }
  std::vector<double>& values() { return data_; }

  bool finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

using FeatureMatrix = Matrix;
/// Horizon × action-dimension.
using ActionChunk = Matrix;

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw Error(Errc::ShapeMismatch, "inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

/// a + row-broadcast bias; an empty bias is a no-op.
inline Matrix add_row_bias(Matrix a, const std::vector<double>& bias) {
  if (bias.empty()) return a;
  if (bias.size() != a.cols()) throw Error(Errc::ShapeMismatch, "bias length differs from column count");
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) a(i, j) += bias[j];
  return a;
}

inline void softmax_rows(Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < m.cols(); ++j) mx = std::max(mx, m(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) sum += (m(i, j) = std::exp(m(i, j) - mx));
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) /= sum;
  }
}

inline constexpr double kLayerNormEpsilon = 1e-5;

/// Per-row normalization over the feature axis; empty gain/bias mean 1 and 0.
inline Matrix layer_norm(const Matrix& x, const std::vector<double>& gain = {}, const std::vector<double>& bias = {},
                         double eps = kLayerNormEpsilon) {
  if ((!gain.empty() && gain.size() != x.cols()) || (!bias.empty() && bias.size() != x.cols()))
    throw Error(Errc::ShapeMismatch, "layer-norm parameters do not match feature width");
  Matrix y(x.rows(), x.cols());
  const double n = static_cast<double>(x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) mean += x(i, j);
    mean /= n;
    double var = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) var += (x(i, j) - mean) * (x(i, j) - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double g = gain.empty() ? 1.0 : gain[j];
      const double b = bias.empty() ? 0.0 : bias[j];
      y(i, j) = (x(i, j) - mean) * inv * g + b;
    }
  }
  return y;
}

inline constexpr double kDefaultFusionAlpha = 0.5;

/// Single-head cross-attention fusion. Shapes: w_query d_v×d_a, w_key and
/// w_value d_s×d_a, w_out d_a×d_v. Biases are optional (empty = none).
struct FusionParams {
  Matrix w_query, w_key, w_value, w_out;
  std::vector<double> b_query, b_key, b_value, b_out;
  double alpha = kDefaultFusionAlpha;
  std::vector<double> ln_gain, ln_bias;
  double dropout_rate = 0.0;

  void validate(std::size_t d_v, std::size_t d_s) const {
    const std::size_t d_a = w_query.cols();
    if (w_query.rows() != d_v || w_key.rows() != d_s || w_value.rows() != d_s || w_key.cols() != d_a ||
        w_value.cols() != d_a || w_out.rows() != d_a || w_out.cols() != d_v)
      throw Error(Errc::ShapeMismatch, "fusion projections have inconsistent shapes");
    if (!std::isfinite(alpha)) throw Error(Errc::InvalidArgument, "alpha must be finite");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error(Errc::InvalidArgument, "dropout rate must be in [0, 1)");
  }
};

/// Row-stochastic attention weights of semantic tokens over spatial tokens.
inline Matrix attention_weights(const FeatureMatrix& v_sem, const FeatureMatrix& v_spa, const FusionParams& p) {
  p.validate(v_sem.cols(), v_spa.cols());
  const Matrix q = add_row_bias(matmul(v_sem, p.w_query), p.b_query);
  const Matrix k = add_row_bias(matmul(v_spa, p.w_key), p.b_key);
  Matrix scores(q.rows(), k.rows());
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  for (std::size_t i = 0; i < q.rows(); ++i)
    for (std::size_t j = 0; j < k.rows(); ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < q.cols(); ++c) s += q(i, c) * k(j, c);
      scores(i, j) = s * scale;
    }
  softmax_rows(scores);
  return scores;
}

/// F_spa: attended spatial features projected back to the semantic width.
inline Matrix spatial_features(const FeatureMatrix& v_sem, const FeatureMatrix& v_spa, const FusionParams& p) {
  const Matrix a = attention_weights(v_sem, v_spa, p);
  const Matrix v = add_row_bias(matmul(v_spa, p.w_value), p.b_value);
  return add_row_bias(matmul(matmul(a, v), p.w_out), p.b_out);
}

/// LayerNorm(v_sem + alpha · Dropout(F_spa)). Dropout uses the caller's 0/1
/// mask with inverted scaling; without a mask dropout is off.
inline FeatureMatrix fuse(const FeatureMatrix& v_sem, const FeatureMatrix& v_spa, const FusionParams& p,
                          const std::optional<Matrix>& dropout_mask = std::nullopt) {
  if (v_sem.rows() == 0 || v_spa.rows() == 0) throw Error(Errc::ShapeMismatch, "fusion inputs must have tokens");
  if (!v_sem.finite() || !v_spa.finite()) throw Error(Errc::InvalidArgument, "features must be finite");
  Matrix f = spatial_features(v_sem, v_spa, p);
  if (dropout_mask) {
    if (!dropout_mask->same_shape(f)) throw Error(Errc::ShapeMismatch, "dropout mask shape differs from features");
    const double keep = 1.0 / (1.0 - p.dropout_rate);
    for (std::size_t i = 0; i < f.size(); ++i) f.values()[i] *= dropout_mask->values()[i] * keep;
  }
  Matrix residual = v_sem;
  for (std::size_t i = 0; i < residual.size(); ++i) residual.values()[i] += p.alpha * f.values()[i];
  return layer_norm(residual, p.ln_gain, p.ln_bias);
}

// Flow matching -------------------------------------------------------------

inline ActionChunk flow_interpolate(const ActionChunk& a, const ActionChunk& eps, double tau) {
  if (!a.same_shape(eps)) throw Error(Errc::ShapeMismatch, "action and noise chunks differ in shape");
  if (!(tau >= 0.0 && tau <= 1.0)) throw Error(Errc::TauOutOfRange, "tau must be in [0, 1]");
  ActionChunk out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i)
    out.values()[i] = (1.0 - tau) * eps.values()[i] + tau * a.values()[i];
  return out;
}

inline ActionChunk flow_target(const ActionChunk& a, const ActionChunk& eps) {
  if (!a.same_shape(eps)) throw Error(Errc::ShapeMismatch, "action and noise chunks differ in shape");
  ActionChunk out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.values()[i] = a.values()[i] - eps.values()[i];
  return out;
}

/// Mean over elements of (pred − (a − eps))².
inline double flow_loss(const ActionChunk& pred, const ActionChunk& a, const ActionChunk& eps) {
  if (!pred.same_shape(a) || !a.same_shape(eps)) throw Error(Errc::ShapeMismatch, "chunk shapes differ");
  if (a.size() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = pred.values()[i] - (a.values()[i] - eps.values()[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

}  // namespace hand3d::refmath
