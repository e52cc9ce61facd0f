// Copyright (C) 2026 dynts-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <utility>

namespace dynts {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Row-wise softmax, stabilized by subtracting the row maximum.
/// Every output row is non-negative and sums to 1 within 1e-12.
/// Throws std::invalid_argument if the input contains NaN/Inf.
Mat softmax_rows(const Eigen::Ref<const Mat>& m);

/// Rotates adjacent coordinate pairs (v[2j], v[2j+1]) by angle
/// theta_j * position with theta_j = base^(-2j/n), n = v.size().
/// Norm-preserving per pair. Throws on odd length or negative position.
Vec rotary_apply(const Eigen::Ref<const Vec>& v, int position, double base = 10000.0);

/// Exact (erf-based) GELU and its derivative.
double gelu(double x);
double gelu_grad(double x);

/// Three-layer MLP weights, shape chain d -> m1 -> m2 -> m3.
/// The default chain is d -> 2d -> d/2 -> 1 (d must be even for it).
struct MlpParams {
  Mat w1, w2, w3;
  Vec b1, b2, b3;

  int input_dim() const { return static_cast<int>(w1.cols()); }
  int output_dim() const { return static_cast<int>(w3.rows()); }
  std::size_t param_count() const;
  void validate() const;  // throws std::invalid_argument on inconsistent shapes

  static MlpParams zeros(int d, int m1, int m2, int m3);
  // Default chain with seeded Gaussian init scaled by 1/sqrt(fan_in).
  static MlpParams seeded(int d, std::uint64_t seed);
  static MlpParams seeded_shape(int d, int m1, int m2, int m3, std::uint64_t seed);
};

struct MlpActivations {
  Vec x;        // input
  Vec z1, a1;   // pre/post activation, layer 1
  Vec z2, a2;   // pre/post activation, layer 2
  double score = 0.0;
};

struct MlpGrads {
  Mat w1, w2, w3;
  Vec b1, b2, b3;
  Vec x;  // gradient w.r.t. the input

  static MlpGrads zeros_like(const MlpParams& p);
};

/// score = w3 * gelu(w2 * gelu(w1 x + b1) + b2) + b3 (identity on the output layer).
/// The activations are cached for mlp_backward.
std::pair<double, MlpActivations> mlp_forward(const MlpParams& p, const Eigen::Ref<const Vec>& x);

/// Exact reverse-mode gradients of mlp_forward's scalar output, scaled by
/// `upstream`. Throws if the activation cache does not match the params.
MlpGrads mlp_backward(const MlpParams& p, const MlpActivations& acts, double upstream);

/// Central finite differences over every parameter of `at` (eps perturbation),
/// compared entry-wise against `analytic`.
/// Returns max over parameters of |g_analytic - g_fd| / max(1, |g_fd|).
/// Throws if f evaluates to a non-finite value.
double finite_diff_check(const std::function<double(const MlpParams&)>& f,
                         const MlpParams& at, const MlpGrads& analytic, double eps);

// Applies fn to the six parameter tensors of p and g in a fixed order.
template <class P, class G, class F>
void zip_mlp_tensors(P& p, G& g, F&& fn) {
  fn(p.w1, g.w1);
  fn(p.b1, g.b1);
  fn(p.w2, g.w2);
  fn(p.b2, g.b2);
  fn(p.w3, g.w3);
  fn(p.b3, g.b3);
}

template <class P, class F>
void for_each_mlp_tensor(P& p, F&& fn) {
  fn(p.w1);
  fn(p.b1);
  fn(p.w2);
  fn(p.b2);
  fn(p.w3);
  fn(p.b3);
}

}  // namespace dynts
