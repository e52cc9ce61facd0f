// Copyright (C) 2026 dynts-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "dynts/numkernel.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace dynts {

Mat softmax_rows(const Eigen::Ref<const Mat>& m) {
  if (!m.allFinite()) {
    throw std::invalid_argument("softmax_rows: input contains NaN or Inf");
  }
  Mat out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double mx = m.row(i).maxCoeff();
    Eigen::RowVectorXd e = (m.row(i).array() - mx).exp();
    out.row(i) = e / e.sum();
  }
  return out;
}

Vec rotary_apply(const Eigen::Ref<const Vec>& v, int position, double base) {
  if (v.size() % 2 != 0) {
    throw std::invalid_argument("rotary_apply: vector length must be even");
  }
  if (position < 0) {
    throw std::invalid_argument("rotary_apply: position must be >= 0");
  }
  const int n = static_cast<int>(v.size());
  Vec out(n);
  for (int j = 0; j * 2 < n; ++j) {
    const double theta = std::pow(base, -2.0 * j / n);
    const double angle = theta * position;
    const double c = std::cos(angle), s = std::sin(angle);
    const double x = v[2 * j], y = v[2 * j + 1];
    out[2 * j] = x * c - y * s;
    out[2 * j + 1] = x * s + y * c;
  }
  return out;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
  const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  const double Phi = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  return Phi + x * phi;
}

std::size_t MlpParams::param_count() const {
  return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size() + w3.size() +
                                  b3.size());
}

void MlpParams::validate() const {
  const bool ok = w1.rows() == b1.size() && w2.cols() == w1.rows() && w2.rows() == b2.size() &&
                  w3.cols() == w2.rows() && w3.rows() == b3.size() && w1.cols() >= 1;
  if (!ok) {
    throw std::invalid_argument("MlpParams: inconsistent shape chain");
  }
}

MlpParams MlpParams::zeros(int d, int m1, int m2, int m3) {
  MlpParams p;
  p.w1 = Mat::Zero(m1, d);
  p.b1 = Vec::Zero(m1);
  p.w2 = Mat::Zero(m2, m1);
  p.b2 = Vec::Zero(m2);
  p.w3 = Mat::Zero(m3, m2);
  p.b3 = Vec::Zero(m3);
  return p;
}

MlpParams MlpParams::seeded_shape(int d, int m1, int m2, int m3, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto fill = [&](Mat& w) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        w(i, j) = scale * gauss(rng);
      }
    }
  };
  MlpParams p = zeros(d, m1, m2, m3);
  fill(p.w1);
  fill(p.w2);
  fill(p.w3);
  return p;
}

MlpParams MlpParams::seeded(int d, std::uint64_t seed) {
  if (d % 2 != 0) {
    throw std::invalid_argument("MlpParams::seeded: d must be even for the d/2 hidden layer");
  }
  return seeded_shape(d, 2 * d, d / 2, 1, seed);
}

std::pair<double, MlpActivations> mlp_forward(const MlpParams& p, const Eigen::Ref<const Vec>& x) {
  p.validate();
  if (x.size() != p.w1.cols()) {
    throw std::invalid_argument("mlp_forward: input dimension mismatch");
  }
  MlpActivations a;
  a.x = x;
  a.z1 = p.w1 * x + p.b1;
  a.a1 = a.z1.unaryExpr([](double v) { return gelu(v); });
  a.z2 = p.w2 * a.a1 + p.b2;
  a.a2 = a.z2.unaryExpr([](double v) { return gelu(v); });
  a.score = (p.w3 * a.a2 + p.b3)(0);
  return {a.score, a};
}

MlpGrads MlpGrads::zeros_like(const MlpParams& p) {
  MlpGrads g;
  g.w1 = Mat::Zero(p.w1.rows(), p.w1.cols());
  g.b1 = Vec::Zero(p.b1.size());
  g.w2 = Mat::Zero(p.w2.rows(), p.w2.cols());
  g.b2 = Vec::Zero(p.b2.size());
  g.w3 = Mat::Zero(p.w3.rows(), p.w3.cols());
  g.b3 = Vec::Zero(p.b3.size());
  g.x = Vec::Zero(p.w1.cols());
  return g;
}

MlpGrads mlp_backward(const MlpParams& p, const MlpActivations& acts, double upstream) {
  p.validate();
  const bool fresh = acts.x.size() == p.w1.cols() && acts.z1.size() == p.w1.rows() &&
                     acts.a1.size() == p.w1.rows() && acts.z2.size() == p.w2.rows() &&
                     acts.a2.size() == p.w2.rows();
  if (!fresh) {
    throw std::invalid_argument("mlp_backward: activation cache does not match params");
  }
  MlpGrads g = MlpGrads::zeros_like(p);
  // score = w3 a2 + b3
  g.w3 = upstream * acts.a2.transpose();
  g.b3 = Vec::Constant(1, upstream);
  Vec da2 = upstream * p.w3.transpose().col(0);
  Vec dz2 = da2.array() * acts.z2.unaryExpr([](double v) { return gelu_grad(v); }).array();
  g.w2 = dz2 * acts.a1.transpose();
  g.b2 = dz2;
  Vec da1 = p.w2.transpose() * dz2;
  Vec dz1 = da1.array() * acts.z1.unaryExpr([](double v) { return gelu_grad(v); }).array();
  g.w1 = dz1 * acts.x.transpose();
  g.b1 = dz1;
  g.x = p.w1.transpose() * dz1;
  return g;
}

double finite_diff_check(const std::function<double(const MlpParams&)>& f, const MlpParams& at,
                         const MlpGrads& analytic, double eps) {
  MlpParams work = at;
  double max_err = 0.0;
  auto probe = [&](double& slot, double ga) {
    const double saved = slot;
    slot = saved + eps;
    const double fp = f(work);
    slot = saved - eps;
    const double fm = f(work);
    slot = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw std::runtime_error("finite_diff_check: non-finite function value");
    }
    const double gfd = (fp - fm) / (2.0 * eps);
    const double err = std::abs(ga - gfd) / std::max(1.0, std::abs(gfd));
    if (err > max_err) max_err = err;
  };
  zip_mlp_tensors(work, const_cast<MlpGrads&>(analytic), [&](auto& pt, auto& gt) {
    for (Eigen::Index i = 0; i < pt.size(); ++i) {
      probe(pt.data()[i], gt.data()[i]);
    }
  });
  return max_err;
}

}  // namespace dynts
