#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dynts/numkernel.hpp"

using namespace dynts;

namespace {

// Straight-line re-evaluation of the MLP, kept independent of mlp_forward.
double mlp_oracle(const MlpParams& p, const Vec& x) {
  Vec h1(p.w1.rows());
  for (int i = 0; i < p.w1.rows(); ++i) {
    double s = p.b1[i];
    for (int j = 0; j < p.w1.cols(); ++j) s += p.w1(i, j) * x[j];
    h1[i] = 0.5 * s * (1.0 + std::erf(s / std::sqrt(2.0)));
  }
  Vec h2(p.w2.rows());
  for (int i = 0; i < p.w2.rows(); ++i) {
    double s = p.b2[i];
    for (int j = 0; j < p.w2.cols(); ++j) s += p.w2(i, j) * h1[j];
    h2[i] = 0.5 * s * (1.0 + std::erf(s / std::sqrt(2.0)));
  }
  double out = p.b3[0];
  for (int j = 0; j < p.w3.cols(); ++j) out += p.w3(0, j) * h2[j];
  return out;
}

}  // namespace

TEST_CASE("softmax_rows examples") {
  Mat m(1, 3);
  m << 0, 0, 0;
  Mat s = softmax_rows(m);
  CHECK(s(0, 0) == doctest::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(s(0, 1) == doctest::Approx(1.0 / 3).epsilon(1e-14));

  Mat one(1, 1);
  one << 5.0;
  CHECK(softmax_rows(one)(0, 0) == doctest::Approx(1.0).epsilon(1e-15));

  Mat ln(1, 2);
  ln << 0.0, std::log(2.0);
  Mat r = softmax_rows(ln);
  CHECK(r(0, 0) == doctest::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(r(0, 1) == doctest::Approx(2.0 / 3).epsilon(1e-14));
}

TEST_CASE("softmax_rows rejects non-finite input") {
  Mat m(1, 2);
  m << 1.0, std::nan("");
  CHECK_THROWS_AS(softmax_rows(m), std::invalid_argument);
  m << 1.0, INFINITY;
  CHECK_THROWS_AS(softmax_rows(m), std::invalid_argument);
}

TEST_CASE("softmax_rows rows sum to one over random inputs") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  const int rows = 10000, cols = 8;
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
  Mat s = softmax_rows(m);
  for (int i = 0; i < rows; ++i) {
    CHECK(std::abs(s.row(i).sum() - 1.0) <= 1e-12);
    CHECK(s.row(i).minCoeff() >= 0.0);
  }
  CHECK(s.allFinite());
}

TEST_CASE("rotary_apply examples") {
  Vec v(4);
  v << 1, 2, 3, 4;
  CHECK((rotary_apply(v, 0) - v).norm() == doctest::Approx(0.0));

  // For a 2-vector, theta_0 = base^0 = 1, so [1,0] at p is [cos p, sin p].
  Vec e(2);
  e << 1, 0;
  for (int p : {1, 3, 11}) {
    Vec r = rotary_apply(e, p);
    CHECK(r[0] == doctest::Approx(std::cos(p)).epsilon(1e-15));
    CHECK(r[1] == doctest::Approx(std::sin(p)).epsilon(1e-15));
  }

  Vec r7 = rotary_apply(v, 7);
  CHECK(r7.norm() == doctest::Approx(v.norm()).epsilon(1e-14));

  Vec odd(3);
  odd << 1, 2, 3;
  CHECK_THROWS_AS(rotary_apply(odd, 1), std::invalid_argument);
  CHECK_THROWS_AS(rotary_apply(v, -1), std::invalid_argument);
}

TEST_CASE("rotary_apply preserves pairwise norms and is injective in position") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0, 1);
  Vec v(8);
  for (int i = 0; i < 8; ++i) v[i] = g(rng);
  for (int p = 0; p < 50; ++p) {
    Vec r = rotary_apply(v, p);
    for (int j = 0; j < 4; ++j) {
      const double n0 = std::hypot(v[2 * j], v[2 * j + 1]);
      const double n1 = std::hypot(r[2 * j], r[2 * j + 1]);
      CHECK(std::abs(n0 - n1) <= 1e-12);
    }
  }
  // distinct positions below the fastest period give distinct images
  Vec e(2);
  e << 1, 0;
  for (int p = 0; p < 6; ++p) {
    for (int q = p + 1; q < 6; ++q) {
      CHECK((rotary_apply(e, p) - rotary_apply(e, q)).norm() > 1e-6);
    }
  }
}

TEST_CASE("mlp_forward examples") {
  auto zero = MlpParams::zeros(4, 8, 2, 1);
  Vec x = Vec::Constant(4, 1.7);
  CHECK(mlp_forward(zero, x).first == 0.0);

  // 1-wide chain with unit weights: GELU(GELU(2))
  auto unit = MlpParams::zeros(1, 1, 1, 1);
  unit.w1(0, 0) = unit.w2(0, 0) = unit.w3(0, 0) = 1.0;
  Vec two = Vec::Constant(1, 2.0);
  const double g2 = 0.5 * 2.0 * (1.0 + std::erf(2.0 / std::sqrt(2.0)));
  const double gg2 = 0.5 * g2 * (1.0 + std::erf(g2 / std::sqrt(2.0)));
  CHECK(mlp_forward(unit, two).first == doctest::Approx(gg2).epsilon(1e-15));

  Vec bad = Vec::Zero(3);
  CHECK_THROWS_AS(mlp_forward(unit, bad), std::invalid_argument);
}

TEST_CASE("mlp_forward matches an independent straight-line evaluation") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 2 * (1 + static_cast<int>(rng() % 8));
    auto p = MlpParams::seeded(d, rng());
    Vec x(d);
    for (int i = 0; i < d; ++i) x[i] = g(rng);
    auto [score, acts] = mlp_forward(p, x);
    CHECK(score == doctest::Approx(mlp_oracle(p, x)).epsilon(1e-12));
  }
}

TEST_CASE("mlp_backward trivial cases") {
  auto p = MlpParams::seeded(8, 5);
  Vec x = Vec::LinSpaced(8, -1.0, 1.0);
  auto [score, acts] = mlp_forward(p, x);
  auto g = mlp_backward(p, acts, 0.0);
  CHECK(g.w1.norm() == 0.0);
  CHECK(g.w3.norm() == 0.0);
  CHECK(g.x.norm() == 0.0);

  // the output layer is linear: d score / d w3 = a2, d score / d b3 = 1
  auto g1 = mlp_backward(p, acts, 1.0);
  CHECK((g1.w3.transpose() - acts.a2).norm() == doctest::Approx(0.0));
  CHECK(g1.b3[0] == 1.0);

  MlpActivations stale = acts;
  stale.a1 = Vec::Zero(3);
  CHECK_THROWS_AS(mlp_backward(p, stale, 1.0), std::invalid_argument);
}

TEST_CASE("finite_diff_check is exact for quadratics and flags corruption") {
  auto p = MlpParams::seeded(4, 9);
  auto f = [](const MlpParams& q) { return q.w1(0, 0) * q.w1(0, 0); };
  auto g = MlpGrads::zeros_like(p);
  g.w1(0, 0) = 2.0 * p.w1(0, 0);
  CHECK(finite_diff_check(f, p, g, 1e-3) < 1e-8);

  g.w2(1, 1) += 1.0;  // deliberately corrupted entry
  CHECK(finite_diff_check(f, p, g, 1e-3) > 0.1);
}

TEST_CASE("mlp gradients agree with finite differences over many seeds") {
  std::mt19937_64 rng(2026);
  std::normal_distribution<double> gauss(0, 1);
  double worst = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    const int d = 2 * (1 + static_cast<int>(rng() % 6));
    auto p = MlpParams::seeded(d, seed);
    Vec x(d);
    for (int i = 0; i < d; ++i) x[i] = gauss(rng);
    const double target = gauss(rng);
    // squared-error loss against a fixed target
    auto loss = [&](const MlpParams& q) {
      const double s = mlp_forward(q, x).first;
      return (s - target) * (s - target);
    };
    auto [score, acts] = mlp_forward(p, x);
    auto g = mlp_backward(p, acts, 2.0 * (score - target));
    worst = std::max(worst, finite_diff_check(loss, p, g, 1e-3));
  }
  CHECK(worst < 1e-4);
}
