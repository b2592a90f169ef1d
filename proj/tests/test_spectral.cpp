#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "affine/errors.hpp"
#include "affine/spectral.hpp"
#include "support.hpp"

using namespace affine;

namespace {

// Gauss-Legendre 20-point nodes on [-1, 1] by Newton iteration on P_20.
void gl20(std::vector<double>& x, std::vector<double>& w) {
  const int n = 20;
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5)), dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

Eigen::MatrixXd gramian_quad(const Eigen::MatrixXd& beta, const Eigen::MatrixXd& a, double t0) {
  std::vector<double> x, w;
  gl20(x, w);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(a.rows(), a.cols());
  const int panels = 8;
  for (int p = 0; p < panels; ++p) {
    const double lo = t0 * p / panels, hi = t0 * (p + 1) / panels;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x[k];
      const Eigen::MatrixXd e = (beta * s).exp();
      g += 0.5 * (hi - lo) * w[k] * e * a * e.transpose();
    }
  }
  return g;
}

AffineModel ou2() {
  AffineModel m;
  m.m = 0;
  m.n = 2;
  m.a = Mat::Zero(2, 2);
  m.a(1, 1) = 1.0;
  m.b = Vec::Zero(2);
  m.beta = Mat(2, 2);
  m.beta << -0.5, 1.0, -1.0, -0.5;
  return m;
}

}  // namespace

TEST_CASE("OU characteristic function at t = 1") {
  Vec x = Vec::Zero(1), u = Vec::Constant(1, 2.0);
  const Complex v = charfn(testing::ou(), 1.0, x, u);
  CHECK(v.real() == doctest::Approx(std::exp(-2.0 * testing::ou_var(1.0))).epsilon(1e-10));
  CHECK(v.real() == doctest::Approx(0.421194).epsilon(1e-5));
  CHECK(std::abs(v.imag()) < 1e-14);
}

TEST_CASE("characteristic function is one at u = 0") {
  const auto m = testing::mixed();
  Vec x(2);
  x << 0.7, -1.0;
  CHECK(std::abs(charfn(m, 2.0, x, Vec::Zero(2)) - 1.0) < 1e-14);
}

TEST_CASE("property: |charfn| <= 1 and charfn(-u) = conj charfn(u)") {
  const auto m = testing::mixed();
  const RiccatiFlow flow(m);
  Vec x(2);
  x << 1.0, 0.5;
  for (const auto& u : frequency_samples(2, 30, 0.1, 100.0, 5)) {
    const Complex a = charfn(flow, 0.7, x, u), b = charfn(flow, 0.7, x, -u);
    CHECK(std::abs(a) <= 1.0 + 1e-12);
    CHECK(std::abs(a - std::conj(b)) < 1e-10);
  }
}

TEST_CASE("Kalman rank") {
  const auto k = kalman_rank(ou2());
  CHECK(k.rank == 2);
  CHECK(k.full);
  CHECK(k.matrix.rows() == 2);
  CHECK(k.matrix.cols() == 4);
  auto m = ou2();
  m.beta << -0.5, 0.0, 0.0, -0.5;
  CHECK(kalman_rank(m).rank == 1);
  CHECK_FALSE(kalman_rank(m).full);
}

TEST_CASE("Gramian matches quadrature of the defining integral") {
  const auto m = ou2();
  const auto g = gramian_delta(m, 1.3);
  const Eigen::MatrixXd ref = gramian_quad(Eigen::MatrixXd(m.beta), Eigen::MatrixXd(m.a), 1.3);
  CHECK((Eigen::MatrixXd(g.gramian) - ref).norm() < 1e-12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ref);
  CHECK(g.delta_t0 == doctest::Approx(es.eigenvalues()(0)).epsilon(1e-10));
  CHECK(g.delta_t0 > 0.0);
}

TEST_CASE("Gramian of a degenerate pair has zero delta") {
  auto m = ou2();
  m.beta << -0.5, 0.0, 0.0, -0.5;
  CHECK(gramian_delta(m, 1.0).delta_t0 == 0.0);
}

TEST_CASE("scalar OU Gramian") {
  const double t0 = 0.8;
  const auto g = gramian_delta(testing::ou(), t0);
  CHECK(g.delta_t0 == doctest::Approx(0.5 * (1.0 - std::exp(-2.0 * t0)) / 2.0).epsilon(1e-12));
}

TEST_CASE("tail parameters of CIR and the mixed model") {
  const auto c = tail_params(testing::cir(), 1.0);
  CHECK(c.lambda == doctest::Approx(2.0).epsilon(1e-14));
  REQUIRE(c.p_max.has_value());
  CHECK(*c.p_max == 0);
  CHECK(*tail_params(testing::cir(4.0), 1.0).p_max == 2);
  CHECK_FALSE(tail_params(testing::cir(1.0), 1.0).p_max.has_value());

  const auto p = tail_params(testing::mixed(), 1.0);
  const double ahat = 1.0 + 0.4 * (0.2 * 0.2 + 0.3 * 0.3);
  CHECK(std::abs(p.alpha_hat(0) - ahat) < 1e-14);
  CHECK(std::abs(p.lambda - 2.0 / ahat) < 1e-12);
  CHECK(std::abs(p.beta_hat(0) - (-1.0)) < 1e-14);
  // with theta below the atom size the atom moves from alpha_hat to beta_hat
  const auto q = tail_params(testing::mixed(), 0.25);
  CHECK(std::abs(q.alpha_hat(0) - 1.0) < 1e-14);
  CHECK(std::abs(q.beta_hat(0) - (-1.0 - 2.0 * 0.4 * 0.2)) < 1e-14);
  CHECK(std::abs(q.lambda - 2.0) < 1e-12);
}

TEST_CASE("regularity order without an I block is unbounded") {
  CHECK(*max_regularity_order(testing::ou()) == kUnboundedOrder);
}

TEST_CASE("cone epsilon") {
  const auto g = gramian_delta(testing::ou(), 1.0);
  const auto c = cone_epsilon(testing::ou(), 1.0);
  CHECK(c.epsilon == doctest::Approx(g.delta_t0).epsilon(1e-12));
  CHECK_FALSE(c.degenerate);
  const auto mc = cone_epsilon(testing::mixed(), 1.0);
  CHECK(mc.epsilon > 0.0);
  CHECK(mc.argmin.norm() == doctest::Approx(1.0));
  // a direct check along the sampled minimizer
  const auto gm = gramian_delta(testing::mixed(), 1.0);
  const Vec u = mc.argmin;
  const double vj = u(1) * u(1) * gm.gramian(0, 0);
  const double vi = u.dot(testing::mixed().alpha[0] * u);
  CHECK(std::max(vj, vi) == doctest::Approx(mc.epsilon).epsilon(1e-6));
}

TEST_CASE("frequency samples are deterministic and in range") {
  const auto a = frequency_samples(3, 100, 1.0, 1e4, 9);
  const auto b = frequency_samples(3, 100, 1.0, 1e4, 9);
  REQUIRE(a.size() == 100);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k] == b[k]);
    CHECK(a[k].norm() >= 1.0 - 1e-12);
    CHECK(a[k].norm() <= 1e4 * (1.0 + 1e-12));
  }
}

TEST_CASE("tail certificate for CIR") {
  const std::vector<double> ts{1.0, 2.0, 4.0};
  const auto us = frequency_samples(1, 500, 1.0, 1e4, 1);
  const auto cert = tail_bound_check(testing::cir(), 1.0, 1.0, ts, us);
  CHECK(cert.verified);
  CHECK(std::abs(cert.lambda - 2.0) < 1e-12);
  CHECK(cert.min_margin >= 0.0);
  // e^{Re phi(t, iu)} = (1 + c^2 u^2)^{-1} for x = 0: the fitted C must dominate the exact ratio
  for (double t : ts) {
    const double c = 1.0 - std::exp(-t);
    for (double u : {1.0, 10.0, 1e3}) {
      CHECK(1.0 / (1.0 + c * c * u * u) <= cert.fitted_C * std::pow(1.0 + u, -2.0) * (1 + 1e-9));
    }
  }
}

TEST_CASE("tail certificate of a non-smoothing model has no Gaussian rate") {
  AffineModel m = testing::ou();
  m.a(0, 0) = 0.0;
  const std::vector<double> ts{1.0};
  const auto us = frequency_samples(1, 200, 1.0, 1e4, 1);
  CHECK_FALSE(kalman_rank(m).full);
  CHECK(gramian_delta(m, 1.0).delta_t0 == 0.0);
  CHECK_THROWS_AS(tail_bound_check(m, 1.0, 1.0, ts, us), Error);
}

TEST_CASE("envelope excess is the log of the bound violation") {
  TailBoundCert c;
  c.m = 1;
  c.n = 1;
  c.lambda = 2.0;
  c.delta = 0.5;
  Vec u(2);
  u << 3.0, 2.0;
  CHECK(envelope_excess(c, 1, u, -1.0) == doctest::Approx(-1.0 + 2.0 * std::log(4.0) + 0.5 * 4.0));
}

TEST_CASE("certificate json") {
  const std::vector<double> ts{1.0};
  const auto us = frequency_samples(1, 50, 1.0, 100.0, 1);
  const auto j = to_json(tail_bound_check(testing::ou(), 1.0, 1.0, ts, us));
  CHECK(j["p_max"] == "unbounded");
  CHECK(j.contains("fitted_C"));
}

TEST_CASE("property: delta_t0 is nondecreasing in t0") {
  const auto m = ou2();
  double prev = 0.0;
  for (double t0 : {0.1, 0.2, 0.5, 1.0, 2.0, 5.0}) {
    const double d = gramian_delta(m, t0).delta_t0;
    CHECK(d >= prev - 1e-14);
    prev = d;
  }
}

TEST_CASE("property: Kalman rank full iff delta_t0 > 0 on random small instances") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> N;
  std::uniform_int_distribution<int> dim(1, 4);
  int full = 0, deficient = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int n = dim(rng);
    AffineModel m;
    m.m = 0;
    m.n = n;
    Mat g = Mat::Zero(n, n);
    // low-rank diffusion on some trials
    const int rank = 1 + trial % n;
    Mat f(n, rank);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < rank; ++j) f(i, j) = N(rng);
    }
    g = f * f.transpose();
    m.a = g;
    m.b = Vec::Zero(n);
    m.beta = Mat(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) m.beta(i, j) = N(rng);
    }
    if (trial % 3 == 0) m.beta = Mat::Identity(n, n) * -0.7;  // commuting case: rank of a decides
    const bool kfull = kalman_rank(m).full;
    const bool pos = gramian_delta(m, 1.0).delta_t0 > 0.0;
    CHECK(kfull == pos);
    (kfull ? full : deficient) += 1;
  }
  CHECK(full > 0);
  CHECK(deficient > 0);
}

TEST_CASE("property: lambda(theta) is nonincreasing in theta") {
  AffineModel m = testing::mixed();
  Vec p(2);
  p << 0.6, 0.1;
  m.mu[0] = JumpMeasure({{0.4, m.mu[0].atoms()[0].point}, {0.3, p}});
  double prev = 1e300;
  for (double th : {1.0 / 64, 1.0 / 8, 0.25, 0.5, 1.0}) {
    const double l = tail_params(m, th).lambda;
    CHECK(l <= prev + 1e-15);
    prev = l;
  }
}
