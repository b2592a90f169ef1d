#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "affine/errors.hpp"
#include "affine/model.hpp"
#include "affine/model_io.hpp"
#include "support.hpp"

using namespace affine;

namespace {

bool has_condition(const ValidationReport& r, const std::string& c) {
  for (const auto& v : r.violations) {
    if (v.condition == c) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("test models are admissible") {
  for (const auto& m : {testing::cir(), testing::ou(), testing::mixed(), testing::cir(4.0)}) {
    const auto r = validate(m);
    CHECK(r.ok);
    CHECK(r.violations.empty());
  }
  for (const char* name : {"cir", "cir4", "ou", "mixed"}) CHECK(validate(testing::load(name)).ok);
}

TEST_CASE("model files match the in-code test models") {
  const auto a = model_to_json(testing::load("mixed"));
  const auto b = model_to_json(testing::mixed());
  CHECK(a == b);
}

TEST_CASE("beta_IJ nonzero is rejected") {
  auto m = testing::mixed();
  m.beta(0, 1) = 0.4;
  const auto r = validate(m);
  CHECK_FALSE(r.ok);
  CHECK(has_condition(r, "vi"));
  CHECK_THROWS_AS(require_admissible(m), Error);
  CHECK_FALSE(validate(testing::load("bad_beta_ij")).ok);
}

TEST_CASE("negative off-diagonal beta tilde is rejected") {
  const auto m = testing::load("bad_beta_tilde");
  const auto r = validate(m);
  CHECK_FALSE(r.ok);
  CHECK(has_condition(r, "vi"));
}

TEST_CASE("every violation is listed") {
  auto m = testing::mixed();
  m.beta(0, 1) = 0.4;
  m.a(1, 1) = -1.0;
  m.b(0) = -1.0;
  const auto r = validate(m);
  CHECK(r.violations.size() >= 3);
}

TEST_CASE("diffusion in an I direction is rejected") {
  auto m = testing::mixed();
  m.a(0, 0) = 0.1;
  CHECK_FALSE(validate(m).ok);
  auto c = testing::mixed();
  c.alpha[0](0, 0) = -0.5;
  CHECK_FALSE(validate(c).ok);
}

TEST_CASE("jumps leaving D are rejected") {
  auto m = testing::mixed();
  Vec p(2);
  p << -0.2, 0.1;
  m.nu = JumpMeasure({{0.5, p}});
  CHECK_FALSE(validate(m).ok);
  auto c = testing::cir();
  c.mu[0] = JumpMeasure({{0.5, Vec::Constant(1, -0.1)}});
  CHECK_FALSE(validate(c).ok);
}

TEST_CASE("structural errors throw") {
  auto m = testing::mixed();
  m.b = Vec::Zero(3);
  CHECK_THROWS_AS(check_structure(m), Error);
  try {
    check_structure(m);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Structural);
  }
}

TEST_CASE("json schema errors name the field") {
  auto j = model_to_json(testing::cir());
  j["alpha"] = {{{1.0, 0.0}, {0.0, 1.0}}};
  try {
    model_from_json(j);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Usage);
    CHECK(std::string(e.what()).find("alpha") != std::string::npos);
  }
  auto k = model_to_json(testing::cir());
  k["gamma"] = 1;
  CHECK_THROWS_AS(model_from_json(k), Error);
  auto l = model_to_json(testing::cir());
  l.erase("b");
  CHECK_THROWS_AS(model_from_json(l), Error);
}

TEST_CASE("json roundtrip") {
  const auto m = testing::mixed();
  const auto back = model_from_json(model_to_json(m));
  CHECK(back.m == m.m);
  CHECK(back.n == m.n);
  CHECK((back.beta - m.beta).norm() == 0.0);
  CHECK((back.alpha[0] - m.alpha[0]).norm() == 0.0);
  REQUIRE(back.nu.atoms().size() == 1);
  CHECK(back.nu.atoms()[0].mass == 0.5);
}

TEST_CASE("expm1_minus_z agrees with its series near zero and the direct form far away") {
  for (double r : {1e-9, 1e-5, 1e-2, 0.1, 0.3, 0.6}) {
    const Complex z(r, -0.7 * r);
    Complex series = 0.0, term = 1.0;
    for (int k = 2; k < 30; ++k) {
      term = std::pow(z, k) / std::tgamma(k + 1.0);
      series += term;
    }
    CHECK(std::abs(expm1_minus_z(z) - series) <= 2e-15 * std::abs(series));
  }
  const Complex z(1.5, 2.0);
  CHECK(std::abs(expm1_minus_z(z) - (std::exp(z) - 1.0 - z)) < 1e-13);
  CHECK(std::abs(affine::expm1(Complex(1e-10, 0.0)) - std::expm1(1e-10)) < 1e-25);
  CHECK(std::abs(affine::expm1(Complex(0.0, 1e-9)) - Complex(-5e-19, 1e-9)) < 1e-25);
}

TEST_CASE("Levy terms equal the atomic sums") {
  const auto m = testing::mixed();
  CVec u(2);
  u << Complex(-0.3, 1.2), Complex(0.0, -0.8);
  const auto& a = m.nu.atoms()[0];
  const Complex dot = u(0) * a.point(0) + u(1) * a.point(1);
  const Complex f = a.mass * (std::exp(dot) - 1.0 - u(1) * a.point(1));
  CHECK(std::abs(levy_F_term(m.nu, u, 1) - f) < 1e-14);
  const auto& b = m.mu[0].atoms()[0];
  const Complex dot2 = u(0) * b.point(0) + u(1) * b.point(1);
  CHECK(std::abs(levy_R_term(m.mu[0], u) - b.mass * (std::exp(dot2) - 1.0 - dot2)) < 1e-14);
}

TEST_CASE("large nu atoms are not compensated") {
  Vec p(1);
  p << 2.0;
  const JumpMeasure nu({{0.3, p}});
  CVec u(1);
  u << Complex(0.0, 0.5);
  CHECK(std::abs(levy_F_term(nu, u, 0) - 0.3 * (std::exp(u(0) * 2.0) - 1.0)) < 1e-15);
}

TEST_CASE("measure moments") {
  Vec p1(2), p2(2);
  p1 << 0.5, 0.0;
  p2 << 3.0, 4.0;
  const JumpMeasure nu({{1.0, p1}, {2.0, p2}});
  CHECK(nu.total_mass() == doctest::Approx(3.0));
  CHECK(nu.first_moment(2)(0) == doctest::Approx(6.5));
  CHECK(nu.truncated_moment(2, 1.0)(0) == doctest::Approx(0.5));
  CHECK(nu.merged(nu).atoms().size() == 4);
}

TEST_CASE("property: random admissible CBI parameters validate") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    AffineModel m;
    m.m = 2;
    m.n = 1;
    m.a = Mat::Zero(3, 3);
    m.a(2, 2) = U(rng);
    m.alpha.clear();
    for (int i = 0; i < 2; ++i) {
      Mat al = Mat::Zero(3, 3);
      const int j = 2;
      al(i, i) = 0.5 + U(rng);
      al(j, j) = 0.5 + U(rng);
      al(i, j) = al(j, i) = 0.3 * (U(rng) - 0.5);
      m.alpha.push_back(al);
    }
    m.b = Vec(3);
    m.b << U(rng), U(rng), U(rng) - 0.5;
    m.beta = Mat::Zero(3, 3);
    m.beta(0, 0) = -U(rng);
    m.beta(1, 1) = -U(rng);
    m.beta(0, 1) = U(rng);
    m.beta(1, 0) = U(rng);
    m.beta(2, 0) = U(rng) - 0.5;
    m.beta(2, 2) = -U(rng);
    m.mu.assign(2, JumpMeasure());
    CHECK(validate(m).ok);
    m.beta(0, 1) = -0.1;
    CHECK_FALSE(validate(m).ok);
  }
}

TEST_CASE("property: Levy terms are additive over merged atom lists") {
  const auto m = testing::mixed();
  Vec p(2);
  p << 1.5, -2.0;
  const JumpMeasure extra({{0.2, p}});
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    CVec u(2);
    u << Complex(-std::abs(U(rng)), 3 * U(rng)), Complex(0.0, 3 * U(rng));
    const JumpMeasure both = m.nu.merged(extra);
    CHECK(std::abs(levy_F_term(both, u, 1) - levy_F_term(m.nu, u, 1) - levy_F_term(extra, u, 1)) < 1e-14);
    CHECK(std::abs(levy_R_term(m.mu[0].merged(extra), u) - levy_R_term(m.mu[0], u) - levy_R_term(extra, u)) < 1e-14);
  }
}

TEST_CASE("property: R jump term is real and nonnegative for real u_I <= 0, u_J = 0") {
  Vec p1(2), p2(2);
  p1 << 0.7, 0.0;
  p2 << 2.0, 0.0;
  const JumpMeasure mu({{0.3, p1}, {1.1, p2}});
  for (double s : {0.0, -0.01, -0.5, -3.0, -40.0}) {
    CVec u(2);
    u << Complex(s, 0.0), Complex(0.0, 0.0);
    const Complex r = levy_R_term(mu, u);
    CHECK(r.imag() == 0.0);
    CHECK(r.real() >= 0.0);
  }
}
