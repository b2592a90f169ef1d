#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "affine/errors.hpp"
#include "affine/montecarlo.hpp"
#include "affine/spectral.hpp"
#include "support.hpp"

using namespace affine;

TEST_CASE("Philox4x32-10 known answers") {
  using B = Philox4x32::Block;
  CHECK(Philox4x32::bijection(B{0, 0, 0, 0}, {0, 0}) == B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  const std::uint32_t f = 0xffffffffu;
  CHECK(Philox4x32::bijection(B{f, f, f, f}, {f, f}) == B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::bijection(B{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("Philox streams are distinct and reproducible") {
  Philox4x32 a(42, 0), b(42, 0), c(42, 1);
  for (int k = 0; k < 10; ++k) {
    const auto x = a(), y = b(), z = c();
    CHECK(x == y);
    CHECK(x != z);
  }
}

TEST_CASE("Philox output is roughly uniform") {
  Philox4x32 g(1, 2);
  double s = 0.0;
  const int N = 200000;
  for (int k = 0; k < N; ++k) s += g() / 4294967296.0;
  CHECK(std::abs(s / N - 0.5) < 4.0 / std::sqrt(12.0 * N));
}

TEST_CASE("simulation is deterministic in the seed and independent of threads") {
  SimConfig c;
  c.x0 = Vec::Zero(2);
  c.x0(0) = 1.0;
  c.t_end = 0.5;
  c.dt = 1e-2;
  c.n_paths = 500;
  c.seed = 9;
  c.threads = 1;
  const auto a = simulate_paths(testing::mixed(), c);
  c.threads = 3;
  const auto b = simulate_paths(testing::mixed(), c);
  REQUIRE(a.terminal.size() == b.terminal.size());
  for (std::size_t k = 0; k < a.terminal.size(); ++k) CHECK(a.terminal[k] == b.terminal[k]);
  c.seed = 10;
  const auto d = simulate_paths(testing::mixed(), c);
  CHECK(d.terminal[0] != a.terminal[0]);
}

TEST_CASE("OU ensemble moments match the Gaussian law") {
  SimConfig c;
  c.x0 = Vec::Constant(1, 1.0);
  c.t_end = 1.0;
  c.dt = 1e-3;
  c.n_paths = 20000;
  c.seed = 1;
  const auto e = simulate_paths(testing::ou(), c);
  const Vec mean = ensemble_mean(e);
  const double sd = std::sqrt(testing::ou_var(1.0));
  CHECK(std::abs(mean(0) - testing::ou_mean(1.0, 1.0)) < 4 * sd / std::sqrt(20000.0) + 1e-3);
  const auto j = summary_json(e);
  const double var = j["covariance"][0][0];
  CHECK(std::abs(var - sd * sd) < 0.03 * sd * sd);
}

TEST_CASE("jumps are counted and compensated") {
  const auto m = testing::mixed();
  SimConfig c;
  c.x0 = Vec::Zero(2);
  c.x0(0) = 1.0;
  c.t_end = 1.0;
  c.dt = 1e-3;
  c.n_paths = 20000;
  c.seed = 4;
  const auto e = simulate_paths(m, c);
  double nu = 0.0;
  for (auto k : e.nu_jumps) nu += k;
  CHECK(nu / c.n_paths == doctest::Approx(0.5).epsilon(0.05));
  // the first moment solves m' = b + int xi_I nu + beta m in the I coordinate (not compensated there)
  const double beff = m.b(0) + 0.5 * 0.3;
  const double ref = std::exp(-1.0) * 1.0 + beff * (1.0 - std::exp(-1.0));
  CHECK(std::abs(ensemble_mean(e)(0) - ref) < 0.03);
}

TEST_CASE("empirical characteristic function against the Riccati solution") {
  SimConfig c;
  c.x0 = Vec::Constant(1, 1.0);
  c.t_end = 1.0;
  c.dt = 1e-3;
  c.n_paths = 20000;
  c.seed = 2;
  const auto e = simulate_paths(testing::cir(), c);
  for (double u : {0.3, 1.0, 2.5}) {
    const auto emp = empirical_charfn(e, Vec::Constant(1, u));
    const Complex ref = charfn(testing::cir(), 1.0, c.x0, Vec::Constant(1, u));
    CHECK(std::abs(emp.value - ref) < 4.0 / std::sqrt(20000.0) + 5e-3);
    CHECK(emp.std_error > 0.0);
  }
}

TEST_CASE("KS against the inverted density and coverage error") {
  SimConfig c;
  c.x0 = Vec::Constant(1, 0.0);
  c.t_end = 1.0;
  c.dt = 1e-2;
  c.n_paths = 5000;
  c.seed = 5;
  const auto e = simulate_paths(testing::ou(), c);
  InversionSettings s;
  s.eps_trunc = 1e-9;
  const auto f = invert_density(testing::ou(), 1.0, c.x0, {0}, {0}, parse_grid("-5:5:1024"), s);
  const auto cmp = compare_density(e, f, 0);
  CHECK(cmp.ks < 0.03);
  CHECK(cmp.coverage == 1.0);
  const auto g = invert_density(testing::ou(), 1.0, c.x0, {0}, {0}, parse_grid("-0.3:0.3:64"),
                                [] {
                                  InversionSettings q;
                                  q.enforce_contracts = false;
                                  q.eps_trunc = 1e-9;
                                  return q;
                                }());
  CHECK_THROWS_AS(compare_density(e, g, 0), Error);
}

TEST_CASE("clamping of I coordinates is reported") {
  SimConfig c;
  c.x0 = Vec::Constant(1, 0.0);
  c.t_end = 0.2;
  c.dt = 0.05;
  c.n_paths = 2000;
  const auto e = simulate_paths(testing::cir(0.05), c);
  for (const auto& x : e.terminal) CHECK(x(0) >= 0.0);
  CHECK(e.clamped_steps > 0);
}

TEST_CASE("bad configuration is a usage error") {
  SimConfig c;
  c.x0 = Vec::Constant(1, 0.0);
  c.dt = -1.0;
  CHECK_THROWS_AS(simulate_paths(testing::ou(), c), Error);
  c.dt = 1e-2;
  c.x0 = Vec::Zero(3);
  CHECK_THROWS_AS(simulate_paths(testing::ou(), c), Error);
}

TEST_CASE("first moments of OU and CIR") {
  SimConfig c;
  c.x0 = Vec::Constant(1, 1.0);
  c.t_end = 1.0;
  c.dt = 1e-3;
  c.n_paths = 100000;
  c.seed = 3;
  const auto ou = simulate_paths(testing::ou(), c);
  const double se_ou = std::sqrt(testing::ou_var(1.0) / c.n_paths);
  CHECK(std::abs(ensemble_mean(ou)(0) - 0.367879) < 3 * se_ou + 1e-3);
  const auto cir = simulate_paths(testing::cir(), c);
  const auto j = summary_json(cir);
  const double se_cir = std::sqrt(j["covariance"][0][0].get<double>() / c.n_paths);
  CHECK(std::abs(ensemble_mean(cir)(0) - 1.632121) < 3 * se_cir + 2e-3);
}

TEST_CASE("halving dt at least halves the OU mean bias") {
  // small diffusion keeps the Monte Carlo error far below the Euler bias
  const AffineModel m = testing::ou(1e-6);
  auto bias = [&](double dt) {
    SimConfig c;
    c.x0 = Vec::Constant(1, 1.0);
    c.t_end = 1.0;
    c.dt = dt;
    c.n_paths = 2000;
    c.seed = 8;
    return std::abs(ensemble_mean(simulate_paths(m, c))(0) - std::exp(-1.0));
  };
  const double b1 = bias(0.1), b2 = bias(0.05);
  CHECK(b2 <= 0.5 * b1 * 1.05);
}
