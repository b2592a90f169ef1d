#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "affine/density.hpp"
#include "affine/errors.hpp"
#include "support.hpp"

using namespace affine;

namespace {

InversionSettings with_tol(double eps) {
  InversionSettings s;
  s.eps_trunc = eps;
  return s;
}

double sup_error(const DensityField& f, const std::function<double(const Vec&)>& ref, double lo = -1e300,
                 double hi = 1e300) {
  double e = 0.0;
  for (std::size_t k = 0; k < f.values.size(); ++k) {
    const Vec y = f.grid.point(k);
    if (y(0) < lo || y(0) > hi) continue;
    e = std::max(e, std::abs(f.values[k] - ref(y)));
  }
  return e;
}

void check_contracts(const DensityField& f) {
  REQUIRE(f.meta.mass.has_value());
  CHECK(std::abs(*f.meta.mass - 1.0) <= 1e-3);
  CHECK(f.meta.imag_residue <= 1e-6 * f.meta.max_abs);
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an affine::Error");
  return ErrorKind::Usage;
}

// Mean of X_t from d/dt E X = b_eff + beta E X, with b_eff = b + int xi nu - int_{|xi|<=1} xi_J nu.
Vec affine_mean(const AffineModel& m, double t, const Vec& x) {
  const int d = m.d();
  Vec beff = m.b;
  for (const auto& a : m.nu.atoms()) {
    for (int k = 0; k < m.m; ++k) beff(k) += a.mass * a.point(k);
    if (a.point.norm() > 1.0) {
      for (int k = m.m; k < d; ++k) beff(k) += a.mass * a.point(k);
    }
  }
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(d + 1, d + 1);
  aug.topLeftCorner(d, d) = Eigen::MatrixXd(m.beta);
  aug.topRightCorner(d, 1) = Eigen::VectorXd(beff);
  Eigen::VectorXd x1(d + 1);
  x1 << Eigen::VectorXd(x), 1.0;
  const Eigen::VectorXd out = (aug * t).exp() * x1;
  return out.head(d);
}

}  // namespace

TEST_CASE("OU density equals the Gaussian") {
  for (double x : {0.0, 1.5, -2.0}) {
    const auto f = invert_density(testing::ou(), 1.0, Vec::Constant(1, x), {0}, {0}, parse_grid("-6:6:4096"),
                                  with_tol(1e-9));
    const double mean = testing::ou_mean(1.0, x), var = testing::ou_var(1.0);
    CHECK(sup_error(f, [&](const Vec& y) { return testing::normal_pdf(y(0), mean, var); }) <= 1e-6);
    check_contracts(f);
    CHECK(f.warnings.empty());
  }
}

TEST_CASE("FFT and direct quadrature agree") {
  const GridSpec g = parse_grid("-4:4:65");
  auto s = with_tol(1e-9);
  const auto a = invert_density(testing::ou(), 0.5, Vec::Constant(1, 0.3), {0}, {0}, g, s);
  s.method = Method::DirectQuadrature;
  const auto b = invert_density(testing::ou(), 0.5, Vec::Constant(1, 0.3), {0}, {0}, g, s);
  for (std::size_t k = 0; k < a.values.size(); ++k) CHECK(std::abs(a.values[k] - b.values[k]) < 1e-7);
  CHECK(b.meta.method == "direct-quadrature");
}

TEST_CASE("OU derivatives in y and x match the Gaussian derivatives") {
  const double x = 0.8, t = 1.0, mean = testing::ou_mean(t, x), var = testing::ou_var(t);
  const GridSpec g = parse_grid("-5:5:2048");
  const auto dy = invert_density(testing::ou(), t, Vec::Constant(1, x), {0}, {1}, g, with_tol(1e-9));
  CHECK(sup_error(dy, [&](const Vec& y) { return -(y(0) - mean) / var * testing::normal_pdf(y(0), mean, var); }) < 1e-6);
  const auto dx = invert_density(testing::ou(), t, Vec::Constant(1, x), {1}, {0}, g, with_tol(1e-9));
  const double e = std::exp(-t);
  CHECK(sup_error(dx, [&](const Vec& y) { return e * (y(0) - mean) / var * testing::normal_pdf(y(0), mean, var); }) <
        1e-6);
  CHECK_FALSE(dx.meta.mass.has_value());
}

TEST_CASE("CIR density equals the noncentral chi-square") {
  const auto f = invert_density(testing::cir(), 2.0, Vec::Constant(1, 1.0), {0}, {0}, parse_grid("0:16:1024"),
                                with_tol(1e-4));
  CHECK(sup_error(f, [](const Vec& y) { return testing::cir_density(2.0, 1.0, y(0)); }) <= 2e-4);
  check_contracts(f);
}

TEST_CASE("CIR invariant density is Gamma(2, 1)") {
  // coarser than the acceptance run; the error budget scales with eps_trunc
  const auto f = invariant_density(testing::cir(), parse_grid("0:16:512"), {0}, with_tol(1e-3));
  CHECK(sup_error(f, [](const Vec& y) { return y(0) * std::exp(-y(0)); }) <= 2e-3);
  CHECK(std::isinf(f.meta.t));
}

TEST_CASE("invariant characteristic function of CIR and OU") {
  for (double u : {0.0, 0.5, 3.0, 50.0}) {
    const auto v = invariant_charfn(testing::cir(), Vec::Constant(1, u));
    CHECK(v.converged);
    CHECK(std::abs(v.value - std::pow(Complex(1.0, -u), -2.0)) < 1e-9);
    const auto w = invariant_charfn(testing::ou(), Vec::Constant(1, u));
    CHECK(std::abs(w.value - std::exp(-0.25 * u * u)) < 1e-10);
  }
}

TEST_CASE("property: batch requests equal single requests") {
  const GridSpec g = parse_grid("-5:5:256");
  std::vector<DensityRequest> reqs{{0.5, Vec::Constant(1, 1.0), {0}, {0}}, {1.5, Vec::Constant(1, -1.0), {0}, {0}}};
  const auto batch = invert_density_batch(testing::ou(), reqs, g, with_tol(1e-8));
  REQUIRE(batch.size() == 2);
  for (std::size_t r = 0; r < reqs.size(); ++r) {
    const double mean = testing::ou_mean(reqs[r].t, reqs[r].x(0)), var = testing::ou_var(reqs[r].t);
    CHECK(sup_error(batch[r], [&](const Vec& y) { return testing::normal_pdf(y(0), mean, var); }) < 1e-6);
  }
}

TEST_CASE("two-dimensional mixed model: contracts and first moments") {
  const auto m = testing::mixed(4.0);
  Vec x(2);
  x << 1.0, 0.5;
  const GridSpec g = parse_grid("0:14:128,-6:7:128");
  const auto f = invert_density(m, 1.0, x, {0, 0}, {0, 0}, g, with_tol(1e-4));
  check_contracts(f);
  Vec mean = Vec::Zero(2);
  std::vector<double> y0(f.values.size()), y1(f.values.size());
  for (std::size_t k = 0; k < f.values.size(); ++k) {
    const Vec y = g.point(k);
    y0[k] = y(0) * f.values[k];
    y1[k] = y(1) * f.values[k];
  }
  mean << trapezoid(g, y0), trapezoid(g, y1);
  const Vec ref = affine_mean(m, 1.0, x);
  CHECK(std::abs(mean(0) - ref(0)) < 1e-2);
  CHECK(std::abs(mean(1) - ref(1)) < 1e-2);
}

TEST_CASE("regularity guard") {
  const GridSpec g = parse_grid("0:10:64");
  CHECK(kind_of([&] { invert_density(testing::cir(), 1.0, Vec::Constant(1, 1.0), {1}, {0}, g); }) ==
        ErrorKind::Regularity);
  CHECK(kind_of([&] { invert_density(testing::cir(), 1.0, Vec::Constant(1, 1.0), {0}, {1}, g); }) ==
        ErrorKind::Regularity);
  CHECK(kind_of([&] { invert_density(testing::cir(4.0), 1.0, Vec::Constant(1, 0.0), {1}, {0}, g); }) ==
        ErrorKind::Regularity);
  CHECK(kind_of([&] { invert_density(testing::cir(0.5), 1.0, Vec::Constant(1, 1.0), {0}, {0}, g); }) ==
        ErrorKind::Regularity);
  CHECK(check_regularity(testing::cir(4.0), Vec::Constant(1, 1.0), {1}, {1}) == 2);
}

TEST_CASE("non-smoothing J block is rejected") {
  auto m = testing::ou();
  m.a(0, 0) = 0.0;
  CHECK(kind_of([&] { invert_density(m, 1.0, Vec::Zero(1), {0}, {0}, parse_grid("-1:1:16")); }) ==
        ErrorKind::Regularity);
}

TEST_CASE("grids must start inside D on I axes") {
  CHECK(kind_of([&] { invert_density(testing::cir(), 1.0, Vec::Constant(1, 1.0), {0}, {0}, parse_grid("-1:5:64")); }) ==
        ErrorKind::Usage);
}

TEST_CASE("mass contract fires on a grid that misses the mass") {
  // the FFT lattice periodizes, so the direct rule is the one that sees the missing mass
  auto s = with_tol(1e-8);
  s.method = Method::DirectQuadrature;
  CHECK(kind_of([&] { invert_density(testing::ou(), 1.0, Vec::Zero(1), {0}, {0}, parse_grid("1:4:256"), s); }) ==
        ErrorKind::MassContract);
  s.enforce_contracts = false;
  const auto f = invert_density(testing::ou(), 1.0, Vec::Zero(1), {0}, {0}, parse_grid("1:4:256"), s);
  CHECK_FALSE(f.warnings.empty());
}

TEST_CASE("unstable beta has no invariant density") {
  CHECK(kind_of([&] { invariant_density(testing::ou(0.5, 0.1), parse_grid("-3:3:32"), {0}); }) == ErrorKind::Stability);
}

TEST_CASE("truncation radius meets the requested tail") {
  TailBoundCert c;
  c.m = 1;
  c.n = 0;
  c.lambda = 3.0;
  c.fitted_C = 2.0;
  c.fitted_M = 1.0;
  c.verified = true;
  const auto t = choose_truncation(c, 1e-6);
  // (2 pi)^{-1} C 2 int_U^inf (1+u)^{-3} du = C (1+U)^{-2} / (2 pi)
  CHECK(t.tail_bound <= 1e-6 * (1 + 1e-9));
  CHECK(c.fitted_C * std::pow(1 + t.radius[0], -2.0) / (2 * M_PI) == doctest::Approx(t.tail_bound));
  CHECK(truncation_tail(c, {2 * t.radius[0]}) < t.tail_bound);
}

TEST_CASE("TV distance properties") {
  const GridSpec g = parse_grid("-6:6:1024");
  const auto s = with_tol(1e-9);
  const auto a = invert_density(testing::ou(), 1.0, Vec::Zero(1), {0}, {0}, g, s);
  const auto b = invert_density(testing::ou(), 1.0, Vec::Constant(1, 1.0), {0}, {0}, g, s);
  CHECK(tv_distance(a, a) == 0.0);
  CHECK(tv_distance(a, b) == doctest::Approx(tv_distance(b, a)));
  // equal variances: TV = 2 Phi(|dm| / (2 sd)) - 1
  const double dm = std::exp(-1.0), sd = std::sqrt(testing::ou_var(1.0));
  CHECK(tv_distance(a, b) == doctest::Approx(std::erf(dm / (2.0 * sd) / std::sqrt(2.0))).epsilon(1e-5));
  const auto other = invert_density(testing::ou(), 1.0, Vec::Zero(1), {0}, {0}, parse_grid("-6:6:512"), s);
  CHECK(kind_of([&] { tv_distance(a, other); }) == ErrorKind::GridMismatch);
}

TEST_CASE("density csv and metadata") {
  auto s = with_tol(1e-8);
  s.enforce_contracts = false;
  const auto f = invert_density(testing::ou(), 1.0, Vec::Zero(1), {0}, {0}, parse_grid("-1:1:3"), s);
  std::ostringstream os;
  write_csv(os, f);
  CHECK(os.str().rfind("y1,value\n", 0) == 0);
  const auto j = metadata_json(f);
  CHECK(j["grid"] == "-1:1:3");
  CHECK(j.contains("tail_bound"));
}

TEST_CASE("Chapman-Kolmogorov on the grid") {
  const double s = 0.4, t = 0.6, x = 0.7;
  const GridSpec g = parse_grid("-5:5:401");
  const auto settings = with_tol(1e-9);
  const auto direct = invert_density(testing::ou(), s + t, Vec::Constant(1, x), {0}, {0}, g, settings);
  const auto first = invert_density(testing::ou(), t, Vec::Constant(1, x), {0}, {0}, g, settings);
  std::vector<DensityRequest> reqs;
  for (std::size_t k = 0; k < g.size(); ++k) reqs.push_back({s, g.point(k), {0}, {0}});
  const auto second = invert_density_batch(testing::ou(), reqs, g, settings);
  std::vector<double> composed(g.size(), 0.0);
  for (std::size_t y = 0; y < g.size(); ++y) {
    std::vector<double> integrand(g.size());
    for (std::size_t z = 0; z < g.size(); ++z) integrand[z] = second[z].values[y] * first.values[z];
    composed[y] = trapezoid(g, integrand);
  }
  std::vector<double> diff(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) diff[k] = std::abs(composed[k] - direct.values[k]);
  CHECK(trapezoid(g, diff) <= 5e-3);
}

TEST_CASE("strong Feller surrogate: L1 distance shrinks with |x - x'|") {
  const GridSpec g = parse_grid("0:16:1024");
  const auto settings = with_tol(1e-5);
  std::vector<DensityRequest> reqs{{1.0, Vec::Constant(1, 1.0), {0}, {0}}};
  for (int k = 1; k <= 5; ++k) reqs.push_back({1.0, Vec::Constant(1, 1.0 + std::ldexp(0.5, -k)), {0}, {0}});
  const auto fs = invert_density_batch(testing::cir(4.0), reqs, g, settings);
  double prev = 1e300;
  for (std::size_t k = 1; k < fs.size(); ++k) {
    const double l1 = 2.0 * tv_distance(fs[0], fs[k]);
    CHECK(l1 < prev);
    if (k > 1) CHECK(prev / l1 >= 1.8);
    prev = l1;
  }
}
