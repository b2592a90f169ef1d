#include "affine/density.hpp"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <ostream>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "affine/errors.hpp"
#include "affine/lattice.hpp"

namespace affine {

namespace {

constexpr double kMassTol = 1e-3;
constexpr double kResidueTol = 1e-6;
constexpr double kRingingTol = 1e-8;

// int_U^inf (1+u)^k exp(-delta u^2) du
double gauss_poly_tail(double delta, int k, double U) {
  const double e = std::exp(-delta * U * U);
  std::vector<double> I(k + 1);
  I[0] = 0.5 * std::sqrt(M_PI / delta) * std::erfc(std::sqrt(delta) * U);
  if (k >= 1) I[1] = e / (2.0 * delta);
  for (int l = 2; l <= k; ++l) I[l] = std::pow(U, l - 1) * e / (2.0 * delta) + (l - 1) / (2.0 * delta) * I[l - 2];
  double total = 0.0, binom = 1.0;
  for (int l = 0; l <= k; ++l) {
    total += binom * I[l];
    binom = binom * (k - l) / (l + 1);
  }
  return total;
}

// int_U^inf (1+u)^{-s} du
double power_tail(double s, double U) { return std::pow(1.0 + U, 1.0 - s) / (s - 1.0); }

struct AxisTails {
  std::vector<double> full;
  double prefactor = 0.0;
  double s = 0.0;
  std::vector<int> jdeg;
};

AxisTails axis_tails(const TailBoundCert& cert, const EnvelopeOrders& orders) {
  const int m = cert.m, n = cert.n, d = m + n;
  AxisTails out;
  out.jdeg.assign(n, 0);
  for (int j = 0; j < n && j < static_cast<int>(orders.j_degree.size()); ++j) out.jdeg[j] = orders.j_degree[j];
  out.prefactor = std::pow(2.0 * M_PI, -d) * cert.fitted_C * orders.scale;
  if (m > 0) out.s = (cert.lambda - orders.i_order) / m;
  for (int k = 0; k < d; ++k) {
    out.full.push_back(k < m ? 2.0 * power_tail(out.s, 0.0) : 2.0 * gauss_poly_tail(cert.delta, out.jdeg[k - m], 0.0));
  }
  return out;
}

bool integrable(const TailBoundCert& cert, const EnvelopeOrders& orders) {
  if (cert.m > 0 && !(cert.lambda - orders.i_order > cert.m)) return false;
  if (cert.n > 0 && !(cert.delta > 0.0)) return false;
  return true;
}

double one_axis_tail(const TailBoundCert& cert, const AxisTails& t, int k, double U) {
  return k < cert.m ? 2.0 * power_tail(t.s, U) : 2.0 * gauss_poly_tail(cert.delta, t.jdeg[k - cert.m], U);
}

int sum_range(const MultiIndex& q, int lo, int hi) {
  int s = 0;
  for (int k = lo; k < hi; ++k) s += q[k];
  return s;
}

void check_index(const MultiIndex& q, int d, const char* name) {
  if (static_cast<int>(q.size()) != d) {
    throw Error(ErrorKind::Structural, "dimension d = m + n", std::string(name) + " multi-index has wrong length");
  }
  for (int v : q) {
    if (v < 0) throw Error(ErrorKind::Usage, "multi-index", std::string(name) + " has a negative entry");
  }
}

}  // namespace

EnvelopeOrders envelope_orders(const AffineModel& model, double t, const MultiIndex& q, const MultiIndex& qt) {
  const int m = model.m, n = model.n;
  EnvelopeOrders o;
  o.i_order = sum_range(q, 0, m) + sum_range(qt, 0, m);
  const int qj = sum_range(q, m, m + n);
  o.j_degree.assign(n, qj);
  for (int j = 0; j < n; ++j) o.j_degree[j] += qt[m + j];
  if (qj > 0 && std::isfinite(t)) {
    const Eigen::MatrixXd e = (Eigen::MatrixXd(model.beta.block(m, m, n, n).transpose()) * t).exp();
    const double norm = Eigen::JacobiSVD<Eigen::MatrixXd>(e).singularValues()(0);
    o.scale = std::pow(norm * std::sqrt(static_cast<double>(n)), qj);
  }
  return o;
}

namespace {

bool is_plain(const DensityMeta& meta) {
  return std::all_of(meta.q.begin(), meta.q.end(), [](int v) { return v == 0; }) &&
         std::all_of(meta.qt.begin(), meta.qt.end(), [](int v) { return v == 0; });
}

Complex derivative_factor(const CVec& psi, const Vec& u, const MultiIndex& q, const MultiIndex& qt) {
  Complex f = 1.0;
  for (int k = 0; k < u.size(); ++k) {
    for (int p = 0; p < q[k]; ++p) f *= psi(k);
    for (int p = 0; p < qt[k]; ++p) f *= Complex(0.0, -u(k));
  }
  return f;
}

}  // namespace

void finalize_field(DensityField& field, const std::vector<Complex>& raw, bool enforce) {
  field.values.resize(raw.size());
  double residue = 0.0, max_abs = 0.0, min_value = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < raw.size(); ++k) {
    field.values[k] = raw[k].real();
    residue = std::max(residue, std::abs(raw[k].imag()));
    max_abs = std::max(max_abs, std::abs(raw[k].real()));
    min_value = std::min(min_value, raw[k].real());
  }
  field.meta.imag_residue = residue;
  field.meta.max_abs = max_abs;
  field.meta.min_value = min_value;
  std::ostringstream os;
  if (residue > kResidueTol * max_abs) {
    os << "imaginary residue " << residue << " exceeds 1e-6 * max|f| = " << kResidueTol * max_abs;
    if (enforce) throw Error(ErrorKind::MassContract, "reality: imaginary residue <= 1e-6 max|f|", os.str());
    field.warnings.push_back(os.str());
  }
  if (is_plain(field.meta)) {
    const double mass = trapezoid(field.grid, field.values);
    field.meta.mass = mass;
    if (std::abs(mass - 1.0) > kMassTol) {
      std::ostringstream ms;
      ms << "trapezoid mass " << mass << " outside 1 +/- 1e-3";
      if (enforce) throw Error(ErrorKind::MassContract, "mass: |integral f - 1| <= 1e-3", ms.str());
      field.warnings.push_back(ms.str());
    }
    if (min_value < -kRingingTol) {
      std::ostringstream rs;
      rs << "negative ringing down to " << min_value;
      field.warnings.push_back(rs.str());
    }
  }
}

std::vector<std::vector<Complex>> invert_spectrum(const GridSpec& grid, std::vector<double>& radius, int requests,
                                                  const SpectrumFn& fn, const InversionSettings& settings,
                                                  std::size_t& evaluations, bool& capped) {
  if (settings.method == Method::TensorFFT) {
    const FrequencyLattice lattice(grid, radius, settings.max_lattice);
    capped = lattice.capped();
    if (capped) radius = lattice.radius();
    evaluations = lattice.evaluations();
    return lattice.invert(requests, fn, settings.threads);
  }
  capped = false;
  evaluations = 0;
  return quadrature_invert(grid, radius, requests, fn, settings.threads);
}

namespace {

const std::vector<double> kCertRadii{1.0, 1e4};

}  // namespace

const char* to_string(Method method) noexcept {
  return method == Method::TensorFFT ? "tensor-fft" : "direct-quadrature";
}

Method parse_method(const std::string& name) {
  if (name == "fft" || name == "tensor-fft") return Method::TensorFFT;
  if (name == "quad" || name == "direct-quadrature") return Method::DirectQuadrature;
  throw Error(ErrorKind::Usage, "method", "unknown inversion method '" + name + "' (expected fft or quad)");
}

double truncation_tail(const TailBoundCert& cert, const std::vector<double>& radius, const EnvelopeOrders& orders) {
  const int d = cert.m + cert.n;
  if (static_cast<int>(radius.size()) != d) {
    throw Error(ErrorKind::Structural, "dimension d = m + n", "one truncation radius per axis required");
  }
  if (!integrable(cert, orders)) return std::numeric_limits<double>::infinity();
  const AxisTails t = axis_tails(cert, orders);
  double total = 0.0;
  for (int k = 0; k < d; ++k) {
    double term = one_axis_tail(cert, t, k, radius[k]);
    for (int l = 0; l < d; ++l) {
      if (l != k) term *= t.full[l];
    }
    total += term;
  }
  return t.prefactor * total;
}

Truncation choose_truncation(const TailBoundCert& cert, double eps_trunc, const EnvelopeOrders& orders) {
  const int m = cert.m, d = cert.m + cert.n;
  if (!cert.verified) throw Error(ErrorKind::Integrability, "tail envelope verified", "certificate not verified");
  if (!(eps_trunc > 0.0)) throw Error(ErrorKind::Usage, "eps_trunc > 0", "truncation tolerance must be positive");
  if (m > 0 && !(cert.lambda - orders.i_order > m)) {
    std::ostringstream os;
    os << "lambda(theta) = " << cert.lambda << " does not exceed m + derivative order = " << m + orders.i_order;
    throw Error(ErrorKind::Integrability, "boundary: lambda(theta) > m + p", os.str());
  }
  if (cert.n > 0 && !(cert.delta > 0.0)) {
    throw Error(ErrorKind::Integrability, "delta = min(delta_t0, epsilon_t0) > 0", "no Gaussian decay in the J-block");
  }
  const double floor_radius = std::max(cert.fitted_M, kMinRadius);
  Truncation out;
  out.radius.assign(d, floor_radius);
  if (std::isinf(eps_trunc)) {
    out.tail_bound = truncation_tail(cert, out.radius, orders);
    return out;
  }
  const AxisTails t = axis_tails(cert, orders);
  for (int k = 0; k < d; ++k) {
    double others = 1.0;
    for (int l = 0; l < d; ++l) {
      if (l != k) others *= t.full[l];
    }
    const double target = eps_trunc / (d * t.prefactor * others);
    double U;
    if (k < m) {
      U = std::pow(0.5 * target * (t.s - 1.0), 1.0 / (1.0 - t.s)) - 1.0;
    } else {
      double lo = 0.0, hi = 1.0;
      while (one_axis_tail(cert, t, k, hi) > target) hi *= 2.0;
      for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (one_axis_tail(cert, t, k, mid) > target ? lo : hi) = mid;
      }
      U = hi;
    }
    out.radius[k] = std::max(U, floor_radius);
  }
  out.tail_bound = truncation_tail(cert, out.radius, orders);
  return out;
}

int check_regularity(const AffineModel& model, const Vec& x, const MultiIndex& q, const MultiIndex& qt) {
  const int m = model.m, n = model.n, d = model.d();
  check_index(q, d, "q");
  check_index(qt, d, "q~");
  if (x.size() != d) throw Error(ErrorKind::Structural, "dimension d = m + n", "state has wrong length");
  if (n > 0 && !kalman_rank(model).full) {
    throw Error(ErrorKind::Regularity, "Kalman rank condition", "K = [a_JJ, beta_JJ a_JJ, ...] is rank deficient");
  }
  if (m == 0) return kUnboundedOrder;
  for (int i = 0; i < m; ++i) {
    if (!(model.alpha[i](i, i) > 0.0)) {
      throw Error(ErrorKind::Regularity, "min_i alpha_{i,ii} > 0", "alpha_" + std::to_string(i + 1) + " has zero diagonal entry");
    }
  }
  const TailParams tp = tail_params(model, 1.0);
  if (!tp.p_max) {
    throw Error(ErrorKind::Regularity, "boundary: p < min_i b_i/alpha_i,ii - m",
                "no nonnegative integer p satisfies the boundary condition");
  }
  const int p = *tp.p_max;
  const int sq = sum_range(q, 0, m), sqt = sum_range(qt, 0, m);
  if (sq == 0) {
    if (sqt > p) {
      throw Error(ErrorKind::Regularity, "boundary: p < min_i b_i/alpha_i,ii - m",
                  "y_I derivative order " + std::to_string(sqt) + " exceeds p_max = " + std::to_string(p));
    }
    return p;
  }
  for (int i = 0; i < m; ++i) {
    if (!(x(i) > 0.0)) {
      throw Error(ErrorKind::Regularity, "x in interior of D",
                  "x_I derivatives require x_I > 0 (x_" + std::to_string(i + 1) + " is on the boundary)");
    }
  }
  if (sq + sqt > p) {
    throw Error(ErrorKind::Regularity, "boundary: p < min_i b_i/alpha_i,ii - m",
                "I derivative order " + std::to_string(sq + sqt) + " exceeds p_max = " + std::to_string(p));
  }
  return p;
}

double best_theta(const AffineModel& model) {
  if (model.m == 0) return 1.0;
  double best = 1.0, best_lambda = -1.0;
  for (int k = 0; k <= 10; ++k) {
    const double theta = std::ldexp(1.0, -k);
    const double lambda = tail_params(model, theta).lambda;
    if (lambda > best_lambda) {
      best_lambda = lambda;
      best = theta;
    }
  }
  return best;
}

TailBoundCert density_certificate(const AffineModel& model, double t, double theta, int samples,
                                  const SolverSettings& settings) {
  const double times[] = {t};
  const auto us = frequency_samples(model.d(), static_cast<std::size_t>(samples), kCertRadii[0], kCertRadii[1], 0x5eedULL);
  return tail_bound_check(model, t, theta, times, us, settings);
}

namespace {

void refuse_thin_margin(const AffineModel& model, double theta, int i_order) {
  if (model.m == 0) return;
  const double lambda = tail_params(model, theta).lambda;
  if (lambda - (model.m + i_order) < 0.1) {
    std::ostringstream os;
    os << "lambda(theta) - (m + order) = " << lambda - (model.m + i_order) << " < 0.1 for every theta in {1, ..., 2^-10}";
    throw Error(ErrorKind::Integrability, "boundary: lambda(theta) > m + p", os.str());
  }
}

}  // namespace

std::vector<DensityField> invert_density_batch(const AffineModel& model, std::span<const DensityRequest> requests,
                                               const GridSpec& grid, const InversionSettings& settings) {
  require_admissible(model);
  const int m = model.m, d = model.d();
  check_grid(grid, m, d);
  if (requests.empty()) return {};

  std::vector<double> times;
  std::vector<EnvelopeOrders> orders;
  for (const auto& r : requests) {
    if (!(r.t > 0.0) || !std::isfinite(r.t)) throw Error(ErrorKind::Usage, "t > 0", "density time must be positive");
    if (r.x.size() != d) throw Error(ErrorKind::Structural, "dimension d = m + n", "state has wrong length");
    for (int i = 0; i < m; ++i) {
      if (r.x(i) < 0.0) throw Error(ErrorKind::Usage, "x in D", "state has a negative I-coordinate");
    }
    check_regularity(model, r.x, r.q, r.qt);
    times.push_back(r.t);
    orders.push_back(envelope_orders(model, r.t, r.q, r.qt));
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  const double theta = best_theta(model);
  for (const auto& o : orders) refuse_thin_margin(model, theta, o.i_order);

  std::vector<double> radius = settings.radius;
  std::optional<TailBoundCert> cert;
  if (radius.empty()) {
    const auto us = frequency_samples(d, static_cast<std::size_t>(settings.cert_samples), kCertRadii[0], kCertRadii[1],
                                      0x5eedULL);
    cert = tail_bound_check(model, times.front(), theta, times, us, settings.solver);
    if (!cert->verified) {
      throw Error(ErrorKind::Integrability, "tail envelope verified", "characteristic-function envelope not certified");
    }
    radius.assign(d, 0.0);
    for (const auto& o : orders) {
      const Truncation tr = choose_truncation(*cert, settings.eps_trunc, o);
      for (int k = 0; k < d; ++k) radius[k] = std::max(radius[k], tr.radius[k]);
    }
  } else if (static_cast<int>(radius.size()) != d) {
    throw Error(ErrorKind::Usage, "radius", "explicit radius needs one entry per axis");
  }

  std::vector<std::size_t> time_index(requests.size());
  for (std::size_t r = 0; r < requests.size(); ++r) {
    time_index[r] = std::lower_bound(times.begin(), times.end(), requests[r].t) - times.begin();
  }
  const RiccatiFlow flow(model);
  const int R = static_cast<int>(requests.size());
  SpectrumFn fn = [&](const Vec& u, std::span<Complex> out) {
    const CVec iu = u.cast<Complex>() * Complex(0.0, 1.0);
    std::vector<FlowPoint> pts = flow.at_times(iu, times, settings.solver);
    for (int r = 0; r < R; ++r) {
      const auto& req = requests[r];
      const FlowPoint& p = pts[time_index[r]];
      Complex z = p.phi;
      for (int k = 0; k < d; ++k) z += req.x(k) * p.psi(k);
      out[r] = std::exp(z) * derivative_factor(p.psi, u, req.q, req.qt);
    }
  };
  std::size_t evaluations = 0;
  bool capped = false;
  const auto raw = invert_spectrum(grid, radius, R, fn, settings, evaluations, capped);

  std::vector<DensityField> fields(R);
  for (int r = 0; r < R; ++r) {
    DensityField& f = fields[r];
    f.grid = grid;
    f.meta.t = requests[r].t;
    f.meta.x = requests[r].x;
    f.meta.q = requests[r].q;
    f.meta.qt = requests[r].qt;
    f.meta.radius = radius;
    f.meta.method = to_string(settings.method);
    f.meta.theta = theta;
    f.meta.evaluations = evaluations;
    f.meta.tail_bound = cert ? truncation_tail(*cert, radius, orders[r]) : std::numeric_limits<double>::quiet_NaN();
    if (capped) {
      std::ostringstream os;
      os << "frequency budget reached; truncation radius capped, certified tail bound " << f.meta.tail_bound;
      f.warnings.push_back(os.str());
    }
    finalize_field(f, raw[r], settings.enforce_contracts);
  }
  return fields;
}

DensityField invert_density(const AffineModel& model, double t, const Vec& x, const MultiIndex& q,
                            const MultiIndex& qt, const GridSpec& grid, const InversionSettings& settings) {
  const DensityRequest req{t, x, q, qt};
  return invert_density_batch(model, std::span<const DensityRequest>(&req, 1), grid, settings).front();
}

void require_stable(const AffineModel& model) {
  check_structure(model);
  Eigen::EigenSolver<Eigen::MatrixXd> eig{Eigen::MatrixXd(model.beta), false};
  for (int k = 0; k < model.d(); ++k) {
    const std::complex<double> ev = eig.eigenvalues()(k);
    if (!(ev.real() < -1e-10)) {
      std::ostringstream os;
      os << "beta has eigenvalue " << ev.real() << (ev.imag() >= 0 ? "+" : "") << ev.imag() << "i with Re >= -1e-10";
      throw Error(ErrorKind::Stability, "Re eig(beta) < 0", os.str());
    }
  }
}

namespace {

InvariantValue invariant_unchecked(const RiccatiFlow& flow, const Vec& u, double tol, double t_cap,
                                   const SolverSettings& settings) {
  const CVec iu = u.cast<Complex>() * Complex(0.0, 1.0);
  InvariantValue out;
  Complex phi_end = 0.0;
  const double times[] = {t_cap};
  flow.integrate(
      iu, times, settings,
      [&](std::size_t, double t, const CVec&, Complex phi) {
        phi_end = phi;
        out.t_end = t;
      },
      [&](double t, const CVec& psi, Complex phi) {
        if (psi.norm() >= tol) return true;
        const Complex F = flow.vector_field(psi).F;
        if (std::abs(F) >= tol * (1.0 + std::abs(phi))) return true;
        out.converged = true;
        out.t_end = t;
        phi_end = phi;
        return false;
      });
  if (u.norm() == 0.0) out.converged = true;
  out.value = std::exp(phi_end);
  return out;
}

}  // namespace

InvariantValue invariant_charfn(const RiccatiFlow& flow, const Vec& u, double tol, double t_cap,
                                const SolverSettings& settings) {
  require_stable(flow.model());
  if (u.size() != flow.model().d()) throw Error(ErrorKind::Structural, "dimension d = m + n", "frequency has wrong length");
  if (!(tol > 0.0) || !(t_cap > 0.0)) throw Error(ErrorKind::Usage, "tol > 0, t_cap > 0", "invalid limit settings");
  return invariant_unchecked(flow, u, tol, t_cap, settings);
}

InvariantValue invariant_charfn(const AffineModel& model, const Vec& u, double tol, double t_cap,
                                const SolverSettings& settings) {
  return invariant_charfn(RiccatiFlow(model), u, tol, t_cap, settings);
}

DensityField invariant_density(const AffineModel& model, const GridSpec& grid, const MultiIndex& qt,
                               const InversionSettings& settings) {
  require_admissible(model);
  require_stable(model);
  const int m = model.m, d = model.d();
  check_grid(grid, m, d);
  const MultiIndex q(d, 0);
  check_regularity(model, Vec::Zero(d), q, qt);
  const EnvelopeOrders orders = envelope_orders(model, std::numeric_limits<double>::infinity(), q, qt);
  const double theta = best_theta(model);
  refuse_thin_margin(model, theta, orders.i_order);

  std::vector<double> radius = settings.radius;
  std::optional<TailBoundCert> cert;
  if (radius.empty()) {
    std::vector<double> times;
    for (int k = 0; k < 6; ++k) times.push_back(settings.t_ref * std::ldexp(1.0, k));
    const auto us = frequency_samples(d, static_cast<std::size_t>(settings.cert_samples), kCertRadii[0], kCertRadii[1],
                                      0x5eedULL);
    cert = tail_bound_check(model, settings.t_ref, theta, times, us, settings.solver);
    if (!cert->verified) {
      throw Error(ErrorKind::Integrability, "tail envelope verified", "characteristic-function envelope not certified");
    }
    radius = choose_truncation(*cert, settings.eps_trunc, orders).radius;
  } else if (static_cast<int>(radius.size()) != d) {
    throw Error(ErrorKind::Usage, "radius", "explicit radius needs one entry per axis");
  }

  const RiccatiFlow flow(model);
  std::atomic<std::size_t> unconverged{0};
  SpectrumFn fn = [&](const Vec& u, std::span<Complex> out) {
    const InvariantValue v = invariant_unchecked(flow, u, settings.invariant_tol, settings.t_cap, settings.solver);
    if (!v.converged) ++unconverged;
    CVec none = CVec::Zero(d);
    out[0] = v.value * derivative_factor(none, u, q, qt);
  };
  std::size_t evaluations = 0;
  bool capped = false;
  const auto raw = invert_spectrum(grid, radius, 1, fn, settings, evaluations, capped);

  DensityField f;
  f.grid = grid;
  f.meta.t = std::numeric_limits<double>::infinity();
  f.meta.x = Vec::Zero(d);
  f.meta.q = q;
  f.meta.qt = qt;
  f.meta.radius = radius;
  f.meta.method = to_string(settings.method);
  f.meta.theta = theta;
  f.meta.evaluations = evaluations;
  f.meta.tail_bound = cert ? truncation_tail(*cert, radius, orders) : std::numeric_limits<double>::quiet_NaN();
  if (capped) {
    std::ostringstream os;
    os << "frequency budget reached; truncation radius capped, certified tail bound " << f.meta.tail_bound;
    f.warnings.push_back(os.str());
  }
  if (unconverged > 0) {
    f.warnings.push_back(std::to_string(unconverged.load()) + " frequencies reached t_cap before the limit converged");
  }
  finalize_field(f, raw[0], settings.enforce_contracts);
  return f;
}

double tv_distance(const GridSpec& grid, const std::vector<double>& f, const std::vector<double>& g) {
  if (f.size() != grid.size() || g.size() != grid.size()) {
    throw Error(ErrorKind::GridMismatch, "identical grids", "value arrays do not match the grid");
  }
  std::vector<double> diff(f.size());
  for (std::size_t k = 0; k < f.size(); ++k) diff[k] = std::abs(f[k] - g[k]);
  return std::clamp(0.5 * trapezoid(grid, diff), 0.0, 1.0);
}

double tv_distance(const DensityField& f, const DensityField& g) {
  if (!(f.grid == g.grid)) throw Error(ErrorKind::GridMismatch, "identical grids", "densities live on different grids");
  if (!is_plain(f.meta) || !is_plain(g.meta)) {
    throw Error(ErrorKind::Usage, "q = q~ = 0", "total variation needs plain densities");
  }
  return tv_distance(f.grid, f.values, g.values);
}

void write_csv(std::ostream& out, const DensityField& field) {
  const int d = field.grid.dims();
  for (int k = 0; k < d; ++k) out << 'y' << k + 1 << ',';
  out << "value\n";
  out.precision(17);
  for (std::size_t flat = 0; flat < field.values.size(); ++flat) {
    const Vec y = field.grid.point(flat);
    for (int k = 0; k < d; ++k) out << y(k) << ',';
    out << field.values[flat] << '\n';
  }
}

nlohmann::json metadata_json(const DensityField& field) {
  const auto& m = field.meta;
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j{{"grid", to_string(field.grid)},
                   {"t", std::isinf(m.t) ? nlohmann::json("inf") : nlohmann::json(m.t)},
                   {"x", std::vector<double>(m.x.data(), m.x.data() + m.x.size())},
                   {"q", m.q},
                   {"q_tilde", m.qt},
                   {"radius", m.radius},
                   {"method", m.method},
                   {"theta", m.theta},
                   {"tail_bound", num(m.tail_bound)},
                   {"imag_residue", m.imag_residue},
                   {"max_abs", m.max_abs},
                   {"min_value", m.min_value},
                   {"evaluations", m.evaluations},
                   {"warnings", field.warnings}};
  j["mass"] = m.mass ? nlohmann::json(*m.mass) : nlohmann::json(nullptr);
  return j;
}

}  // namespace affine
