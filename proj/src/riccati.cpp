#include "affine/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "affine/errors.hpp"

namespace affine {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

double scaled_rms(const CVec& err, const CVec& y0, const CVec& y1, const SolverSettings& s) {
  double sum = 0.0;
  for (int k = 0; k < err.size(); ++k) {
    const double scale = s.abs_tol + s.rel_tol * std::sqrt(std::max(std::norm(y0(k)), std::norm(y1(k))));
    sum += std::norm(err(k)) / (scale * scale);
  }
  return std::sqrt(sum / static_cast<double>(err.size()));
}

// F and R at an arbitrary complex point, no domain check.
void evaluate_field(const AffineModel& model, const CVec& u, Complex& F, CVec& R) {
  const int d = model.d();
  const int m = model.m;
  Complex quad = 0.0;
  Complex lin = 0.0;
  for (int k = 0; k < d; ++k) {
    lin += model.b(k) * u(k);
    for (int l = 0; l < d; ++l) {
      const double akl = model.a(k, l);
      if (akl != 0.0) quad += u(k) * akl * u(l);
    }
  }
  F = quad + lin + (model.nu.is_zero() ? Complex(0.0) : levy_F_term(model.nu, u, m));
  R.resize(m);
  for (int i = 0; i < m; ++i) {
    const Mat& alpha = model.alpha[i];
    Complex value = 0.0;
    for (int k = 0; k < d; ++k) {
      value += model.beta(k, i) * u(k);
      for (int l = 0; l < d; ++l) {
        const double akl = alpha(k, l);
        if (akl != 0.0) value += u(k) * akl * u(l);
      }
    }
    if (!model.mu[i].is_zero()) value += levy_R_term(model.mu[i], u);
    R(i) = value;
  }
}

}  // namespace

RiccatiFlow::RiccatiFlow(const AffineModel& model) : model_(model) {
  require_admissible(model_);
  const int m = model_.m;
  const int n = model_.n;
  if (n > 0) {
    beta_jj_t_ = model_.beta.block(m, m, n, n).transpose();
    const Mat off = beta_jj_t_ - Mat(beta_jj_t_.diagonal().asDiagonal());
    jj_diagonal_ = off.cwiseAbs().maxCoeff() == 0.0;
  }
}

VectorFieldValue RiccatiFlow::vector_field(const CVec& u) const {
  if (u.size() != model_.d()) throw Error(ErrorKind::Structural, "dimension d = m + n", "frequency has wrong length");
  for (int i = 0; i < model_.m; ++i) {
    if (u(i).real() > kClampThreshold) {
      throw Error(ErrorKind::Usage, "domain Re(u_I) <= 0",
                  "vector field evaluated outside the closure of U (Re u_" + std::to_string(i) + " > 0)");
    }
  }
  VectorFieldValue out;
  evaluate_field(model_, u, out.F, out.R);
  return out;
}

CVec RiccatiFlow::psi_J(double t, const CVec& uJ) const {
  const int n = model_.n;
  if (uJ.size() != n) throw Error(ErrorKind::Structural, "dimension d = m + n", "u_J has wrong length");
  if (n == 0) return CVec(0);
  if (jj_diagonal_) {
    CVec out(n);
    for (int j = 0; j < n; ++j) out(j) = std::exp(beta_jj_t_(j, j) * t) * uJ(j);
    return out;
  }
  const Eigen::MatrixXd e = (Eigen::MatrixXd(beta_jj_t_) * t).exp();
  CVec out = CVec::Zero(n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) out(r) += e(r, c) * uJ(c);
  }
  return out;
}

CVec RiccatiFlow::full_psi(double t, const CVec& psi_I, const CVec& uJ) const {
  CVec psi(model_.d());
  psi.head(model_.m) = psi_I;
  if (model_.n > 0) psi.tail(model_.n) = psi_J(t, uJ);
  return psi;
}

void RiccatiFlow::integrate(const CVec& u0, std::span<const double> stop_times, const SolverSettings& settings,
                            const std::function<void(std::size_t, double, const CVec&, Complex)>& on_stop,
                            const std::function<bool(double, const CVec&, Complex)>& on_step) const {
  const int m = model_.m;
  const int d = model_.d();
  if (u0.size() != d) throw Error(ErrorKind::Structural, "dimension d = m + n", "initial frequency has wrong length");
  for (int i = 0; i < m; ++i) {
    if (u0(i).real() > kClampThreshold) {
      throw Error(ErrorKind::Usage, "domain Re(u_I) <= 0", "initial value outside the closure of U");
    }
  }
  if (!(settings.rel_tol > 0.0) || !(settings.abs_tol > 0.0)) {
    throw Error(ErrorKind::Usage, "solver settings", "tolerances must be positive");
  }
  for (std::size_t k = 0; k < stop_times.size(); ++k) {
    if (stop_times[k] < 0.0 || (k > 0 && stop_times[k] < stop_times[k - 1])) {
      throw Error(ErrorKind::Usage, "increasing times", "stop times must be nonnegative and increasing");
    }
  }

  const CVec uJ = u0.tail(model_.n);
  CVec y(m + 1);
  y.head(m) = u0.head(m);
  y(m) = 0.0;

  CVec psi(d);
  Complex F;
  CVec R;
  auto deriv = [&](double t, const CVec& state, CVec& out) {
    psi.head(m) = state.head(m);
    if (model_.n > 0) psi.tail(model_.n) = psi_J(t, uJ);
    evaluate_field(model_, psi, F, R);
    out.resize(m + 1);
    out.head(m) = R;
    out(m) = F;
  };

  std::size_t next = 0;
  double t = 0.0;
  auto emit_ready = [&]() {
    while (next < stop_times.size() && stop_times[next] <= t) {
      on_stop(next, t, full_psi(t, y.head(m), uJ), y(m));
      ++next;
    }
  };
  emit_ready();
  if (next == stop_times.size() && !on_step) return;
  const double t_end = stop_times.empty() ? 0.0 : stop_times.back();

  CVec k1, k2, k3, k4, k5, k6, k7, tmp, y_new, err;
  deriv(t, y, k1);

  // Initial step after Hairer, Norsett and Wanner.
  auto norm = [&](const CVec& v) {
    double sum = 0.0;
    for (int k = 0; k < v.size(); ++k) {
      const double scale = settings.abs_tol + settings.rel_tol * std::sqrt(std::norm(y(k)));
      sum += std::norm(v(k)) / (scale * scale);
    }
    return std::sqrt(sum / static_cast<double>(v.size()));
  };
  double h;
  {
    const double d0 = norm(y);
    const double d1 = norm(k1);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, std::max(t_end, 1e-6));
    tmp = y + h0 * k1;
    deriv(t + h0, tmp, k2);
    const double d2 = norm(k2 - k1) / h0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    h = std::min(100.0 * h0, h1);
  }
  h = std::min(h, settings.max_step);

  long steps = 0;
  while (next < stop_times.size() || on_step) {
    const double target = next < stop_times.size() ? stop_times[next] : std::numeric_limits<double>::infinity();
    if (++steps > settings.max_steps) {
      throw SolverDivergence("maximum number of steps exceeded at t = " + std::to_string(t), t);
    }
    bool lands = false;
    if (t + h >= target || target - (t + h) < 1e-12 * std::max(1.0, target)) {
      h = target - t;
      lands = true;
    }
    if (h < 1e-14 * std::max(1.0, std::abs(t))) {
      throw SolverDivergence("step size underflow at t = " + std::to_string(t), t);
    }

    tmp = y + h * (a21 * k1);
    deriv(t + c2 * h, tmp, k2);
    tmp = y + h * (a31 * k1 + a32 * k2);
    deriv(t + c3 * h, tmp, k3);
    tmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    deriv(t + c4 * h, tmp, k4);
    tmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    deriv(t + c5 * h, tmp, k5);
    tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    deriv(t + h, tmp, k6);
    y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    deriv(t + h, y_new, k7);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    const double e = scaled_rms(err, y, y_new, settings);
    if (!std::isfinite(e)) {
      h *= 0.2;
      continue;
    }
    if (e <= 1.0) {
      t = lands ? target : t + h;
      y = y_new;
      for (int i = 0; i < m; ++i) {
        const double re = y(i).real();
        if (re > 0.0) {
          if (re > kClampThreshold) {
            std::ostringstream os;
            os << "Re psi_" << i << " = " << re << " > 0 at t = " << t;
            throw SolverDivergence(os.str(), t);
          }
          y(i) = Complex(0.0, y(i).imag());
        }
      }
      k1 = k7;
      if (m > 0 && y.head(m) != y_new.head(m)) deriv(t, y, k1);
      emit_ready();
      if (on_step && !on_step(t, full_psi(t, y.head(m), uJ), y(m))) return;
      const double factor = e == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(e, -0.2), 0.2, 5.0);
      h = std::min(h * factor, settings.max_step);
    } else {
      h *= std::clamp(0.9 * std::pow(e, -0.2), 0.1, 1.0);
    }
  }
}

std::vector<FlowPoint> RiccatiFlow::at_times(const CVec& u0, std::span<const double> times,
                                             const SolverSettings& settings) const {
  std::vector<FlowPoint> out(times.size());
  integrate(u0, times, settings, [&](std::size_t k, double, const CVec& psi, Complex phi) { out[k] = {psi, phi}; });
  return out;
}

FlowPoint RiccatiFlow::at(const CVec& u0, double t, const SolverSettings& settings) const {
  const double times[] = {t};
  return at_times(u0, times, settings).front();
}

RiccatiPath RiccatiFlow::path(const CVec& u0, double t_end, const SolverSettings& settings) const {
  if (!(t_end > 0.0)) throw Error(ErrorKind::Usage, "t_end > 0", "path end time must be positive");
  RiccatiPath out;
  out.u0 = u0;
  const double times[] = {0.0, t_end};
  integrate(u0, times, settings, [&](std::size_t k, double t, const CVec& psi, Complex phi) {
    if (k == 0 || out.times.empty() || out.times.back() < t) {
      out.times.push_back(t);
      out.psi.push_back(psi);
      out.phi.push_back(phi);
    }
  }, [&](double t, const CVec& psi, Complex phi) {
    if (t < t_end) {
      out.times.push_back(t);
      out.psi.push_back(psi);
      out.phi.push_back(phi);
    }
    return t < t_end;
  });
  return out;
}

VectorFieldValue vector_field(const AffineModel& model, const CVec& u) { return RiccatiFlow(model).vector_field(u); }

RiccatiPath solve_flow(const AffineModel& model, const CVec& u0, double t_end, const SolverSettings& settings) {
  return RiccatiFlow(model).path(u0, t_end, settings);
}

CVec psi_J_closed(const AffineModel& model, double t, const CVec& uJ) {
  if (model.n < 1) throw Error(ErrorKind::Structural, "n >= 1", "model has no J-block");
  return RiccatiFlow(model).psi_J(t, uJ);
}

HFields h_fields(const AffineModel& model, int i, const Vec& x, const Vec& y, const Vec& u) {
  check_structure(model);
  const int d = model.d();
  if (i < 0 || i >= model.m) throw Error(ErrorKind::Usage, "index i in I", "h_fields index outside I");
  if (x.size() != d || y.size() != d || u.size() != d) {
    throw Error(ErrorKind::Structural, "dimension d = m + n", "h_fields arguments have wrong length");
  }
  const double r = u.norm();
  if (!(r > 0.0)) throw Error(ErrorKind::Usage, "u != 0", "h_fields requires a nonzero frequency");
  for (int k = 0; k < d; ++k) {
    const bool bad = k < model.m ? x(k) > 0.0 : x(k) != 0.0;
    if (bad) throw Error(ErrorKind::Usage, "x in U", "h_fields requires x_I <= 0 and x_J = 0");
  }
  const Mat& alpha = model.alpha[i];
  HFields out;
  out.h1 = x.dot(alpha * x) - y.dot(alpha * y) + model.beta.col(i).dot(x) / r;
  out.h2 = 2.0 * x.dot(alpha * y) + model.beta.col(i).dot(y) / r;
  for (const auto& atom : model.mu[i].atoms()) {
    const Complex z(r * atom.point.dot(x), r * atom.point.dot(y));
    const Complex jump = expm1_minus_z(z);
    out.h1 += atom.mass * jump.real() / (r * r);
    out.h2 += atom.mass * jump.imag() / (r * r);
  }
  return out;
}

ScaledFG scaled_FG(const AffineModel& model, double t, const Vec& u, const SolverSettings& settings) {
  const double r = u.norm();
  if (!(r > 0.0)) throw Error(ErrorKind::Usage, "u != 0", "scaled_FG requires a nonzero frequency");
  if (t < 0.0) throw Error(ErrorKind::Usage, "t >= 0", "scaled_FG requires t >= 0");
  const RiccatiFlow flow(model);
  const CVec iu = u.cast<Complex>() * Complex(0.0, 1.0);
  const FlowPoint p = flow.at(iu, t / r, settings);
  return {p.psi.real() / r, p.psi.imag() / r};
}

void write_csv(std::ostream& out, const RiccatiPath& path) {
  const int d = path.psi.empty() ? 0 : static_cast<int>(path.psi.front().size());
  out << "t";
  for (int k = 0; k < d; ++k) out << ",re_psi" << k + 1;
  for (int k = 0; k < d; ++k) out << ",im_psi" << k + 1;
  out << ",re_phi,im_phi\n";
  out.precision(17);
  for (std::size_t s = 0; s < path.times.size(); ++s) {
    out << path.times[s];
    for (int k = 0; k < d; ++k) out << ',' << path.psi[s](k).real();
    for (int k = 0; k < d; ++k) out << ',' << path.psi[s](k).imag();
    out << ',' << path.phi[s].real() << ',' << path.phi[s].imag() << '\n';
  }
}

}  // namespace affine
