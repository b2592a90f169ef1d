#include "affine/ergodicity.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>

#include "affine/errors.hpp"

namespace affine {

namespace {

Mat block_p(const LyapunovData& lyap) {
  const int m = static_cast<int>(lyap.M_I.rows()), n = static_cast<int>(lyap.M_J.rows());
  Mat p = Mat::Zero(m + n, m + n);
  if (m > 0) p.topLeftCorner(m, m) = lyap.M_I;
  if (n > 0) p.bottomRightCorner(n, n) = lyap.epsilon * lyap.M_J;
  return p;
}

double v_of(const Mat& p, const Vec& x) { return std::sqrt(1.0 + x.dot(p * x)); }

void check_stable_block(const Mat& b, const char* name) {
  Eigen::EigenSolver<Eigen::MatrixXd> eig{Eigen::MatrixXd(b), false};
  for (int k = 0; k < b.rows(); ++k) {
    const std::complex<double> ev = eig.eigenvalues()(k);
    if (!(ev.real() < 0.0)) {
      std::ostringstream os;
      os << name << " has eigenvalue " << ev.real() << (ev.imag() >= 0 ? "+" : "") << ev.imag() << "i with Re >= 0";
      throw Error(ErrorKind::Stability, std::string("Re eig(") + name + ") < 0", os.str());
    }
  }
}

std::vector<Vec> random_points_in_D(int m, int d, std::size_t count, double r_lo, double r_hi, bool log_radius,
                                    std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Vec> out;
  for (std::size_t k = 0; k < count; ++k) {
    Vec v(d);
    do {
      for (int c = 0; c < d; ++c) v(c) = normal(rng);
    } while (v.norm() == 0.0);
    for (int i = 0; i < m; ++i) v(i) = std::abs(v(i));
    const double s = unif(rng);
    const double r = log_radius ? std::exp(std::log(r_lo) + s * (std::log(r_hi) - std::log(r_lo))) : r_lo + s * (r_hi - r_lo);
    out.push_back(v / v.norm() * r);
  }
  return out;
}

}  // namespace

SplitModels split_semigroups(const AffineModel& model) {
  require_admissible(model);
  SplitModels out{model, model};
  out.q_model.nu = JumpMeasure();
  out.r_model.a = Mat::Zero(model.d(), model.d());
  out.r_model.b = Vec::Zero(model.d());
  return out;
}

Mat solve_lyapunov(const Mat& beta) {
  const int k = static_cast<int>(beta.rows());
  if (k == 0) return Mat(0, 0);
  check_stable_block(beta, "beta");
  const Eigen::MatrixXd bt = Eigen::MatrixXd(beta).transpose();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(k, k);
  Eigen::MatrixXd kron = Eigen::MatrixXd::Zero(k * k, k * k);
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < k; ++c) {
      kron.block(r * k, c * k, k, k) += id(r, c) * bt + bt(r, c) * id;
    }
  }
  const Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(id.data(), k * k);
  const Eigen::VectorXd sol = kron.fullPivLu().solve(rhs);
  Eigen::MatrixXd M = Eigen::Map<const Eigen::MatrixXd>(sol.data(), k, k);
  M = 0.5 * (M + M.transpose()).eval();
  return M;
}

LyapunovData lyapunov_norms(const AffineModel& model) {
  check_structure(model);
  const int m = model.m, n = model.n;
  LyapunovData out;
  if (m > 0) {
    const Mat b = model.beta.topLeftCorner(m, m);
    check_stable_block(b, "beta_II");
    out.M_I = solve_lyapunov(b);
    out.residual_I = (b.transpose() * out.M_I + out.M_I * b + Mat::Identity(m, m)).cwiseAbs().maxCoeff();
  } else {
    out.M_I = Mat(0, 0);
  }
  if (n > 0) {
    const Mat b = model.beta.bottomRightCorner(n, n);
    check_stable_block(b, "beta_JJ");
    out.M_J = solve_lyapunov(b);
    out.residual_J = (b.transpose() * out.M_J + out.M_J * b + Mat::Identity(n, n)).cwiseAbs().maxCoeff();
  } else {
    out.M_J = Mat(0, 0);
  }
  if (out.residual_I > 1e-10 || out.residual_J > 1e-10) {
    throw Error(ErrorKind::Divergence, "Lyapunov residual <= 1e-10", "Lyapunov solve is inaccurate");
  }
  return out;
}

double lyapunov_V(const LyapunovData& lyap, const Vec& x) { return v_of(block_p(lyap), x); }

double generator_on_V(const AffineModel& q_model, const Vec& x, const LyapunovData& lyap) {
  const int m = q_model.m, d = q_model.d();
  if (!q_model.nu.is_zero()) throw Error(ErrorKind::Usage, "nu = 0", "generator_on_V expects the Q-split model");
  if (x.size() != d || lyap.M_I.rows() != m || lyap.M_J.rows() != q_model.n) {
    throw Error(ErrorKind::Structural, "dimension d = m + n", "state or Lyapunov data has wrong size");
  }
  const Mat p = block_p(lyap);
  const Vec px = p * x;
  const double V = std::sqrt(1.0 + x.dot(px));
  const Vec grad = px / V;
  const Mat hess = p / V - px * px.transpose() / (V * V * V);
  Mat diff = q_model.a;
  for (int i = 0; i < m; ++i) diff += x(i) * q_model.alpha[i];
  double out = (diff.cwiseProduct(hess)).sum() + (q_model.b + q_model.beta * x).dot(grad);
  for (int i = 0; i < m; ++i) {
    double jump = 0.0;
    for (const auto& atom : q_model.mu[i].atoms()) {
      jump += atom.mass * (v_of(p, x + atom.point) - V - grad.dot(atom.point));
    }
    out += x(i) * jump;
  }
  return out;
}

DriftFit drift_fit(const AffineModel& q_model, const LyapunovData& lyap, const std::vector<Vec>& sample_xs) {
  if (sample_xs.empty()) throw Error(ErrorKind::Usage, "samples", "drift fit needs sample points");
  const std::size_t N = sample_xs.size();
  std::vector<double> A(N), V(N), r(N);
  const Mat p = block_p(lyap);
  double r_max = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    A[k] = generator_on_V(q_model, sample_xs[k], lyap);
    V[k] = v_of(p, sample_xs[k]);
    r[k] = sample_xs[k].norm();
    r_max = std::max(r_max, r[k]);
  }
  auto argmax = [&](double c) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < N; ++k) {
      if (A[k] + c * V[k] > A[best] + c * V[best]) best = k;
    }
    return best;
  };
  auto ok_at = [&](double c) { return r[argmax(c)] <= 0.9 * r_max; };

  Eigen::EigenSolver<Eigen::MatrixXd> eig{Eigen::MatrixXd(q_model.beta), false};
  double c_max = 0.0;
  for (int k = 0; k < q_model.d(); ++k) c_max = std::max(c_max, std::abs(eig.eigenvalues()(k).real()));
  c_max *= 2.0;

  DriftFit out;
  out.epsilon = lyap.epsilon;
  constexpr double kMinRate = 1e-4;
  if (!(c_max >= kMinRate) || !ok_at(kMinRate)) {
    const std::size_t w = argmax(kMinRate);
    out.ok = false;
    out.c = 0.0;
    out.C = A[argmax(0.0)];
    out.witness = sample_xs[w];
    return out;
  }
  double lo = kMinRate, hi = c_max;
  if (ok_at(hi)) {
    lo = hi;
  } else {
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (ok_at(mid) ? lo : hi) = mid;
    }
  }
  out.c = lo;
  const std::size_t best = argmax(lo);
  out.C = A[best] + lo * V[best];
  out.ok = true;
  return out;
}

DriftFit drift_fit_sweep(const AffineModel& q_model, LyapunovData& lyap, const std::vector<Vec>& sample_xs) {
  DriftFit last;
  for (int k = 0; k <= 6; ++k) {
    lyap.epsilon = std::pow(10.0, -k);
    last = drift_fit(q_model, lyap, sample_xs);
    if (last.ok || q_model.n == 0) break;
  }
  lyap.fitted_c = last.c;
  lyap.fitted_C = last.C;
  return last;
}

std::vector<Vec> drift_samples(const AffineModel& model, std::size_t count, double r_max, std::uint64_t seed) {
  const int m = model.m, d = model.d();
  std::vector<Vec> out{Vec::Zero(d)};
  const double radii[] = {1.0, 10.0, 100.0, r_max};
  for (int k = 0; k < d; ++k) {
    for (double r : radii) {
      if (r > r_max) continue;
      Vec e = Vec::Zero(d);
      e(k) = r;
      out.push_back(e);
      if (k >= m) out.push_back(-e);
    }
  }
  std::mt19937_64 rng(seed);
  const std::size_t rest = count > out.size() ? count - out.size() : 0;
  for (auto& v : random_points_in_D(m, d, rest, 1e-2, r_max, true, rng)) out.push_back(v);
  return out;
}

std::vector<Vec> dobrushin_points(const AffineModel& model, double M, std::size_t count, std::uint64_t seed) {
  const int m = model.m, d = model.d();
  std::vector<Vec> out{Vec::Zero(d)};
  for (int k = 0; k < d; ++k) {
    Vec e = Vec::Zero(d);
    e(k) = M;
    out.push_back(e);
    if (k >= m) out.push_back(-e);
  }
  std::mt19937_64 rng(seed);
  const std::size_t rest = count > out.size() ? count - out.size() : 0;
  for (auto& v : random_points_in_D(m, d, rest, 0.0, M, false, rng)) out.push_back(v);
  return out;
}

DobrushinReport dobrushin_check(const AffineModel& q_model, double h, double M,
                                const std::vector<std::pair<Vec, Vec>>& pairs, const GridSpec& grid,
                                const InversionSettings& settings) {
  require_admissible(q_model);
  if (!(h > 0.0) || !(M > 0.0)) throw Error(ErrorKind::Usage, "h > 0, M > 0", "invalid Dobrushin parameters");
  if (pairs.empty()) throw Error(ErrorKind::Usage, "pairs", "need at least one pair");
  const int d = q_model.d();
  const MultiIndex zero(d, 0);
  check_regularity(q_model, Vec::Zero(d), zero, zero);

  std::vector<Vec> points;
  auto index_of = [&](const Vec& x) {
    if (x.size() != d) throw Error(ErrorKind::Structural, "dimension d = m + n", "pair point has wrong length");
    if (x.norm() > M * (1.0 + 1e-12)) throw Error(ErrorKind::Usage, "|x| <= M", "pair point outside the ball");
    for (std::size_t k = 0; k < points.size(); ++k) {
      if (points[k] == x) return k;
    }
    points.push_back(x);
    return points.size() - 1;
  };
  std::vector<std::pair<std::size_t, std::size_t>> idx;
  for (const auto& [x, y] : pairs) {
    const std::size_t a = index_of(x);
    const std::size_t b = index_of(y);
    idx.emplace_back(a, b);
  }
  std::vector<DensityRequest> reqs;
  for (const auto& x : points) reqs.push_back({h, x, zero, zero});
  const auto fields = invert_density_batch(q_model, reqs, grid, settings);

  DobrushinReport out;
  out.h = h;
  out.M = M;
  out.pairs = pairs.size();
  out.worst_x = pairs.front().first;
  out.worst_y = pairs.front().second;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const double tv = tv_distance(fields[idx[k].first], fields[idx[k].second]);
    if (tv > out.max_tv) {
      out.max_tv = tv;
      out.worst_x = pairs[k].first;
      out.worst_y = pairs[k].second;
    }
  }
  out.delta = 2.0 - 2.0 * out.max_tv;
  return out;
}

std::vector<DecayReport> tv_decay_reports(const AffineModel& model, const std::vector<Vec>& xs,
                                          const std::vector<double>& t_grid, const GridSpec& grid,
                                          const InversionSettings& settings, double window_lo, double window_hi) {
  require_admissible(model);
  require_stable(model);
  const int m = model.m, d = model.d();
  check_grid(grid, m, d);
  if (xs.empty()) throw Error(ErrorKind::Usage, "x", "need at least one starting point");
  if (t_grid.empty() || !(t_grid.front() > 0.0)) throw Error(ErrorKind::Usage, "t > 0", "time grid must be positive");
  for (std::size_t k = 1; k < t_grid.size(); ++k) {
    if (!(t_grid[k] > t_grid[k - 1])) throw Error(ErrorKind::Usage, "increasing times", "time grid must increase");
  }
  const MultiIndex zero(d, 0);
  for (const auto& x : xs) {
    if (x.size() != d) throw Error(ErrorKind::Structural, "dimension d = m + n", "state has wrong length");
    for (int i = 0; i < m; ++i) {
      if (x(i) < 0.0) throw Error(ErrorKind::Usage, "x in D", "state has a negative I-coordinate");
    }
    check_regularity(model, x, zero, zero);
  }

  const double theta = best_theta(model);
  std::vector<double> radius = settings.radius;
  std::optional<TailBoundCert> cert;
  if (radius.empty()) {
    std::vector<double> times = t_grid;
    times.push_back(2.0 * t_grid.back());
    const auto us = frequency_samples(d, static_cast<std::size_t>(settings.cert_samples), 1.0, 1e4, 0x5eedULL);
    cert = tail_bound_check(model, t_grid.front(), theta, times, us, settings.solver);
    if (!cert->verified) {
      throw Error(ErrorKind::Integrability, "tail envelope verified", "characteristic-function envelope not certified");
    }
    radius = choose_truncation(*cert, settings.eps_trunc, EnvelopeOrders{}).radius;
  }

  const RiccatiFlow flow(model);
  const std::size_t T = t_grid.size(), X = xs.size();
  const int R = static_cast<int>(X * T + 1);
  std::atomic<std::size_t> unconverged{0};
  SpectrumFn fn = [&](const Vec& u, std::span<Complex> out) {
    const CVec iu = u.cast<Complex>() * Complex(0.0, 1.0);
    Complex phi_inf = 0.0;
    bool converged = false;
    flow.integrate(
        iu, t_grid, settings.solver,
        [&](std::size_t k, double, const CVec& psi, Complex phi) {
          for (std::size_t a = 0; a < X; ++a) {
            Complex z = phi;
            for (int c = 0; c < d; ++c) z += xs[a](c) * psi(c);
            out[a * T + k] = std::exp(z);
          }
        },
        [&](double t, const CVec& psi, Complex phi) {
          phi_inf = phi;
          if (t < t_grid.back()) return true;
          if (t > settings.t_cap) return false;
          if (psi.norm() >= settings.invariant_tol) return true;
          if (std::abs(flow.vector_field(psi).F) >= settings.invariant_tol * (1.0 + std::abs(phi))) return true;
          converged = true;
          return false;
        });
    if (!converged && u.norm() > 0.0) ++unconverged;
    out[R - 1] = std::exp(phi_inf);
  };
  std::size_t evaluations = 0;
  bool capped = false;
  const auto raw = invert_spectrum(grid, radius, R, fn, settings, evaluations, capped);

  auto make_field = [&](int r, double t, const Vec& x) {
    DensityField f;
    f.grid = grid;
    f.meta.t = t;
    f.meta.x = x;
    f.meta.q = zero;
    f.meta.qt = zero;
    f.meta.radius = radius;
    f.meta.method = to_string(settings.method);
    f.meta.theta = theta;
    f.meta.evaluations = evaluations;
    finalize_field(f, raw[r], settings.enforce_contracts);
    return f;
  };
  const DensityField pi = make_field(R - 1, std::numeric_limits<double>::infinity(), Vec::Zero(d));

  std::vector<DecayReport> reports;
  for (std::size_t a = 0; a < X; ++a) {
    DecayReport rep;
    rep.x = xs[a];
    rep.times = t_grid;
    rep.window_lo = window_lo;
    rep.window_hi = window_hi;
    rep.x_factor = 1.0 + std::log1p(xs[a].norm());
    if (capped) rep.diagnostics.push_back("frequency budget reached; truncation radius capped");
    if (unconverged > 0) {
      rep.diagnostics.push_back(std::to_string(unconverged.load()) + " frequencies did not reach the invariant limit");
    }
    for (std::size_t k = 0; k < T; ++k) {
      const DensityField f = make_field(static_cast<int>(a * T + k), t_grid[k], xs[a]);
      rep.tv.push_back(tv_distance(f, pi));
    }
    for (std::size_t k = 1; k < T; ++k) {
      if (rep.tv[k] > rep.tv[k - 1] + 2.0 * kTvFloor) {
        rep.monotone = false;
        std::ostringstream os;
        os << "TV increases from " << rep.tv[k - 1] << " to " << rep.tv[k] << " at t = " << t_grid[k];
        rep.diagnostics.push_back(os.str());
      }
    }
    for (std::size_t k = 0; k < T; ++k) {
      if (rep.tv[k] < kTvFloor) {
        std::ostringstream os;
        os << "floor: TV below " << kTvFloor << " from t = " << t_grid[k];
        rep.diagnostics.push_back(os.str());
        break;
      }
    }
    std::vector<double> ts, ls;
    for (std::size_t k = 0; k < T; ++k) {
      if (rep.tv[k] >= window_lo && rep.tv[k] <= window_hi) {
        ts.push_back(t_grid[k]);
        ls.push_back(std::log(rep.tv[k]));
      }
    }
    rep.fit_points = ts.size();
    if (ts.size() >= 3) {
      const double n = static_cast<double>(ts.size());
      double st = 0, sl = 0, stt = 0, stl = 0;
      for (std::size_t k = 0; k < ts.size(); ++k) {
        st += ts[k];
        sl += ls[k];
        stt += ts[k] * ts[k];
        stl += ts[k] * ls[k];
      }
      const double slope = (n * stl - st * sl) / (n * stt - st * st);
      const double icpt = (sl - slope * st) / n;
      double ss_res = 0, ss_tot = 0;
      const double mean = sl / n;
      for (std::size_t k = 0; k < ts.size(); ++k) {
        ss_res += std::pow(ls[k] - (icpt + slope * ts[k]), 2);
        ss_tot += std::pow(ls[k] - mean, 2);
      }
      rep.fitted_c = -slope;
      rep.fitted_C = std::exp(icpt);
      rep.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
      rep.fit_ok = rep.monotone && rep.fitted_c > 0.0;
    } else {
      rep.diagnostics.push_back("fewer than 3 TV values inside the fit window");
    }
    if (!rep.monotone) rep.diagnostics.push_back("fit rejected: TV sequence is not monotone beyond noise");
    reports.push_back(std::move(rep));
  }
  return reports;
}

DecayReport tv_decay_report(const AffineModel& model, const Vec& x, const std::vector<double>& t_grid,
                            const GridSpec& grid, const InversionSettings& settings, double window_lo,
                            double window_hi) {
  return tv_decay_reports(model, {x}, t_grid, grid, settings, window_lo, window_hi).front();
}

BoundFormCheck bound_form_check(const std::vector<DecayReport>& reports, double factor) {
  BoundFormCheck out;
  if (reports.empty()) return out;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  bool all_fit = true;
  for (const auto& r : reports) {
    const double v = r.fitted_C / r.x_factor;
    out.normalized.push_back(v);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    all_fit = all_fit && r.fit_ok;
  }
  out.ratio = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  out.ok = all_fit && out.ratio <= factor;
  return out;
}

namespace {

nlohmann::json mat_json(const Mat& a) {
  std::vector<std::vector<double>> rows(a.rows(), std::vector<double>(a.cols()));
  for (int r = 0; r < a.rows(); ++r) {
    for (int c = 0; c < a.cols(); ++c) rows[r][c] = a(r, c);
  }
  return rows;
}

nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

nlohmann::json to_json(const LyapunovData& lyap) {
  return {{"M_I", mat_json(lyap.M_I)},         {"M_J", mat_json(lyap.M_J)},
          {"epsilon", lyap.epsilon},           {"fitted_c", lyap.fitted_c},
          {"fitted_C", lyap.fitted_C},         {"residual_I", lyap.residual_I},
          {"residual_J", lyap.residual_J}};
}

nlohmann::json to_json(const DriftFit& fit) {
  nlohmann::json j{{"c", fit.c}, {"C", fit.C}, {"ok", fit.ok}, {"epsilon", fit.epsilon}};
  j["witness"] = fit.witness ? vec_json(*fit.witness) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const DobrushinReport& r) {
  return {{"h", r.h},
          {"M", r.M},
          {"delta", r.delta},
          {"max_tv", r.max_tv},
          {"worst_x", vec_json(r.worst_x)},
          {"worst_y", vec_json(r.worst_y)},
          {"pairs", r.pairs}};
}

nlohmann::json to_json(const DecayReport& r) {
  return {{"x", vec_json(r.x)},
          {"times", r.times},
          {"tv", r.tv},
          {"fitted_c", r.fitted_c},
          {"fitted_C", r.fitted_C},
          {"r_squared", r.r_squared},
          {"fit_points", r.fit_points},
          {"fit_ok", r.fit_ok},
          {"monotone", r.monotone},
          {"x_factor", r.x_factor},
          {"window", {r.window_lo, r.window_hi}},
          {"diagnostics", r.diagnostics}};
}

void write_csv(std::ostream& out, const DecayReport& r) {
  out << "t,tv,fit\n";
  out.precision(17);
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    out << r.times[k] << ',' << r.tv[k] << ',' << r.fitted_C * std::exp(-r.fitted_c * r.times[k]) << '\n';
  }
}

}  // namespace affine
