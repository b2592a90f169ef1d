#include "affine/spectral.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "affine/errors.hpp"

namespace affine {

namespace {

void require_in_D(const AffineModel& model, const Vec& x) {
  if (x.size() != model.d()) throw Error(ErrorKind::Structural, "dimension d = m + n", "state has wrong length");
  for (int i = 0; i < model.m; ++i) {
    if (x(i) < 0.0) throw Error(ErrorKind::Usage, "x in D", "state has a negative I-coordinate");
  }
}

Mat block_jj(const Mat& a, int m, int n) { return a.block(m, m, n, n); }

// Acklam's rational approximation, refined by one Halley step.
double inverse_normal_cdf(double p) {
  static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                           1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                           6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                           -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                           3.754408661907416e+00};
  double x;
  if (p < 0.02425) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - 0.02425) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2 * M_PI) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

double halton(std::size_t index, int base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

// Plain Nelder-Mead on R^k.
template <class Fn>
Vec nelder_mead(Fn&& f, Vec x0, double step, int max_iter) {
  const int k = static_cast<int>(x0.size());
  std::vector<Vec> pts(k + 1, x0);
  std::vector<double> val(k + 1);
  for (int j = 0; j < k; ++j) pts[j + 1](j) += step;
  for (int j = 0; j <= k; ++j) val[j] = f(pts[j]);
  std::vector<int> order(k + 1);
  for (int it = 0; it < max_iter; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int p, int q) { return val[p] < val[q]; });
    const int best = order.front(), worst = order.back(), second = order[k - 1];
    if (std::abs(val[worst] - val[best]) < 1e-15) break;
    Vec centroid = Vec::Zero(k);
    for (int j = 0; j < k; ++j) centroid += pts[order[j]];
    centroid /= k;
    const Vec xr = centroid + (centroid - pts[worst]);
    const double fr = f(xr);
    if (fr < val[best]) {
      const Vec xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = f(xe);
      if (fe < fr) {
        pts[worst] = xe;
        val[worst] = fe;
      } else {
        pts[worst] = xr;
        val[worst] = fr;
      }
    } else if (fr < val[second]) {
      pts[worst] = xr;
      val[worst] = fr;
    } else {
      const Vec xc = centroid + 0.5 * (pts[worst] - centroid);
      const double fc = f(xc);
      if (fc < val[worst]) {
        pts[worst] = xc;
        val[worst] = fc;
      } else {
        for (int j = 1; j <= k; ++j) {
          pts[order[j]] = pts[best] + 0.5 * (pts[order[j]] - pts[best]);
          val[order[j]] = f(pts[order[j]]);
        }
      }
    }
  }
  const int best = static_cast<int>(std::min_element(val.begin(), val.end()) - val.begin());
  return pts[best];
}

}  // namespace

Complex charfn(const RiccatiFlow& flow, double t, const Vec& x, const Vec& u, const SolverSettings& settings) {
  const AffineModel& model = flow.model();
  require_in_D(model, x);
  if (u.size() != model.d()) throw Error(ErrorKind::Structural, "dimension d = m + n", "frequency has wrong length");
  if (t < 0.0) throw Error(ErrorKind::Usage, "t >= 0", "negative time");
  const CVec iu = u.cast<Complex>() * Complex(0.0, 1.0);
  const FlowPoint p = flow.at(iu, t, settings);
  Complex z = p.phi;
  for (int k = 0; k < model.d(); ++k) z += x(k) * p.psi(k);
  return std::exp(z);
}

Complex charfn(const AffineModel& model, double t, const Vec& x, const Vec& u, const SolverSettings& settings) {
  return charfn(RiccatiFlow(model), t, x, u, settings);
}

KalmanResult kalman_rank(const AffineModel& model) {
  check_structure(model);
  const int m = model.m, n = model.n;
  if (n < 1) throw Error(ErrorKind::Structural, "n >= 1", "no J-block");
  const Eigen::MatrixXd a = block_jj(model.a, m, n);
  const Eigen::MatrixXd b = block_jj(model.beta, m, n);
  KalmanResult out;
  out.matrix.resize(n, n * n);
  Eigen::MatrixXd block = a;
  for (int k = 0; k < n; ++k) {
    out.matrix.middleCols(k * n, n) = block;
    block = b * block;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.matrix);
  out.singular_values = svd.singularValues();
  const double smax = out.singular_values.size() ? out.singular_values(0) : 0.0;
  for (int k = 0; k < out.singular_values.size(); ++k) {
    if (smax > 0.0 && out.singular_values(k) > 1e-10 * smax) ++out.rank;
  }
  out.full = out.rank == n;
  return out;
}

GramianResult gramian_delta(const AffineModel& model, double t0) {
  check_structure(model);
  const int m = model.m, n = model.n;
  if (n < 1) throw Error(ErrorKind::Structural, "n >= 1", "no J-block");
  if (!(t0 > 0.0)) throw Error(ErrorKind::Usage, "t0 > 0", "Gramian horizon must be positive");
  const Eigen::MatrixXd a = block_jj(model.a, m, n);
  const Eigen::MatrixXd b = block_jj(model.beta, m, n);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  h.topLeftCorner(n, n) = -b;
  h.topRightCorner(n, n) = a;
  h.bottomRightCorner(n, n) = b.transpose();
  const Eigen::MatrixXd e = (h * t0).exp();
  Eigen::MatrixXd g = e.bottomRightCorner(n, n).transpose() * e.topRightCorner(n, n);
  g = 0.5 * (g + g.transpose()).eval();
  GramianResult out;
  out.gramian = g;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues()(0);
  const double lmax = eig.eigenvalues()(n - 1);
  out.delta_t0 = (lmax > 0.0 && lmin > 1e-10 * lmax) ? lmin : 0.0;
  return out;
}

TailParams tail_params(const AffineModel& model, double theta) {
  check_structure(model);
  const int m = model.m, d = model.d();
  if (m < 1) throw Error(ErrorKind::Structural, "m >= 1", "tail parameters need an I-block");
  if (!(theta > 0.0)) throw Error(ErrorKind::Usage, "theta > 0", "truncation level must be positive");
  TailParams out;
  out.theta = theta;
  out.alpha_hat.resize(m);
  out.beta_hat.resize(m);
  double lambda = std::numeric_limits<double>::infinity();
  double ratio = std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i) {
    const double aii = model.alpha[i](i, i);
    if (!(aii > 0.0)) {
      throw Error(ErrorKind::Regularity, "min_i alpha_{i,ii} > 0",
                  "alpha_" + std::to_string(i + 1) + "," + std::to_string(i + 1) + std::to_string(i + 1) + " = 0");
    }
    double ah = aii;
    double bh = model.beta(i, i);
    for (const auto& atom : model.mu[i].atoms()) {
      const double r = atom.point.head(d).norm();
      if (r <= theta) {
        ah += atom.mass * r * r;
      } else {
        bh -= 2.0 * atom.mass * atom.point(i);
      }
    }
    out.alpha_hat(i) = ah;
    out.beta_hat(i) = bh;
    lambda = std::min(lambda, model.b(i) / ah);
    ratio = std::min(ratio, model.b(i) / aii);
  }
  out.lambda = lambda;
  const double r = ratio - m;
  if (r > 0.0) out.p_max = static_cast<int>(std::ceil(r)) - 1;
  return out;
}

std::optional<int> max_regularity_order(const AffineModel& model) {
  if (model.m == 0) return kUnboundedOrder;
  for (int i = 0; i < model.m; ++i) {
    if (!(model.alpha[i](i, i) > 0.0)) return std::nullopt;
  }
  return tail_params(model, 1.0).p_max;
}

ConeResult cone_epsilon(const AffineModel& model, double t0, int sphere_samples) {
  check_structure(model);
  const int m = model.m, n = model.n, d = model.d();
  if (sphere_samples < 1) throw Error(ErrorKind::Usage, "sphere_samples >= 1", "need at least one sample");
  Mat g;
  if (n > 0) g = gramian_delta(model, t0).gramian;

  ConeResult out;
  if (m == 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig{Eigen::MatrixXd(g)};
    out.epsilon = eig.eigenvalues()(0);
    out.argmin = eig.eigenvectors().col(0);
  } else {
    auto objective = [&](const Vec& v) {
      const double r = v.norm();
      if (!(r > 0.0)) return std::numeric_limits<double>::infinity();
      const Vec u = v / r;
      double best = n > 0 ? u.tail(n).dot(g * u.tail(n)) : -std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i) best = std::max(best, u.dot(model.alpha[i] * u));
      return best;
    };
    std::vector<Vec> points;
    if (d == 1) {
      points.push_back(Vec::Ones(1));
    } else if (d == 2) {
      for (int k = 0; k < sphere_samples; ++k) {
        const double th = M_PI * k / sphere_samples;
        Vec u(2);
        u << std::cos(th), std::sin(th);
        points.push_back(u);
      }
    } else {
      static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19};
      for (int k = 0; k < sphere_samples; ++k) {
        Vec u(d);
        for (int c = 0; c < d; ++c) u(c) = inverse_normal_cdf(halton(static_cast<std::size_t>(k) + 1, primes[c]));
        points.push_back(u / u.norm());
      }
    }
    std::vector<double> values(points.size());
    for (std::size_t k = 0; k < points.size(); ++k) values[k] = objective(points[k]);
    std::vector<std::size_t> idx(points.size());
    std::iota(idx.begin(), idx.end(), 0);
    const std::size_t starts = std::min<std::size_t>(5, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + starts, idx.end(),
                      [&](std::size_t p, std::size_t q) { return values[p] < values[q]; });
    out.epsilon = values[idx[0]];
    out.argmin = points[idx[0]];
    if (d > 1) {
      for (std::size_t s = 0; s < starts; ++s) {
        const Vec v = nelder_mead(objective, points[idx[s]], 0.5 * M_PI / sphere_samples + 1e-3, 400 * d);
        const double fv = objective(v);
        if (fv < out.epsilon) {
          out.epsilon = fv;
          out.argmin = v / v.norm();
        }
      }
    }
  }
  if (!(out.epsilon > 1e-12)) {
    out.epsilon = 0.0;
    out.degenerate = true;
  }
  return out;
}

double envelope_excess(const TailBoundCert& cert, int m, const Vec& u, double re_phi) {
  const int n = static_cast<int>(u.size()) - m;
  double e = re_phi;
  if (m > 0) e += cert.lambda * std::log1p(u.head(m).norm());
  if (n > 0) e += cert.delta * u.tail(n).squaredNorm();
  return e;
}

TailBoundCert tail_bound_check(const AffineModel& model, double t0, double theta, std::span<const double> t_samples,
                               std::span<const Vec> u_samples, const SolverSettings& settings) {
  require_admissible(model);
  const int m = model.m, n = model.n, d = model.d();
  if (!(t0 > 0.0)) throw Error(ErrorKind::Usage, "t0 > 0", "reference time must be positive");
  if (t_samples.empty() || u_samples.empty()) throw Error(ErrorKind::Usage, "samples", "need time and frequency samples");
  std::vector<double> times(t_samples.begin(), t_samples.end());
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  if (times.front() < t0) throw Error(ErrorKind::Usage, "t >= t0", "time samples must not precede t0");

  TailBoundCert cert;
  cert.m = m;
  cert.n = n;
  cert.theta = theta;
  cert.t0 = t0;
  if (n > 0) {
    const KalmanResult k = kalman_rank(model);
    cert.kalman_rank = k.rank;
    cert.kalman_full = k.full;
    if (!k.full) throw Error(ErrorKind::Regularity, "Kalman rank condition", "K has rank " + std::to_string(k.rank));
    cert.delta_t0 = gramian_delta(model, t0).delta_t0;
  } else {
    cert.kalman_full = true;
  }
  if (m > 0) {
    const TailParams p = tail_params(model, theta);
    cert.alpha_hat = p.alpha_hat;
    cert.beta_hat = p.beta_hat;
    cert.lambda = p.lambda;
    cert.p_max = p.p_max;
  } else {
    cert.p_max = kUnboundedOrder;
  }
  if (n > 0) {
    cert.epsilon_t0 = cone_epsilon(model, t0).epsilon;
    cert.delta = std::min(cert.delta_t0, cert.epsilon_t0);
  }

  const RiccatiFlow flow(model);
  struct Sample {
    double radius;
    double excess;
    std::size_t index;
  };
  std::vector<Sample> rows;
  rows.reserve(u_samples.size());
  for (std::size_t s = 0; s < u_samples.size(); ++s) {
    const Vec& u = u_samples[s];
    if (u.size() != d) throw Error(ErrorKind::Structural, "dimension d = m + n", "frequency sample has wrong length");
    const CVec iu = u.cast<Complex>() * Complex(0.0, 1.0);
    double worst = -std::numeric_limits<double>::infinity();
    flow.integrate(iu, times, settings, [&](std::size_t, double, const CVec&, Complex phi) {
      worst = std::max(worst, envelope_excess(cert, m, u, phi.real()));
    });
    rows.push_back({u.norm(), worst, s});
  }
  std::sort(rows.begin(), rows.end(), [](const Sample& p, const Sample& q) {
    return p.radius < q.radius || (p.radius == q.radius && p.index < q.index);
  });
  const std::size_t N = rows.size();
  const std::size_t half = N / 2;
  double log_c = -std::numeric_limits<double>::infinity();
  for (const auto& row : rows) log_c = std::max(log_c, row.excess);
  cert.fitted_C = std::exp(log_c);
  cert.fitted_M = rows.front().radius;
  cert.min_margin = std::numeric_limits<double>::infinity();
  for (const auto& row : rows) cert.min_margin = std::min(cert.min_margin, log_c - row.excess);
  cert.samples = N;

  const std::size_t q3 = half + (N - half) / 2;
  double max3 = -std::numeric_limits<double>::infinity(), max4 = max3;
  std::size_t arg4 = N - 1;
  for (std::size_t k = half; k < q3; ++k) max3 = std::max(max3, rows[k].excess);
  for (std::size_t k = q3; k < N; ++k) {
    if (rows[k].excess > max4) {
      max4 = rows[k].excess;
      arg4 = k;
    }
  }
  if (q3 == half) max3 = max4;
  const double allowance = 0.1 * (std::log1p(rows.back().radius) - std::log1p(rows[half].radius)) + 1e-9;
  cert.verified = std::isfinite(log_c) && max4 <= max3 + allowance;
  if (!cert.verified) cert.witness = u_samples[rows[arg4].index];
  return cert;
}

std::vector<Vec> frequency_samples(int d, std::size_t count, double r_lo, double r_hi, std::uint64_t seed) {
  if (d < 1 || !(r_lo > 0.0) || !(r_hi >= r_lo)) {
    throw Error(ErrorKind::Usage, "0 < r_lo <= r_hi", "invalid frequency sampling range");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(std::log(r_lo), std::log(r_hi));
  std::normal_distribution<double> normal;
  std::vector<Vec> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Vec v(d);
    do {
      for (int c = 0; c < d; ++c) v(c) = normal(rng);
    } while (v.norm() == 0.0);
    out.push_back(v / v.norm() * std::exp(unif(rng)));
  }
  return out;
}

namespace {

nlohmann::json vec_json(const Vec& v) {
  std::vector<double> out(v.data(), v.data() + v.size());
  return out;
}

nlohmann::json order_json(const std::optional<int>& p) {
  if (!p) return nullptr;
  if (*p == kUnboundedOrder) return "unbounded";
  return *p;
}

}  // namespace

nlohmann::json to_json(const TailParams& params) {
  return {{"theta", params.theta},
          {"alpha_hat", vec_json(params.alpha_hat)},
          {"beta_hat", vec_json(params.beta_hat)},
          {"lambda", params.lambda},
          {"p_max", order_json(params.p_max)}};
}

nlohmann::json to_json(const TailBoundCert& cert) {
  nlohmann::json j{{"m", cert.m},
                   {"n", cert.n},
                   {"theta", cert.theta},
                   {"alpha_hat", vec_json(cert.alpha_hat)},
                   {"beta_hat", vec_json(cert.beta_hat)},
                   {"lambda", cert.lambda},
                   {"p_max", order_json(cert.p_max)},
                   {"t0", cert.t0},
                   {"delta_t0", cert.delta_t0},
                   {"epsilon_t0", cert.epsilon_t0},
                   {"delta", cert.delta},
                   {"kalman_rank", cert.kalman_rank},
                   {"kalman_full", cert.kalman_full},
                   {"fitted_C", cert.fitted_C},
                   {"fitted_M", cert.fitted_M},
                   {"min_margin", cert.min_margin},
                   {"samples", cert.samples},
                   {"verified", cert.verified}};
  j["witness"] = cert.witness ? vec_json(*cert.witness) : nlohmann::json(nullptr);
  return j;
}

}  // namespace affine
