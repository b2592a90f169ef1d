#include "affine/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "affine/errors.hpp"
#include "affine/parallel.hpp"

namespace affine {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53, kM1 = 0xCD9E8D57;
constexpr std::uint32_t kW0 = 0x9E3779B9, kW1 = 0xBB67AE85;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

Mat psd_sqrt(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig{Eigen::MatrixXd(a)};
  const Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * ev.asDiagonal();
}

struct JumpSampler {
  double rate = 0.0;
  std::vector<Vec> points;
  std::discrete_distribution<std::size_t> pick;

  explicit JumpSampler(const JumpMeasure& mu) {
    std::vector<double> w;
    for (const auto& atom : mu.atoms()) {
      w.push_back(atom.mass);
      points.push_back(atom.point);
    }
    rate = mu.total_mass();
    if (!w.empty()) pick = std::discrete_distribution<std::size_t>(w.begin(), w.end());
  }
};

}  // namespace

Philox4x32::Philox4x32(std::uint64_t key, std::uint64_t stream)
    : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
      counter_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

Philox4x32::Block Philox4x32::bijection(Block c, std::array<std::uint32_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, c[0], hi0, lo0);
    mulhilo(kM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kW0;
    k[1] += kW1;
  }
  return c;
}

Philox4x32::result_type Philox4x32::operator()() {
  if (used_ == 4) {
    buffer_ = bijection(counter_, key_);
    if (++counter_[0] == 0) ++counter_[1];
    used_ = 0;
  }
  return buffer_[used_++];
}

PathEnsemble simulate_paths(const AffineModel& model, const SimConfig& cfg) {
  require_admissible(model);
  const int m = model.m, d = model.d();
  if (cfg.x0.size() != d) throw Error(ErrorKind::Structural, "dimension d = m + n", "x0 has wrong length");
  for (int i = 0; i < m; ++i) {
    if (cfg.x0(i) < 0.0) throw Error(ErrorKind::Usage, "x0 in D", "x0 has a negative I-coordinate");
  }
  if (!(cfg.t_end > 0.0) || !(cfg.dt > 0.0) || cfg.dt > cfg.t_end) {
    throw Error(ErrorKind::Usage, "0 < dt <= t_end", "invalid time discretization");
  }
  if (cfg.n_paths < 1) throw Error(ErrorKind::Usage, "n_paths >= 1", "need at least one path");

  PathEnsemble ens;
  ens.steps = static_cast<std::size_t>(std::ceil(cfg.t_end / cfg.dt - 1e-9));
  ens.h = cfg.t_end / static_cast<double>(ens.steps);
  const double h = ens.h;

  // Drift b + beta x with the generator's compensators folded in.
  Vec drift0 = model.b;
  for (const auto& atom : model.nu.atoms()) {
    if (atom.point.norm() <= 1.0) {
      for (int j = m; j < d; ++j) drift0(j) -= atom.mass * atom.point(j);
    }
  }
  Mat drift1 = model.beta;
  for (int i = 0; i < m; ++i) drift1.col(i) -= model.mu[i].first_moment(d);

  const Mat sa = psd_sqrt(2.0 * h * model.a);
  const bool has_a = model.a.cwiseAbs().maxCoeff() > 0.0;
  std::vector<Mat> salpha(m);
  for (int i = 0; i < m; ++i) salpha[i] = psd_sqrt(2.0 * h * model.alpha[i]);
  const JumpSampler nu_sampler(model.nu);
  std::vector<JumpSampler> mu_samplers;
  for (int i = 0; i < m; ++i) mu_samplers.emplace_back(model.mu[i]);

  ens.terminal.assign(cfg.n_paths, Vec::Zero(d));
  ens.nu_jumps.assign(cfg.n_paths, 0);
  ens.mu_jumps.assign(cfg.n_paths, 0);
  std::vector<std::size_t> clamps(cfg.n_paths, 0);

  parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t lo, std::size_t hi) {
    Vec z(d), x(d);
    for (std::size_t p = lo; p < hi; ++p) {
      Philox4x32 rng(cfg.seed, p);
      std::normal_distribution<double> normal;
      std::poisson_distribution<long> pois;
      JumpSampler nu_local = nu_sampler;
      std::vector<JumpSampler> mu_local = mu_samplers;
      x = cfg.x0;
      std::uint32_t nj = 0, mj = 0;
      std::size_t clamp_count = 0;
      for (std::size_t s = 0; s < ens.steps; ++s) {
        Vec next = x + h * (drift0 + drift1 * x);
        if (has_a) {
          for (int c = 0; c < d; ++c) z(c) = normal(rng);
          next += sa * z;
        }
        for (int i = 0; i < m; ++i) {
          const double xi = std::max(x(i), 0.0);
          if (xi > 0.0 && salpha[i].size() > 0) {
            for (int c = 0; c < d; ++c) z(c) = normal(rng);
            next += std::sqrt(xi) * (salpha[i] * z);
          }
        }
        if (nu_local.rate > 0.0) {
          const long k = pois(rng, std::poisson_distribution<long>::param_type(nu_local.rate * h));
          for (long j = 0; j < k; ++j) next += nu_local.points[nu_local.pick(rng)];
          nj += static_cast<std::uint32_t>(k);
        }
        for (int i = 0; i < m; ++i) {
          JumpSampler& js = mu_local[i];
          const double rate = js.rate * std::max(x(i), 0.0) * h;
          if (rate > 0.0) {
            const long k = pois(rng, std::poisson_distribution<long>::param_type(rate));
            for (long j = 0; j < k; ++j) next += js.points[js.pick(rng)];
            mj += static_cast<std::uint32_t>(k);
          }
        }
        bool clamped = false;
        for (int i = 0; i < m; ++i) {
          if (next(i) < 0.0) {
            next(i) = 0.0;
            clamped = true;
          }
        }
        clamp_count += clamped;
        x = next;
      }
      ens.terminal[p] = x;
      ens.nu_jumps[p] = nj;
      ens.mu_jumps[p] = mj;
      clamps[p] = clamp_count;
    }
  });
  for (std::size_t c : clamps) ens.clamped_steps += c;
  const double rate = static_cast<double>(ens.clamped_steps) / (static_cast<double>(ens.steps) * cfg.n_paths);
  if (rate > 0.5) {
    ens.warnings.push_back("stability: clamp rate " + std::to_string(rate) + " exceeds 50% of steps; reduce dt");
  }
  return ens;
}

EmpiricalCharfn empirical_charfn(const PathEnsemble& ens, const Vec& u) {
  const std::size_t N = ens.terminal.size();
  if (N == 0) throw Error(ErrorKind::Usage, "nonempty ensemble", "ensemble has no paths");
  std::vector<Complex> z(N);
  Complex sum = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    z[k] = std::polar(1.0, u.dot(ens.terminal[k]));
    sum += z[k];
  }
  EmpiricalCharfn out;
  out.value = sum / static_cast<double>(N);
  if (N > 1) {
    double ss = 0.0;
    for (const auto& v : z) ss += std::norm(v - out.value);
    out.std_error = std::sqrt(ss / static_cast<double>(N - 1) / static_cast<double>(N));
  }
  return out;
}

DensityComparison compare_density(const PathEnsemble& ens, const DensityField& f, int axis) {
  const int d = f.grid.dims();
  if (axis < 0 || axis >= d) throw Error(ErrorKind::Usage, "axis index", "marginal axis outside the grid");
  for (int v : f.meta.q) {
    if (v) throw Error(ErrorKind::Usage, "q = q~ = 0", "comparison needs a plain density");
  }
  for (int v : f.meta.qt) {
    if (v) throw Error(ErrorKind::Usage, "q = q~ = 0", "comparison needs a plain density");
  }
  const std::size_t N = ens.terminal.size();
  if (N == 0) throw Error(ErrorKind::Usage, "nonempty ensemble", "ensemble has no paths");
  const Axis& ax = f.grid.axes[axis];

  // Marginal along axis: trapezoid over the remaining coordinates.
  std::vector<double> marginal(ax.count, 0.0);
  for (std::size_t flat = 0; flat < f.values.size(); ++flat) {
    const auto idx = f.grid.unflatten(flat);
    double w = 1.0;
    for (int c = 0; c < d; ++c) {
      if (c == axis) continue;
      w *= f.grid.axes[c].step();
      if (idx[c] == 0 || idx[c] == f.grid.axes[c].count - 1) w *= 0.5;
    }
    marginal[idx[axis]] += w * f.values[flat];
  }
  std::vector<double> cdf(ax.count, 0.0);
  for (int k = 1; k < ax.count; ++k) cdf[k] = cdf[k - 1] + 0.5 * ax.step() * (marginal[k - 1] + marginal[k]);
  const double total = cdf.back();
  if (!(total > 0.0)) throw Error(ErrorKind::MassContract, "mass: |integral f - 1| <= 1e-3", "marginal has no mass");
  for (auto& c : cdf) c /= total;
  auto model_cdf = [&](double y) {
    if (y <= ax.lo) return 0.0;
    if (y >= ax.hi) return 1.0;
    const double s = (y - ax.lo) / ax.step();
    const int k = std::min(static_cast<int>(s), ax.count - 2);
    const double frac = s - k;
    return cdf[k] + frac * (cdf[k + 1] - cdf[k]);
  };

  std::vector<double> ys(N);
  std::size_t inside = 0;
  for (std::size_t k = 0; k < N; ++k) {
    ys[k] = ens.terminal[k](axis);
    inside += (ys[k] >= ax.lo && ys[k] <= ax.hi);
  }
  DensityComparison out;
  out.coverage = static_cast<double>(inside) / static_cast<double>(N);
  if (out.coverage < 0.999) {
    throw Error(ErrorKind::Coverage, "grid covers >= 99.9% of samples",
                "only " + std::to_string(out.coverage * 100.0) + "% of samples fall inside the grid");
  }
  std::sort(ys.begin(), ys.end());
  for (std::size_t k = 0; k < N; ++k) {
    const double F = model_cdf(ys[k]);
    out.ks = std::max(out.ks, std::max(static_cast<double>(k + 1) / N - F, F - static_cast<double>(k) / N));
  }
  const std::size_t cells = static_cast<std::size_t>(ax.count - 1);
  out.bins = std::max<std::size_t>(1, std::min(cells, static_cast<std::size_t>(std::ceil(2.0 * std::cbrt(double(N))))));
  const double width = (ax.hi - ax.lo) / static_cast<double>(out.bins);
  std::vector<std::size_t> counts(out.bins, 0);
  for (double y : ys) {
    if (y < ax.lo || y > ax.hi) continue;
    const std::size_t b = std::min(out.bins - 1, static_cast<std::size_t>((y - ax.lo) / width));
    ++counts[b];
  }
  for (std::size_t b = 0; b < out.bins; ++b) {
    const double p_model = model_cdf(ax.lo + (b + 1) * width) - model_cdf(ax.lo + b * width);
    out.histogram_l1 += std::abs(static_cast<double>(counts[b]) / N - p_model);
  }
  return out;
}

Vec ensemble_mean(const PathEnsemble& ens) {
  if (ens.terminal.empty()) throw Error(ErrorKind::Usage, "nonempty ensemble", "ensemble has no paths");
  Vec mean = Vec::Zero(ens.terminal.front().size());
  for (const auto& x : ens.terminal) mean += x;
  return mean / static_cast<double>(ens.terminal.size());
}

void write_csv(std::ostream& out, const PathEnsemble& ens) {
  const int d = ens.terminal.empty() ? 0 : static_cast<int>(ens.terminal.front().size());
  out << "path";
  for (int k = 0; k < d; ++k) out << ",x" << k + 1;
  out << ",nu_jumps,mu_jumps\n";
  out.precision(17);
  for (std::size_t p = 0; p < ens.terminal.size(); ++p) {
    out << p;
    for (int k = 0; k < d; ++k) out << ',' << ens.terminal[p](k);
    out << ',' << ens.nu_jumps[p] << ',' << ens.mu_jumps[p] << '\n';
  }
}

nlohmann::json summary_json(const PathEnsemble& ens) {
  const Vec mean = ensemble_mean(ens);
  const int d = static_cast<int>(mean.size());
  Mat cov = Mat::Zero(d, d);
  for (const auto& x : ens.terminal) cov += (x - mean) * (x - mean).transpose();
  if (ens.terminal.size() > 1) cov /= static_cast<double>(ens.terminal.size() - 1);
  std::vector<std::vector<double>> cov_rows(d, std::vector<double>(d));
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) cov_rows[r][c] = cov(r, c);
  }
  double nu_total = 0.0, mu_total = 0.0;
  for (auto v : ens.nu_jumps) nu_total += v;
  for (auto v : ens.mu_jumps) mu_total += v;
  const double N = static_cast<double>(ens.terminal.size());
  return {{"paths", ens.terminal.size()},
          {"steps", ens.steps},
          {"h", ens.h},
          {"mean", std::vector<double>(mean.data(), mean.data() + d)},
          {"covariance", cov_rows},
          {"mean_nu_jumps", nu_total / N},
          {"mean_mu_jumps", mu_total / N},
          {"clamp_rate", static_cast<double>(ens.clamped_steps) / (static_cast<double>(ens.steps) * N)},
          {"warnings", ens.warnings}};
}

}  // namespace affine
