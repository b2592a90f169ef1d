#include "affine/lattice.hpp"

#include <cmath>

#include <fftw3.h>

#include "affine/errors.hpp"
#include "affine/parallel.hpp"

namespace affine {

FrequencyLattice::FrequencyLattice(const GridSpec& grid, const std::vector<double>& radius, std::size_t max_points)
    : grid_(grid) {
  const int d = grid.dims();
  if (static_cast<int>(radius.size()) != d) {
    throw Error(ErrorKind::Structural, "dimension d = m + n", "one truncation radius per grid axis required");
  }
  for (int k = 0; k < d; ++k) {
    const Axis& a = grid.axes[k];
    LatticeAxis ax;
    ax.y_lo = a.lo;
    ax.n_out = a.count;
    ax.du = 2.0 * M_PI / (a.count * a.step());
    // smallest stride with floor(stride * count / 2) * du >= radius
    ax.stride = 1;
    while (std::floor(ax.stride * a.count / 2.0) * ax.du < radius[k]) ++ax.stride;
    axes_.push_back(ax);
  }
  auto total = [&] {
    std::size_t p = 1;
    for (const auto& ax : axes_) p *= static_cast<std::size_t>(ax.stride) * ax.n_out;
    return p;
  };
  while (total() > max_points) {
    LatticeAxis* widest = nullptr;
    for (auto& ax : axes_) {
      if (ax.stride > 1 && (!widest || ax.stride > widest->stride)) widest = &ax;
    }
    if (!widest) break;
    --widest->stride;
    capped_ = true;
  }
  for (auto& ax : axes_) {
    ax.n_fft = ax.stride * ax.n_out;
    ax.k_max = ax.n_fft / 2;
  }
}

std::vector<double> FrequencyLattice::radius() const {
  std::vector<double> out;
  for (const auto& ax : axes_) out.push_back(ax.k_max * ax.du);
  return out;
}

std::size_t FrequencyLattice::evaluations() const noexcept {
  std::size_t p = 1;
  for (const auto& ax : axes_) p *= static_cast<std::size_t>(2 * ax.k_max + 1);
  return p;
}

std::vector<std::vector<Complex>> FrequencyLattice::invert(int requests, const SpectrumFn& fn, unsigned threads) const {
  const int d = static_cast<int>(axes_.size());
  const std::size_t evals = evaluations();
  std::vector<Complex> values(evals * requests);

  auto index_of = [&](std::size_t e, std::vector<int>& k) {
    for (int c = d - 1; c >= 0; --c) {
      const std::size_t len = 2 * axes_[c].k_max + 1;
      k[c] = static_cast<int>(e % len) - axes_[c].k_max;
      e /= len;
    }
  };
  parallel_for(evals, threads, [&](std::size_t lo, std::size_t hi) {
    std::vector<int> k(d);
    Vec u(d);
    for (std::size_t e = lo; e < hi; ++e) {
      index_of(e, k);
      for (int c = 0; c < d; ++c) u(c) = k[c] * axes_[c].du;
      fn(u, std::span<Complex>(values.data() + e * requests, requests));
    }
  });

  std::size_t fft_size = 1;
  std::vector<int> dims(d);
  for (int c = 0; c < d; ++c) {
    dims[c] = axes_[c].n_fft;
    fft_size *= axes_[c].n_fft;
  }
  double scale = 1.0;
  for (const auto& ax : axes_) scale *= ax.du / (2.0 * M_PI);

  std::vector<Complex> spectrum(fft_size);
  auto* buf = reinterpret_cast<fftw_complex*>(spectrum.data());
  fftw_plan plan = fftw_plan_dft(d, dims.data(), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);

  std::vector<std::vector<Complex>> out(requests, std::vector<Complex>(grid_.size()));
  std::vector<int> k(d);
  for (int r = 0; r < requests; ++r) {
    std::fill(spectrum.begin(), spectrum.end(), Complex(0.0));
    for (std::size_t e = 0; e < evals; ++e) {
      index_of(e, k);
      double w = 1.0;
      double phase = 0.0;
      std::size_t flat = 0;
      for (int c = 0; c < d; ++c) {
        const auto& ax = axes_[c];
        if (ax.n_fft % 2 == 0 && std::abs(k[c]) == ax.k_max) w *= 0.5;
        phase -= ax.y_lo * k[c] * ax.du;
        const int wrapped = ((k[c] % ax.n_fft) + ax.n_fft) % ax.n_fft;
        flat = flat * ax.n_fft + wrapped;
      }
      spectrum[flat] += w * std::polar(1.0, phase) * values[e * requests + r];
    }
    fftw_execute(plan);
    for (std::size_t g = 0; g < grid_.size(); ++g) {
      const auto idx = grid_.unflatten(g);
      std::size_t flat = 0;
      for (int c = 0; c < d; ++c) flat = flat * axes_[c].n_fft + static_cast<std::size_t>(idx[c]) * axes_[c].stride;
      out[r][g] = scale * spectrum[flat];
    }
  }
  fftw_destroy_plan(plan);
  return out;
}

void gauss_legendre(int order, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(order, 0.0);
  weights.assign(order, 0.0);
  for (int i = 0; i < order; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    nodes[i] = x;
    weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

std::vector<std::vector<Complex>> quadrature_invert(const GridSpec& grid, const std::vector<double>& radius,
                                                    int requests, const SpectrumFn& fn, unsigned threads) {
  const int d = grid.dims();
  if (static_cast<int>(radius.size()) != d) {
    throw Error(ErrorKind::Structural, "dimension d = m + n", "one truncation radius per grid axis required");
  }
  std::vector<double> gx, gw;
  gauss_legendre(16, gx, gw);

  std::vector<std::vector<double>> nodes(d), weights(d);
  for (int c = 0; c < d; ++c) {
    const Axis& a = grid.axes[c];
    const double ymax = std::max(std::abs(a.lo), std::abs(a.hi));
    const double h_target = std::min(1.0, 2.0 * M_PI / (ymax + 1.0));
    const double U = radius[c];
    const int panels = std::max(1, static_cast<int>(std::ceil(2.0 * U / h_target)));
    const double h = 2.0 * U / panels;
    for (int p = 0; p < panels; ++p) {
      const double mid = -U + (p + 0.5) * h;
      for (int q = 0; q < 16; ++q) {
        nodes[c].push_back(mid + 0.5 * h * gx[q]);
        weights[c].push_back(0.5 * h * gw[q]);
      }
    }
  }
  std::size_t evals = 1;
  for (int c = 0; c < d; ++c) evals *= nodes[c].size();
  std::vector<Complex> values(evals * requests);
  parallel_for(evals, threads, [&](std::size_t lo, std::size_t hi) {
    Vec u(d);
    for (std::size_t e = lo; e < hi; ++e) {
      std::size_t rest = e;
      for (int c = d - 1; c >= 0; --c) {
        u(c) = nodes[c][rest % nodes[c].size()];
        rest /= nodes[c].size();
      }
      fn(u, std::span<Complex>(values.data() + e * requests, requests));
    }
  });

  // kernel[c](j, l) = w_l exp(-i y_j u_l)
  std::vector<std::vector<Complex>> kernel(d);
  for (int c = 0; c < d; ++c) {
    const Axis& a = grid.axes[c];
    const std::size_t L = nodes[c].size();
    kernel[c].resize(static_cast<std::size_t>(a.count) * L);
    for (int j = 0; j < a.count; ++j) {
      const double y = a.point(j);
      for (std::size_t l = 0; l < L; ++l) kernel[c][j * L + l] = weights[c][l] * std::polar(1.0, -y * nodes[c][l]);
    }
  }
  const double norm = std::pow(2.0 * M_PI, -d);
  std::vector<std::vector<Complex>> out(requests);
  for (int r = 0; r < requests; ++r) {
    std::vector<std::size_t> shape(d);
    for (int c = 0; c < d; ++c) shape[c] = nodes[c].size();
    std::vector<Complex> cur(evals);
    for (std::size_t e = 0; e < evals; ++e) cur[e] = values[e * requests + r];
    for (int c = d - 1; c >= 0; --c) {
      std::size_t outer = 1, inner = 1;
      for (int q = 0; q < c; ++q) outer *= shape[q];
      for (int q = c + 1; q < d; ++q) inner *= shape[q];
      const std::size_t L = shape[c];
      const std::size_t J = grid.axes[c].count;
      std::vector<Complex> next(outer * J * inner, Complex(0.0));
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t j = 0; j < J; ++j) {
          const Complex* ker = kernel[c].data() + j * L;
          Complex* dst = next.data() + (o * J + j) * inner;
          for (std::size_t l = 0; l < L; ++l) {
            const Complex kv = ker[l];
            const Complex* src = cur.data() + (o * L + l) * inner;
            for (std::size_t i = 0; i < inner; ++i) dst[i] += kv * src[i];
          }
        }
      }
      cur.swap(next);
      shape[c] = J;
    }
    for (auto& v : cur) v *= norm;
    out[r] = std::move(cur);
  }
  return out;
}

}  // namespace affine
