#pragma once

#include <functional>
#include <span>
#include <vector>

#include "affine/grid.hpp"

namespace affine {

/**
 * Integrand source for Fourier inversion. Called once per frequency u; writes one value per request,
 * without the kernel e^{-i<y,u>} and without the (2 pi)^{-d} normalization.
 */
using SpectrumFn = std::function<void(const Vec& u, std::span<Complex> out)>;

struct LatticeAxis {
  double y_lo = 0.0;
  int n_out = 0;   ///< grid points returned on this axis
  int stride = 1;  ///< output grid step in units of the FFT step
  int n_fft = 0;
  double du = 0.0;
  int k_max = 0;   ///< frequencies k du with |k| <= k_max are evaluated
};

/**
 * Frequency lattice reciprocal to a y-grid: du = 2 pi / (count * dy), refined by an integer stride so
 * that k_max du covers the requested radius. The transform is a trapezoid rule on [-k_max du, k_max du]
 * with half weights at even-length endpoints, folded onto an FFT of length n_fft.
 */
class FrequencyLattice {
 public:
  FrequencyLattice(const GridSpec& grid, const std::vector<double>& radius, std::size_t max_points);

  const std::vector<LatticeAxis>& axes() const noexcept { return axes_; }
  /// Radius actually covered per axis; may fall short of the request when capped.
  std::vector<double> radius() const;
  bool capped() const noexcept { return capped_; }
  std::size_t evaluations() const noexcept;

  /// Grid values (complex) for each of the requests, flat row-major over the grid.
  std::vector<std::vector<Complex>> invert(int requests, const SpectrumFn& fn, unsigned threads = 0) const;

 private:
  GridSpec grid_;
  std::vector<LatticeAxis> axes_;
  bool capped_ = false;
};

/// Same contract as FrequencyLattice::invert using composite 16-point Gauss-Legendre panels on [-U, U]^d.
std::vector<std::vector<Complex>> quadrature_invert(const GridSpec& grid, const std::vector<double>& radius,
                                                    int requests, const SpectrumFn& fn, unsigned threads = 0);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int order, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace affine
