#pragma once

#include <complex>

#include <Eigen/Dense>

namespace affine {

/// Largest state dimension d = m + n supported by the fixed-capacity vector types.
inline constexpr int kMaxDim = 8;

using Complex = std::complex<double>;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using CVec = Eigen::Matrix<Complex, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

}  // namespace affine
