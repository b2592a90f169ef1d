#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "affine/types.hpp"

namespace affine {

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  int count = 2;

  double step() const noexcept { return (hi - lo) / (count - 1); }
  double point(int k) const noexcept { return lo + k * step(); }
};

/// Uniform rectangular grid; flat indices are row-major with the last axis fastest.
struct GridSpec {
  std::vector<Axis> axes;

  int dims() const noexcept { return static_cast<int>(axes.size()); }
  std::size_t size() const noexcept;
  std::vector<int> unflatten(std::size_t flat) const;
  Vec point(std::size_t flat) const;

  friend bool operator==(const GridSpec& a, const GridSpec& b);
};

/// Parses "lo:hi:count[,lo:hi:count...]".
GridSpec parse_grid(const std::string& spec);
std::string to_string(const GridSpec& grid);

/// Throws unless counts >= 2, bounds ordered, and I-axes start at or above 0.
void check_grid(const GridSpec& grid, int m, int d);

/// Tensor trapezoid rule.
double trapezoid(const GridSpec& grid, const std::vector<double>& values);

}  // namespace affine
