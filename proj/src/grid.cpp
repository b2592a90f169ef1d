#include "affine/grid.hpp"

#include <cmath>
#include <sstream>

#include "affine/errors.hpp"

namespace affine {

std::size_t GridSpec::size() const noexcept {
  std::size_t total = axes.empty() ? 0 : 1;
  for (const auto& a : axes) total *= static_cast<std::size_t>(a.count);
  return total;
}

std::vector<int> GridSpec::unflatten(std::size_t flat) const {
  std::vector<int> idx(axes.size());
  for (int k = dims() - 1; k >= 0; --k) {
    idx[k] = static_cast<int>(flat % axes[k].count);
    flat /= axes[k].count;
  }
  return idx;
}

Vec GridSpec::point(std::size_t flat) const {
  const auto idx = unflatten(flat);
  Vec y(dims());
  for (int k = 0; k < dims(); ++k) y(k) = axes[k].point(idx[k]);
  return y;
}

bool operator==(const GridSpec& a, const GridSpec& b) {
  if (a.axes.size() != b.axes.size()) return false;
  for (std::size_t k = 0; k < a.axes.size(); ++k) {
    if (a.axes[k].lo != b.axes[k].lo || a.axes[k].hi != b.axes[k].hi || a.axes[k].count != b.axes[k].count) {
      return false;
    }
  }
  return true;
}

GridSpec parse_grid(const std::string& spec) {
  GridSpec grid;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    Axis axis;
    char c1 = 0, c2 = 0;
    std::istringstream is(item);
    if (!(is >> axis.lo >> c1 >> axis.hi >> c2 >> axis.count) || c1 != ':' || c2 != ':' || !(is >> std::ws).eof()) {
      throw Error(ErrorKind::Usage, "grid spec", "cannot parse grid axis '" + item + "' (expected lo:hi:count)");
    }
    if (axis.count < 2 || !(axis.hi > axis.lo)) {
      throw Error(ErrorKind::Usage, "grid spec", "axis '" + item + "' needs count >= 2 and lo < hi");
    }
    grid.axes.push_back(axis);
  }
  if (grid.axes.empty()) throw Error(ErrorKind::Usage, "grid spec", "empty grid");
  return grid;
}

std::string to_string(const GridSpec& grid) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t k = 0; k < grid.axes.size(); ++k) {
    if (k) os << ',';
    os << grid.axes[k].lo << ':' << grid.axes[k].hi << ':' << grid.axes[k].count;
  }
  return os.str();
}

void check_grid(const GridSpec& grid, int m, int d) {
  if (grid.dims() != d) {
    throw Error(ErrorKind::Structural, "grid dimension", "grid has " + std::to_string(grid.dims()) + " axes, model has d = " +
                                                             std::to_string(d));
  }
  for (int k = 0; k < d; ++k) {
    const Axis& a = grid.axes[k];
    if (a.count < 2 || !(a.hi > a.lo)) throw Error(ErrorKind::Usage, "grid spec", "axis needs count >= 2 and lo < hi");
    if (k < m && a.lo < 0.0) throw Error(ErrorKind::Usage, "grid within D", "I-axis lower bound below 0");
  }
}

double trapezoid(const GridSpec& grid, const std::vector<double>& values) {
  double total = 0.0;
  const int d = grid.dims();
  for (std::size_t flat = 0; flat < values.size(); ++flat) {
    const auto idx = grid.unflatten(flat);
    double w = 1.0;
    for (int k = 0; k < d; ++k) {
      w *= grid.axes[k].step();
      if (idx[k] == 0 || idx[k] == grid.axes[k].count - 1) w *= 0.5;
    }
    total += w * values[flat];
  }
  return total;
}

}  // namespace affine
