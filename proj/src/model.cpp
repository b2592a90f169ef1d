#include "affine/model.hpp"

#include <cmath>
#include <sstream>

#include "affine/errors.hpp"

namespace affine {

JumpMeasure::JumpMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {}

double JumpMeasure::total_mass() const noexcept {
  double total = 0.0;
  for (const auto& atom : atoms_) total += atom.mass;
  return total;
}

Vec JumpMeasure::first_moment(int d) const {
  Vec moment = Vec::Zero(d);
  for (const auto& atom : atoms_) moment += atom.mass * atom.point;
  return moment;
}

Vec JumpMeasure::truncated_moment(int d, double radius) const {
  Vec moment = Vec::Zero(d);
  for (const auto& atom : atoms_) {
    if (atom.point.norm() <= radius) moment += atom.mass * atom.point;
  }
  return moment;
}

JumpMeasure JumpMeasure::merged(const JumpMeasure& other) const {
  std::vector<Atom> atoms = atoms_;
  atoms.insert(atoms.end(), other.atoms_.begin(), other.atoms_.end());
  return JumpMeasure(std::move(atoms));
}

namespace {

void require_shape(const Mat& matrix, int rows, int cols, const std::string& field) {
  if (matrix.rows() != rows || matrix.cols() != cols) {
    std::ostringstream os;
    os << "field '" << field << "' has shape " << matrix.rows() << "x" << matrix.cols() << ", expected " << rows
       << "x" << cols;
    throw Error(ErrorKind::Structural, "dimension d = m + n", os.str());
  }
  if (!matrix.allFinite()) throw Error(ErrorKind::Structural, "finite parameters", "field '" + field + "' is not finite");
}

void require_measure_shape(const JumpMeasure& measure, int d, const std::string& field) {
  for (std::size_t k = 0; k < measure.atoms().size(); ++k) {
    const auto& atom = measure.atoms()[k];
    if (atom.point.size() != d) {
      std::ostringstream os;
      os << "atom " << k << " of '" << field << "' has dimension " << atom.point.size() << ", expected " << d;
      throw Error(ErrorKind::Structural, "dimension d = m + n", os.str());
    }
    if (!std::isfinite(atom.mass) || !atom.point.allFinite()) {
      throw Error(ErrorKind::Structural, "finite parameters", "atom of '" + field + "' is not finite");
    }
  }
}

double spectral_radius_sym(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(Eigen::MatrixXd(0.5 * (a + a.transpose())),
                                                         Eigen::EigenvaluesOnly);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_psd(const Mat& a) {
  if (a.size() == 0) return true;
  return min_eigenvalue(a) >= -kPsdRelTol * (1.0 + spectral_radius_sym(a));
}

bool is_symmetric(const Mat& a) { return (a - a.transpose()).cwiseAbs().maxCoeff() <= kEqualityTol; }

void check_measure(const JumpMeasure& measure, int m, const std::string& label, const std::string& name,
                   std::vector<int> base_index, ValidationReport& report) {
  for (std::size_t k = 0; k < measure.atoms().size(); ++k) {
    const auto& atom = measure.atoms()[k];
    auto indices = base_index;
    indices.push_back(static_cast<int>(k));
    if (!(atom.mass > 0.0)) {
      report.violations.push_back({label, name + " atom " + std::to_string(k) + " has nonpositive mass", indices});
    }
    if (atom.point.norm() == 0.0) {
      report.violations.push_back({label, name + " atom " + std::to_string(k) + " sits at the origin", indices});
    }
    for (int i = 0; i < m; ++i) {
      if (atom.point(i) < 0.0) {
        report.violations.push_back(
            {label, name + " atom " + std::to_string(k) + " lies outside D (negative I-coordinate)", indices});
        break;
      }
    }
  }
}

}  // namespace

double min_eigenvalue(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(Eigen::MatrixXd(0.5 * (a + a.transpose())),
                                                         Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

void check_structure(const AffineModel& model) {
  if (model.m < 0 || model.n < 0 || model.d() < 1) {
    throw Error(ErrorKind::Structural, "dimension d = m + n", "need m, n >= 0 and m + n >= 1");
  }
  const int d = model.d();
  if (d > kMaxDim) {
    throw Error(ErrorKind::Structural, "dimension d = m + n",
                "dimension " + std::to_string(d) + " exceeds supported maximum " + std::to_string(kMaxDim));
  }
  require_shape(model.a, d, d, "a");
  if (static_cast<int>(model.alpha.size()) != model.m) {
    throw Error(ErrorKind::Structural, "dimension d = m + n",
                "field 'alpha' has " + std::to_string(model.alpha.size()) + " matrices, expected m = " +
                    std::to_string(model.m));
  }
  for (int i = 0; i < model.m; ++i) require_shape(model.alpha[i], d, d, "alpha[" + std::to_string(i) + "]");
  if (model.b.size() != d || !model.b.allFinite()) {
    throw Error(ErrorKind::Structural, "dimension d = m + n",
                "field 'b' has length " + std::to_string(model.b.size()) + ", expected " + std::to_string(d));
  }
  require_shape(model.beta, d, d, "beta");
  if (static_cast<int>(model.mu.size()) != model.m) {
    throw Error(ErrorKind::Structural, "dimension d = m + n",
                "field 'mu' has " + std::to_string(model.mu.size()) + " measures, expected m = " +
                    std::to_string(model.m));
  }
  require_measure_shape(model.nu, d, "nu");
  for (int i = 0; i < model.m; ++i) require_measure_shape(model.mu[i], d, "mu[" + std::to_string(i) + "]");
}

ValidationReport validate(const AffineModel& model) {
  check_structure(model);
  ValidationReport report;
  const int m = model.m;
  const int d = model.d();

  // (i)
  if (!is_symmetric(model.a)) report.violations.push_back({"i", "a is not symmetric", {}});
  if (!is_psd(model.a)) report.violations.push_back({"i", "a is not positive semidefinite", {}});
  for (int k = 0; k < d; ++k) {
    for (int l = 0; l < d; ++l) {
      if ((k < m || l < m) && std::abs(model.a(k, l)) > kEqualityTol) {
        report.violations.push_back({"i", "a has a nonzero entry in an I row or column", {k, l}});
      }
    }
  }

  // (ii)
  for (int i = 0; i < m; ++i) {
    const Mat& alpha = model.alpha[i];
    const std::string name = "alpha[" + std::to_string(i) + "]";
    if (!is_symmetric(alpha)) report.violations.push_back({"ii", name + " is not symmetric", {i}});
    if (!is_psd(alpha)) report.violations.push_back({"ii", name + " is not positive semidefinite", {i}});
    for (int k = 0; k < d; ++k) {
      for (int l = 0; l < d; ++l) {
        const bool k_forbidden = k < m && k != i;
        const bool l_forbidden = l < m && l != i;
        if ((k_forbidden || l_forbidden) && std::abs(alpha(k, l)) > kEqualityTol) {
          report.violations.push_back({"ii", name + " has a nonzero entry in an I\\{i} row or column", {i, k, l}});
        }
      }
    }
  }

  // (iii), (iv)
  check_measure(model.nu, m, "iii", "nu", {}, report);
  for (int i = 0; i < m; ++i) check_measure(model.mu[i], m, "iv", "mu[" + std::to_string(i) + "]", {i}, report);

  // (v)
  for (int i = 0; i < m; ++i) {
    if (model.b(i) < 0.0) report.violations.push_back({"v", "b has a negative I-component", {i}});
  }

  // (vi)
  for (int i = 0; i < m; ++i) {
    for (int j = m; j < d; ++j) {
      if (std::abs(model.beta(i, j)) > kEqualityTol) {
        report.violations.push_back({"vi", "beta_IJ is not zero", {i, j}});
      }
    }
  }
  for (int i = 0; i < m; ++i) {
    const Vec moment = model.mu[i].first_moment(d);
    for (int k = 0; k < m; ++k) {
      if (k == i) continue;
      const double compensated = model.beta(k, i) - moment(k);
      if (compensated < -kEqualityTol) {
        std::ostringstream os;
        os << "beta_" << k << i << " - int xi_" << k << " mu_" << i << "(dxi) = " << compensated << " < 0";
        report.violations.push_back({"vi", os.str(), {k, i}});
      }
    }
  }

  report.ok = report.violations.empty();
  return report;
}

void require_admissible(const AffineModel& model) {
  const auto report = validate(model);
  if (report.ok) return;
  std::ostringstream os;
  os << "parameters are not admissible:";
  for (const auto& v : report.violations) os << " (" << v.condition << ") " << v.detail << ';';
  throw Error(ErrorKind::Admissibility, "admissibility (" + report.violations.front().condition + ")", os.str());
}

Complex expm1(Complex z) {
  if (std::abs(z) < 1e-5) return z * (1.0 + z * (0.5 + z / 6.0));
  // e^{x+iy} - 1 = expm1(x) cos y - 2 sin^2(y/2) + i e^x sin y
  const double x = z.real();
  const double y = z.imag();
  const double s = std::sin(0.5 * y);
  return {std::expm1(x) * std::cos(y) - 2.0 * s * s, std::exp(x) * std::sin(y)};
}

Complex expm1_minus_z(Complex z) {
  if (std::abs(z) < 0.5) {
    // Taylor series through z^20; the remainder is below 1e-16 relative for |z| < 0.5.
    Complex term = 0.5 * z * z;
    Complex sum = term;
    for (int k = 3; k <= 20; ++k) {
      term *= z / static_cast<double>(k);
      sum += term;
    }
    return sum;
  }
  return expm1(z) - z;
}

Complex levy_F_term(const JumpMeasure& nu, const CVec& u, int m) {
  Complex total = 0.0;
  const int d = static_cast<int>(u.size());
  for (const auto& atom : nu.atoms()) {
    Complex inner = 0.0;
    for (int k = 0; k < d; ++k) inner += u(k) * atom.point(k);
    if (atom.point.norm() <= 1.0) {
      Complex inner_j = 0.0;
      for (int k = m; k < d; ++k) inner_j += u(k) * atom.point(k);
      // e^z - 1 - z_J = (e^z - 1 - z) + z_I
      total += atom.mass * (expm1_minus_z(inner) + (inner - inner_j));
    } else {
      total += atom.mass * expm1(inner);
    }
  }
  return total;
}

Complex levy_R_term(const JumpMeasure& mu_i, const CVec& u) {
  Complex total = 0.0;
  const int d = static_cast<int>(u.size());
  for (const auto& atom : mu_i.atoms()) {
    Complex inner = 0.0;
    for (int k = 0; k < d; ++k) inner += u(k) * atom.point(k);
    total += atom.mass * expm1_minus_z(inner);
  }
  return total;
}

}  // namespace affine
