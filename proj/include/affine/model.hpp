#pragma once

#include <span>
#include <string>
#include <vector>

#include "affine/types.hpp"

namespace affine {

/// Weighted point mass of a finite-activity Levy measure.
struct Atom {
  double mass = 0.0;
  Vec point;
};

/**
 * Finite-activity jump measure: either the zero measure or a finite sum of weighted atoms.
 *
 * Levy integrals against such a measure reduce to finite sums and are evaluated exactly.
 * Membership of the atoms in D \ {0} depends on the state-space split and is checked by
 * validate() on the enclosing model.
 */
class JumpMeasure {
 public:
  JumpMeasure() = default;
  explicit JumpMeasure(std::vector<Atom> atoms);

  bool is_zero() const noexcept { return atoms_.empty(); }
  std::span<const Atom> atoms() const noexcept { return atoms_; }
  double total_mass() const noexcept;

  /// Sum of masses times points, i.e. the first moment vector.
  Vec first_moment(int d) const;
  /// First moment restricted to atoms with norm <= radius.
  Vec truncated_moment(int d, double radius) const;

  /// Measure whose atom list is the concatenation of both lists.
  JumpMeasure merged(const JumpMeasure& other) const;

 private:
  std::vector<Atom> atoms_;
};

/**
 * Parameter set (a, alpha, b, beta, nu, mu) of an affine process on D = R_+^m x R^n.
 *
 * Coordinates are ordered I (the m nonnegative ones) first, then J.
 */
struct AffineModel {
  int m = 0;
  int n = 0;
  Mat a;
  std::vector<Mat> alpha;
  Vec b;
  Mat beta;
  JumpMeasure nu;
  std::vector<JumpMeasure> mu;

  int d() const noexcept { return m + n; }
};

struct Violation {
  std::string condition;  ///< one of "i" .. "vi"
  std::string detail;
  std::vector<int> indices;
};

struct ValidationReport {
  bool ok = true;
  std::vector<Violation> violations;
};

inline constexpr double kEqualityTol = 1e-12;
inline constexpr double kPsdRelTol = 1e-10;

/// Throws Error(Structural) when sizes are inconsistent with d = m + n >= 1.
void check_structure(const AffineModel& model);

/// Checks every admissibility condition and lists all violations. Throws on structural errors.
ValidationReport validate(const AffineModel& model);

/// Throws Error(Admissibility) summarizing the violations unless validate(model).ok.
void require_admissible(const AffineModel& model);

/// Sum_k w_k (e^{<u,xi_k>} - 1 - <u_J, xi_k,J> 1{|xi_k| <= 1}).
Complex levy_F_term(const JumpMeasure& nu, const CVec& u, int m);

/// Sum_k w_k (e^{<u,xi_k>} - 1 - <u, xi_k>).
Complex levy_R_term(const JumpMeasure& mu_i, const CVec& u);

/// e^z - 1 - z without cancellation for small |z|.
Complex expm1_minus_z(Complex z);
/// e^z - 1 without cancellation for small |z|.
Complex expm1(Complex z);

/// Smallest eigenvalue of the symmetric part of a square matrix.
double min_eigenvalue(const Mat& a);

}  // namespace affine
