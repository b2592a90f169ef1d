#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "affine/model.hpp"

namespace affine {

struct SolverSettings {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  long max_steps = 1'000'000;
};

/// Re(psi_I) excursions above zero smaller than this are clamped; larger ones abort the solve.
inline constexpr double kClampThreshold = 1e-12;

struct VectorFieldValue {
  Complex F;
  CVec R;  ///< length m
};

/// Solution of the generalized Riccati system sampled at increasing times, starting at t = 0.
struct RiccatiPath {
  CVec u0;
  std::vector<double> times;
  std::vector<CVec> psi;
  std::vector<Complex> phi;
};

/// State (psi(t,u), phi(t,u)) at a single time.
struct FlowPoint {
  CVec psi;
  Complex phi;
};

/**
 * Integrator for psi_I' = R(psi), phi' = F(psi) with psi_J(t) = exp(beta_JJ^T t) u_J in closed form.
 *
 * Construct once per model and reuse across frequencies: the J-block exponential helper and the
 * compensated jump data are precomputed. All member functions are const and thread-safe.
 */
class RiccatiFlow {
 public:
  explicit RiccatiFlow(const AffineModel& model);

  const AffineModel& model() const noexcept { return model_; }

  /// F(u) and R(u); rejects Re(u_I) above the clamp threshold.
  VectorFieldValue vector_field(const CVec& u) const;

  /// exp(beta_JJ^T t) u_J.
  CVec psi_J(double t, const CVec& uJ) const;

  /**
   * Integrates from t = 0. The solver lands exactly on each entry of stop_times (increasing,
   * nonnegative) and calls on_stop(k, t, psi, phi) there. on_step, if set, is called after every
   * accepted step and may return false to end the integration early.
   */
  void integrate(const CVec& u0, std::span<const double> stop_times, const SolverSettings& settings,
                 const std::function<void(std::size_t, double, const CVec&, Complex)>& on_stop,
                 const std::function<bool(double, const CVec&, Complex)>& on_step = {}) const;

  /// Flow evaluated at each of the given times.
  std::vector<FlowPoint> at_times(const CVec& u0, std::span<const double> times, const SolverSettings& settings) const;

  FlowPoint at(const CVec& u0, double t, const SolverSettings& settings) const;

  /// Full path on the solver's accepted-step grid.
  RiccatiPath path(const CVec& u0, double t_end, const SolverSettings& settings) const;

 private:
  CVec full_psi(double t, const CVec& psi_I, const CVec& uJ) const;

  AffineModel model_;
  Mat beta_jj_t_;
  bool jj_diagonal_ = false;
};

VectorFieldValue vector_field(const AffineModel& model, const CVec& u);

RiccatiPath solve_flow(const AffineModel& model, const CVec& u0, double t_end, const SolverSettings& settings = {});

CVec psi_J_closed(const AffineModel& model, double t, const CVec& uJ);

struct HFields {
  double h1 = 0.0;
  double h2 = 0.0;
};

/// Real and imaginary parts of the rescaled vector field R_i at (x + i y) for frequency radius |u|.
HFields h_fields(const AffineModel& model, int i, const Vec& x, const Vec& y, const Vec& u);

struct ScaledFG {
  Vec F;
  Vec G;
};

/// F = Re psi(t/|u|, iu)/|u| and G = Im psi(t/|u|, iu)/|u|.
ScaledFG scaled_FG(const AffineModel& model, double t, const Vec& u, const SolverSettings& settings = {});

/// Columns: t, Re psi_1..Re psi_d, Im psi_1..Im psi_d, Re phi, Im phi.
void write_csv(std::ostream& out, const RiccatiPath& path);

}  // namespace affine
