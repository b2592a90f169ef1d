#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include <json.hpp>

#include "affine/density.hpp"

namespace affine {

struct SplitModels {
  AffineModel q_model;  ///< nu := 0
  AffineModel r_model;  ///< a := 0, b := 0
};

/// P_t(x, .) = Q_t(x, .) * R_t(0, .).
SplitModels split_semigroups(const AffineModel& model);

/// Solves beta^T M + M beta = -I; throws Error(Stability) unless every eigenvalue has Re < 0.
Mat solve_lyapunov(const Mat& beta);

struct LyapunovData {
  Mat M_I;
  Mat M_J;
  double epsilon = 1.0;
  double fitted_c = 0.0;
  double fitted_C = 0.0;
  double residual_I = 0.0;
  double residual_J = 0.0;
};

LyapunovData lyapunov_norms(const AffineModel& model);

/// V_eps(x) = (1 + <x_I, M_I x_I> + eps <x_J, M_J x_J>)^{1/2}.
double lyapunov_V(const LyapunovData& lyap, const Vec& x);

/// A_Q V_eps(x) with the closed-form gradient and Hessian and exact atomic mu_i sums.
double generator_on_V(const AffineModel& q_model, const Vec& x, const LyapunovData& lyap);

struct DriftFit {
  double c = 0.0;
  double C = 0.0;
  bool ok = false;
  double epsilon = 1.0;
  std::optional<Vec> witness;
};

/**
 * Largest c in (0, 2 max|Re eig beta|] by bisection such that the sup over samples of A_Q V + c V is
 * attained inside 90% of the largest sampled radius; ok iff c >= 1e-4.
 */
DriftFit drift_fit(const AffineModel& q_model, const LyapunovData& lyap, const std::vector<Vec>& sample_xs);

/// drift_fit over eps in {1, 1e-1, ..., 1e-6}, keeping the largest eps that succeeds.
DriftFit drift_fit_sweep(const AffineModel& q_model, LyapunovData& lyap, const std::vector<Vec>& sample_xs);

/// Points of D: the origin, every axis direction at radii up to r_max, and log-uniform random points.
std::vector<Vec> drift_samples(const AffineModel& model, std::size_t count, double r_max, std::uint64_t seed);

struct DobrushinReport {
  double h = 0.0;
  double M = 0.0;
  double delta = 0.0;   ///< 2 - max ||Q_h(x,.) - Q_h(y,.)|| with the norm int |f - g|
  double max_tv = 0.0;  ///< max of half int |f - g|
  Vec worst_x;
  Vec worst_y;
  std::size_t pairs = 0;
};

/// Points of norm <= M: the origin, axis extremes and seeded random points.
std::vector<Vec> dobrushin_points(const AffineModel& model, double M, std::size_t count, std::uint64_t seed);

DobrushinReport dobrushin_check(const AffineModel& q_model, double h, double M,
                                const std::vector<std::pair<Vec, Vec>>& pairs, const GridSpec& grid,
                                const InversionSettings& settings = {});

struct DecayReport {
  Vec x;
  std::vector<double> times;
  std::vector<double> tv;
  double fitted_c = 0.0;
  double fitted_C = 0.0;
  double r_squared = 0.0;
  std::size_t fit_points = 0;
  bool fit_ok = false;
  bool monotone = true;
  double x_factor = 1.0;  ///< 1 + log(1 + |x|)
  double window_lo = 1e-6;
  double window_hi = 0.5;
  std::vector<std::string> diagnostics;
};

inline constexpr double kTvFloor = 1e-6;

/**
 * TV(f_t(x,.), f^pi) for each t from one lattice: each frequency is integrated through the time grid
 * and on to the invariant limit. Fits log TV = log C - c t over TV in [window_lo, window_hi].
 */
DecayReport tv_decay_report(const AffineModel& model, const Vec& x, const std::vector<double>& t_grid,
                            const GridSpec& grid, const InversionSettings& settings = {}, double window_lo = kTvFloor,
                            double window_hi = 0.5);

/// Several starting points on one lattice.
std::vector<DecayReport> tv_decay_reports(const AffineModel& model, const std::vector<Vec>& xs,
                                          const std::vector<double>& t_grid, const GridSpec& grid,
                                          const InversionSettings& settings = {}, double window_lo = kTvFloor,
                                          double window_hi = 0.5);

struct BoundFormCheck {
  std::vector<double> normalized;  ///< fitted_C / (1 + log(1 + |x|))
  double ratio = 0.0;              ///< max / min of normalized
  bool ok = false;                 ///< ratio <= factor
};

BoundFormCheck bound_form_check(const std::vector<DecayReport>& reports, double factor = 3.0);

nlohmann::json to_json(const LyapunovData& lyap);
nlohmann::json to_json(const DriftFit& fit);
nlohmann::json to_json(const DobrushinReport& report);
nlohmann::json to_json(const DecayReport& report);
/// Columns t, tv, fitted curve C e^{-ct}.
void write_csv(std::ostream& out, const DecayReport& report);

}  // namespace affine
