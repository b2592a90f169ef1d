#pragma once

#include <climits>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "affine/riccati.hpp"

namespace affine {

/// exp(phi(t, iu) + <x, psi(t, iu)>).
Complex charfn(const RiccatiFlow& flow, double t, const Vec& x, const Vec& u, const SolverSettings& settings = {});
Complex charfn(const AffineModel& model, double t, const Vec& x, const Vec& u, const SolverSettings& settings = {});

struct KalmanResult {
  Eigen::MatrixXd matrix;  ///< [a_JJ, beta_JJ a_JJ, ..., beta_JJ^{n-1} a_JJ], n x n^2
  Eigen::VectorXd singular_values;
  int rank = 0;
  bool full = false;
};

/// Rank uses the threshold 1e-10 times the largest singular value.
KalmanResult kalman_rank(const AffineModel& model);

struct GramianResult {
  Mat gramian;
  double delta_t0 = 0.0;
};

/**
 * int_0^t0 exp(s beta_JJ) a_JJ exp(s beta_JJ^T) ds via the block exponential of
 * [[-beta_JJ, a_JJ], [0, beta_JJ^T]] t0. Eigenvalues below 1e-10 of the largest are reported as 0.
 */
GramianResult gramian_delta(const AffineModel& model, double t0);

/// Sentinel for p_max when there is no I-block and hence no boundary restriction.
inline constexpr int kUnboundedOrder = INT_MAX;

struct TailParams {
  double theta = 0.0;
  Vec alpha_hat;  ///< alpha_hat_{i,ii}(theta)
  Vec beta_hat;   ///< beta_hat_ii(theta)
  double lambda = 0.0;
  std::optional<int> p_max;  ///< largest p >= 0 with p < min_i b_i/alpha_{i,ii} - m
};

/// Requires m >= 1 and alpha_{i,ii} > 0 for all i.
TailParams tail_params(const AffineModel& model, double theta);

/// Largest admissible derivative order; kUnboundedOrder when m = 0.
std::optional<int> max_regularity_order(const AffineModel& model);

struct ConeResult {
  double epsilon = 0.0;
  Vec argmin;
  bool degenerate = false;
};

/// inf over |u| = 1 of max(<u_J, G u_J>, <u, alpha_1 u>, ..., <u, alpha_m u>).
ConeResult cone_epsilon(const AffineModel& model, double t0, int sphere_samples = 4096);

struct TailBoundCert {
  int m = 0;
  int n = 0;
  double theta = 0.0;
  Vec alpha_hat;
  Vec beta_hat;
  double lambda = 0.0;
  std::optional<int> p_max;
  double t0 = 0.0;
  double delta_t0 = 0.0;
  double epsilon_t0 = 0.0;
  double delta = 0.0;  ///< min(delta_t0, epsilon_t0), the Gaussian rate used in the envelope
  int kalman_rank = 0;
  bool kalman_full = false;
  double fitted_C = 0.0;
  double fitted_M = 0.0;
  double min_margin = 0.0;  ///< min over samples of log C - excess
  std::size_t samples = 0;
  bool verified = false;
  std::optional<Vec> witness;
};

/// log e^{Re phi} + lambda log(1 + |u_I|) + delta |u_J|^2; the envelope holds where this is <= log C.
double envelope_excess(const TailBoundCert& cert, int m, const Vec& u, double re_phi);

/**
 * Fits C and M for the envelope e^{Re phi(t,iu)} <= C (1+|u_I|)^{-lambda} exp(-delta |u_J|^2) over the
 * given samples, all t >= t0. C is the smallest constant valid at every sample and M the smallest
 * sampled radius. verified is false when the excess still grows faster than (1+|u|)^{0.1} across the
 * two outer quarters of sampled radii, with the worst sample as witness.
 */
TailBoundCert tail_bound_check(const AffineModel& model, double t0, double theta, std::span<const double> t_samples,
                               std::span<const Vec> u_samples, const SolverSettings& settings = {});

/// Log-uniform radii in [r_lo, r_hi] times uniform directions; deterministic in seed.
std::vector<Vec> frequency_samples(int d, std::size_t count, double r_lo, double r_hi, std::uint64_t seed);

nlohmann::json to_json(const TailBoundCert& cert);
nlohmann::json to_json(const TailParams& params);

}  // namespace affine
