#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "affine/grid.hpp"
#include "affine/lattice.hpp"
#include "affine/riccati.hpp"
#include "affine/spectral.hpp"

namespace affine {

using MultiIndex = std::vector<int>;

enum class Method { TensorFFT, DirectQuadrature };

const char* to_string(Method method) noexcept;
Method parse_method(const std::string& name);

struct DensityMeta {
  double t = 0.0;  ///< +inf for the invariant density
  Vec x;
  MultiIndex q;
  MultiIndex qt;
  std::vector<double> radius;
  std::string method;
  double theta = 0.0;
  double tail_bound = 0.0;  ///< certified bound on the truncated envelope mass
  double imag_residue = 0.0;
  double max_abs = 0.0;
  double min_value = 0.0;
  std::optional<double> mass;  ///< trapezoid mass, plain densities only
  std::size_t evaluations = 0;
};

struct DensityField {
  GridSpec grid;
  std::vector<double> values;
  DensityMeta meta;
  std::vector<std::string> warnings;
};

/// Polynomial factors multiplying the envelope, from derivative multipliers.
struct EnvelopeOrders {
  int i_order = 0;            ///< growth (1 + |u_I|)^{i_order}
  std::vector<int> j_degree;  ///< growth (1 + |u_j|)^{deg} per J coordinate
  double scale = 1.0;         ///< extra constant factor
};

struct Truncation {
  std::vector<double> radius;
  double tail_bound = 0.0;
};

/// Upper bound on (2 pi)^{-d} times the envelope integral outside the box [-U, U]^d.
double truncation_tail(const TailBoundCert& cert, const std::vector<double>& radius, const EnvelopeOrders& orders = {});

/**
 * Per-axis radii whose box leaves at most eps_trunc of envelope mass outside, never below fitted_M or
 * kMinRadius. Requires lambda > m + i_order.
 */
Truncation choose_truncation(const TailBoundCert& cert, double eps_trunc, const EnvelopeOrders& orders = {});

inline constexpr double kMinRadius = 1.0;

struct InversionSettings {
  SolverSettings solver;
  Method method = Method::TensorFFT;
  double eps_trunc = 1e-6;
  std::size_t max_lattice = std::size_t{1} << 20;  ///< frequency budget; exceeding it caps the radius with a warning
  std::vector<double> radius;                      ///< explicit radii; overrides the certificate
  int cert_samples = 256;
  double t_ref = 1.0;          ///< reference time for the invariant density's envelope
  double invariant_tol = 1e-12;
  double t_cap = 200.0;
  bool enforce_contracts = true;  ///< throw MassContract on mass or reality failures
  unsigned threads = 0;
};

struct DensityRequest {
  double t = 0.0;
  Vec x;
  MultiIndex q;
  MultiIndex qt;
};

/// Checks the smoothness regime for (q, qt) at x and returns the largest admissible order p.
int check_regularity(const AffineModel& model, const Vec& x, const MultiIndex& q, const MultiIndex& qt);

/// theta in {1, 1/2, ..., 2^-10} maximizing lambda(theta) (1 when m = 0).
double best_theta(const AffineModel& model);

DensityField invert_density(const AffineModel& model, double t, const Vec& x, const MultiIndex& q,
                            const MultiIndex& qt, const GridSpec& grid, const InversionSettings& settings = {});

/// Several requests sharing one frequency lattice and one Riccati solve per frequency.
std::vector<DensityField> invert_density_batch(const AffineModel& model, std::span<const DensityRequest> requests,
                                               const GridSpec& grid, const InversionSettings& settings = {});

struct InvariantValue {
  Complex value;
  bool converged = false;
  double t_end = 0.0;
};

/// Throws Error(Stability) unless every eigenvalue of beta has real part below -1e-10.
void require_stable(const AffineModel& model);

InvariantValue invariant_charfn(const RiccatiFlow& flow, const Vec& u, double tol = 1e-12, double t_cap = 200.0,
                                const SolverSettings& settings = {});
InvariantValue invariant_charfn(const AffineModel& model, const Vec& u, double tol = 1e-12, double t_cap = 200.0,
                                const SolverSettings& settings = {});

DensityField invariant_density(const AffineModel& model, const GridSpec& grid, const MultiIndex& qt,
                               const InversionSettings& settings = {});

/// Tail certificate used for transition densities at time t (t0 = t).
TailBoundCert density_certificate(const AffineModel& model, double t, double theta, int samples,
                                  const SolverSettings& settings);

/// Runs the configured inversion method; radius may shrink when the frequency budget caps it.
std::vector<std::vector<Complex>> invert_spectrum(const GridSpec& grid, std::vector<double>& radius, int requests,
                                                  const SpectrumFn& fn, const InversionSettings& settings,
                                                  std::size_t& evaluations, bool& capped);

/// Copies real parts into field.values and applies the reality and (plain fields) mass contracts.
void finalize_field(DensityField& field, const std::vector<Complex>& raw, bool enforce);

/// Envelope growth factors for derivative multi-indices at time t.
EnvelopeOrders envelope_orders(const AffineModel& model, double t, const MultiIndex& q, const MultiIndex& qt);

/// Half the trapezoid integral of |f - g|, clipped to [0, 1].
double tv_distance(const DensityField& f, const DensityField& g);
double tv_distance(const GridSpec& grid, const std::vector<double>& f, const std::vector<double>& g);

/// Long format: one row per grid point, coordinates then value.
void write_csv(std::ostream& out, const DensityField& field);
nlohmann::json metadata_json(const DensityField& field);

}  // namespace affine
