#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "affine/density.hpp"

namespace affine {

/// Philox4x32-10 counter-based generator (Salmon et al.), one stream per (key, path).
class Philox4x32 {
 public:
  using result_type = std::uint32_t;
  using Block = std::array<std::uint32_t, 4>;

  Philox4x32(std::uint64_t key, std::uint64_t stream);

  static Block bijection(Block counter, std::array<std::uint32_t, 2> key);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

 private:
  std::array<std::uint32_t, 2> key_;
  Block counter_;
  Block buffer_{};
  int used_ = 4;
};

struct SimConfig {
  Vec x0;
  double t_end = 1.0;
  double dt = 1e-3;
  std::size_t n_paths = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

struct PathEnsemble {
  std::vector<Vec> terminal;
  std::vector<std::uint32_t> nu_jumps;  ///< per path
  std::vector<std::uint32_t> mu_jumps;  ///< per path, summed over i
  std::size_t steps = 0;                ///< time steps per path
  double h = 0.0;                       ///< actual step size (t_end / steps)
  std::size_t clamped_steps = 0;        ///< path-steps where an I-coordinate was clamped
  std::vector<std::string> warnings;
};

/**
 * Full-truncation Euler scheme with compound-Poisson jumps. Per step of size h:
 *   drift        b + beta x - int_{|xi|<=1} xi_J nu(dxi) - sum_i x_i int xi mu_i(dxi)
 *   diffusion    N(0, 2 (a + sum_i x_i alpha_i) h)   (the generator has no 1/2)
 *   jumps        Poisson(|nu| h) atoms of nu and Poisson(x_i |mu_i| h) atoms of mu_i, rates frozen
 * The compensators follow the generator: nu is compensated only in J and only for |xi| <= 1, each
 * mu_i fully. I-coordinates are clamped at 0 after every step.
 */
PathEnsemble simulate_paths(const AffineModel& model, const SimConfig& cfg);

struct EmpiricalCharfn {
  Complex value;
  double std_error = 0.0;
};

EmpiricalCharfn empirical_charfn(const PathEnsemble& ens, const Vec& u);

struct DensityComparison {
  double ks = 0.0;
  double histogram_l1 = 0.0;
  double coverage = 0.0;  ///< sample fraction inside the grid along the axis
  std::size_t bins = 0;
};

/// KS statistic and histogram L1 between the ensemble marginal and the field's marginal on axis.
DensityComparison compare_density(const PathEnsemble& ens, const DensityField& f, int axis);

/// Sample mean of the terminal states.
Vec ensemble_mean(const PathEnsemble& ens);

void write_csv(std::ostream& out, const PathEnsemble& ens);
nlohmann::json summary_json(const PathEnsemble& ens);

}  // namespace affine
