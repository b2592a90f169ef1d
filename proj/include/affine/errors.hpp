#pragma once

#include <stdexcept>
#include <string>

namespace affine {

/// Classifies failures so front-ends can separate violated hypotheses from numerical breakdown.
enum class ErrorKind {
  Usage,          ///< malformed input files or arguments
  Structural,     ///< inconsistent dimensions
  Admissibility,  ///< parameter set is not admissible
  Regularity,     ///< requested derivative outside the smoothness regime
  Integrability,  ///< characteristic-function envelope not integrable
  Stability,      ///< spectral condition on beta fails
  GridMismatch,   ///< fields live on different grids
  Coverage,       ///< grid does not cover the sample
  Divergence,     ///< ODE solver failure
  MassContract,   ///< inverted density fails its mass or reality check
};

const char* to_string(ErrorKind kind) noexcept;

/// True for kinds caused by inputs violating a hypothesis (as opposed to numerical failure).
bool is_precondition(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string condition, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  /// Short label of the violated condition, e.g. "boundary: p < min b_i/alpha_i,ii - m".
  const std::string& condition() const noexcept { return condition_; }

 private:
  ErrorKind kind_;
  std::string condition_;
};

class SolverDivergence : public Error {
 public:
  SolverDivergence(const std::string& message, double last_time);

  /// Last time up to which the integration is valid.
  double last_time() const noexcept { return last_time_; }

 private:
  double last_time_;
};

}  // namespace affine
