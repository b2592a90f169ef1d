#include "affine/errors.hpp"

#include <utility>

namespace affine {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Usage: return "usage";
    case ErrorKind::Structural: return "structural";
    case ErrorKind::Admissibility: return "admissibility";
    case ErrorKind::Regularity: return "regularity";
    case ErrorKind::Integrability: return "integrability";
    case ErrorKind::Stability: return "stability";
    case ErrorKind::GridMismatch: return "grid-mismatch";
    case ErrorKind::Coverage: return "coverage";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::MassContract: return "mass-contract";
  }
  return "unknown";
}

bool is_precondition(ErrorKind kind) noexcept {
  return kind != ErrorKind::Divergence && kind != ErrorKind::MassContract;
}

Error::Error(ErrorKind kind, std::string condition, const std::string& message)
    : std::runtime_error(message), kind_(kind), condition_(std::move(condition)) {}

SolverDivergence::SolverDivergence(const std::string& message, double last_time)
    : Error(ErrorKind::Divergence, "riccati: adaptive step control", message), last_time_(last_time) {}

}  // namespace affine
