#pragma once

#include <cstddef>
#include <vector>

#include "reap/barrier_sdp.hpp"
#include "reap/core.hpp"

namespace reap {

enum class SolverStatus { kOptimal, kInfeasible, kToleranceFailure };

const char* to_string(SolverStatus status);

struct CenterResult {
  CostMatrix center = CostMatrix::identity(1, 0.5);
  double radius = 0.0;          // max(0, signed_radius)
  double signed_radius = 0.0;   // negative when the cuts leave no interior
  SolverStatus status = SolverStatus::kOptimal;

  bool ok() const { return status == SolverStatus::kOptimal; }
};

struct WorstCaseResult {
  double value = 0.0;
  CostMatrix argmax = CostMatrix::identity(1, 0.0);
  double dual_value = 0.0;
  double gap = 0.0;
  Vector multipliers;  // t, indexed like spec.cuts (0 for zero cuts)
  SolverStatus status = SolverStatus::kOptimal;
};

struct TolerantCenterResult {
  CostMatrix center = CostMatrix::identity(1, 0.5);
  double radius = 0.0;
  std::vector<std::size_t> violated;  // positions in spec.cuts, ascending
};

// How the violation budget is spent. kMaxRadius maximises the radius over all
// admissible violation patterns. kFewestViolations first minimises the number
// of violated cuts and then maximises the radius among those patterns, so a
// consistent preference set is never relaxed.
enum class ToleranceObjective { kFewestViolations, kMaxRadius };

struct ConicOptions {
  sdp::Options solver;
  double contract_gap = 1e-5;
  double min_radius = 1e-9;  // radii at or below this mean "no interior"
};

/// Chebyshev center of U_P under A <= I. With no (nonzero) cuts the program is
/// unbounded in r; the convention center = I/2, radius = 1/2 is returned
/// without solving.
CenterResult chebyshev_center(const ConfidenceSetSpec& spec,
                              const ConicOptions& options = {});

/// max <A, S> over U_P with the dual certificate
/// min <U, I> + eps sum t  s.t.  U + sum t_k M_k >= S, t >= 0, U >= 0.
/// Throws kInfeasible when U_P has no strictly feasible point.
WorstCaseResult max_over_confidence(const Matrix& s, const ConfidenceSetSpec& spec,
                                    const ConicOptions& options = {});

/// Dual objective at multipliers t: sum of positive eigenvalues of
/// S - sum t_k M_k plus eps sum t. An upper bound on max <A, S> over U_P for
/// any t >= 0.
double dual_bound(const Matrix& s, const ConfidenceSetSpec& spec, const Vector& multipliers);

double default_big_m(const ConfidenceSetSpec& spec);

/// Chebyshev center of U_P^alpha. Exact enumeration of violation patterns for
/// up to 15 cuts, greedy removal beyond. Throws kInfeasible when no admissible
/// pattern leaves an interior. `big_m <= 0` selects default_big_m().
TolerantCenterResult tolerant_center(
    const ConfidenceSetSpec& spec, double alpha, double big_m = 0.0,
    ToleranceObjective objective = ToleranceObjective::kFewestViolations,
    const ConicOptions& options = {});

// Post-hoc constraint checks, evaluated directly from eigenvalues and inner
// products. Each returns the largest violation (<= 0 when satisfied).
double box_violation(const Matrix& a);
double center_violation(const ConfidenceSetSpec& spec, const Matrix& center,
                        double radius, const std::vector<std::size_t>& relaxed = {},
                        double big_m = 0.0);
double membership_violation(const ConfidenceSetSpec& spec, const Matrix& a);

}  // namespace reap
