#pragma once

#include <vector>

#include "reap/core.hpp"

namespace reap::sdp {

// Small dense semidefinite programs in the form
//
//   maximize   <C, A> + g^T z
//   subject to B_b + s_b A + sum_j z_j D_bj  >= 0      (one d x d LMI per block)
//              <M_k, A> + h_k^T z            <= rhs_k  (scalar inequalities)
//
// over a symmetric matrix A (d x d) and a vector of free scalars z. Every SDP
// that the conic module poses fits this shape with at most two LMI blocks.
// Solved with a primal log-barrier path-following method with damped Newton
// centering; every iterate is strictly feasible.

struct LmiBlock {
  Matrix constant;                   // B_b
  double sign = 1.0;                 // s_b
  std::vector<Matrix> scalar_coeff;  // D_bj, one per scalar; empty = all zero
};

struct LinearConstraint {
  Matrix coeff;        // M_k
  Vector scalar_coeff; // h_k; empty = zero
  double rhs = 0.0;
};

struct Problem {
  Eigen::Index dim = 0;
  Eigen::Index num_scalars = 0;
  Matrix objective;          // C
  Vector objective_scalars;  // g
  std::vector<LmiBlock> blocks;
  std::vector<LinearConstraint> linear;
};

struct Options {
  double gap_tol = 1e-9;      // stop once the barrier gap bound nu/t is below
  double growth = 16.0;       // t multiplier per outer step
  double centering_tol = 1e-10;
  int max_newton_steps = 2000;
};

struct Solution {
  Matrix a;
  Vector z;
  double objective = 0.0;
  // Central-path multipliers: Z_b = F_b^{-1}/t, lambda_k = 1/(t slack_k).
  std::vector<Matrix> block_duals;
  Vector linear_duals;
  double gap_bound = 0.0;
  int newton_steps = 0;
  bool converged = false;
};

/// Solves from a strictly feasible start. Throws kInfeasible when the start
/// violates a constraint.
Solution solve(const Problem& problem, const Matrix& a_start, const Vector& z_start,
               const Options& options = {});

/// True when (a, z) strictly satisfies every constraint of the problem.
bool strictly_feasible(const Problem& problem, const Matrix& a, const Vector& z);

}  // namespace reap::sdp
