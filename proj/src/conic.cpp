#include "reap/conic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

namespace reap {
namespace {

constexpr double kZeroCutNorm = 1e-13;

bool is_zero_cut(const CutMatrix& cut) { return cut.norm() <= kZeroCutNorm; }

double nuclear_norm(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().sum();
}

// 0 <= A <= I as the two LMI blocks every program here shares.
void add_box_blocks(sdp::Problem& p, std::size_t num_scalar_coeffs) {
  const Eigen::Index d = p.dim;
  sdp::LmiBlock lower{Matrix::Zero(d, d), 1.0, {}};
  sdp::LmiBlock upper{Matrix::Identity(d, d), -1.0, {}};
  lower.scalar_coeff.assign(num_scalar_coeffs, Matrix::Zero(d, d));
  upper.scalar_coeff.assign(num_scalar_coeffs, Matrix::Zero(d, d));
  p.blocks.push_back(std::move(lower));
  p.blocks.push_back(std::move(upper));
}

// Chebyshev program over the given cuts with per-cut right-hand sides;
// r is a free scalar so the same program measures infeasibility depth.
struct ChebyshevSolve {
  Matrix center;
  double r = 0.0;
  bool converged = false;
};

ChebyshevSolve solve_chebyshev(const ConfidenceSetSpec& spec,
                               const std::vector<std::size_t>& cut_ids,
                               const std::vector<double>& rhs,
                               const ConicOptions& options) {
  const Eigen::Index d = spec.dimension;
  sdp::Problem p;
  p.dim = d;
  p.num_scalars = 1;
  p.objective = Matrix::Zero(d, d);
  p.objective_scalars = Vector::Ones(1);
  add_box_blocks(p, 1);
  double r0 = std::numeric_limits<double>::infinity();
  const Matrix half = 0.5 * Matrix::Identity(d, d);
  for (std::size_t n = 0; n < cut_ids.size(); ++n) {
    const CutMatrix& cut = spec.cuts[cut_ids[n]];
    sdp::LinearConstraint lc;
    lc.coeff = cut.entries();
    lc.scalar_coeff = Vector::Constant(1, cut.norm());
    lc.rhs = rhs[n];
    r0 = std::min(r0, (rhs[n] - frobenius_inner(half, cut.entries())) / cut.norm());
    p.linear.push_back(std::move(lc));
  }
  const Vector z0 = Vector::Constant(1, r0 - 1.0);
  const sdp::Solution sol = sdp::solve(p, half, z0, options.solver);
  return {sol.a, sol.z[0], sol.converged};
}

std::vector<std::size_t> nonzero_cuts(const ConfidenceSetSpec& spec) {
  std::vector<std::size_t> ids;
  for (std::size_t k = 0; k < spec.cuts.size(); ++k) {
    if (!is_zero_cut(spec.cuts[k])) ids.push_back(k);
  }
  return ids;
}

void validate_spec(const ConfidenceSetSpec& spec) {
  if (spec.dimension < 1) {
    throw Error(ErrorCode::kInvalidArgument, "confidence set dimension must be >= 1");
  }
  if (!(spec.margin >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "margin must be >= 0");
  }
  for (const auto& cut : spec.cuts) {
    require_same_dim(cut.entries().rows(), spec.dimension, "cut matrix");
  }
}

// Strictly feasible point of U_P, or nullopt when U_P has empty interior.
std::optional<Matrix> interior_point(const ConfidenceSetSpec& spec,
                                     const std::vector<std::size_t>& ids,
                                     const ConicOptions& options) {
  const Eigen::Index d = spec.dimension;
  if (spec.margin > 0.0) {
    // delta I is strictly inside for small delta whenever eps > 0.
    double max_trace = 0.0;
    for (auto k : ids) max_trace = std::max(max_trace, spec.cuts[k].entries().trace());
    const double delta =
        max_trace > 0.0 ? std::min(0.5, 0.5 * spec.margin / max_trace) : 0.5;
    return delta * Matrix::Identity(d, d);
  }
  // Phase I: maximise s with s I <= A <= (1 - s) I and <A, M_k> + s <= eps.
  sdp::Problem p;
  p.dim = d;
  p.num_scalars = 1;
  p.objective = Matrix::Zero(d, d);
  p.objective_scalars = Vector::Ones(1);
  p.blocks.push_back({Matrix::Zero(d, d), 1.0, {-Matrix::Identity(d, d)}});
  p.blocks.push_back({Matrix::Identity(d, d), -1.0, {-Matrix::Identity(d, d)}});
  const Matrix half = 0.5 * Matrix::Identity(d, d);
  double s0 = 0.25;
  for (auto k : ids) {
    p.linear.push_back({spec.cuts[k].entries(), Vector::Ones(1), spec.margin});
    s0 = std::min(s0, spec.margin - frobenius_inner(half, spec.cuts[k].entries()));
  }
  const sdp::Solution sol = sdp::solve(p, half, Vector::Constant(1, s0 - 1.0), options.solver);
  if (sol.z[0] <= options.min_radius) return std::nullopt;
  return sol.a;
}

}  // namespace

const char* to_string(SolverStatus status) {
  switch (status) {
    case SolverStatus::kOptimal: return "optimal";
    case SolverStatus::kInfeasible: return "infeasible";
    case SolverStatus::kToleranceFailure: return "tolerance_failure";
  }
  return "unknown";
}

CenterResult chebyshev_center(const ConfidenceSetSpec& spec, const ConicOptions& options) {
  validate_spec(spec);
  const auto ids = nonzero_cuts(spec);
  CenterResult result;
  if (ids.empty()) {
    result.center = CostMatrix::identity(spec.dimension, 0.5);
    result.radius = 0.5;
    result.signed_radius = 0.5;
    return result;
  }
  const std::vector<double> rhs(ids.size(), spec.margin);
  const ChebyshevSolve sol = solve_chebyshev(spec, ids, rhs, options);
  result.center = CostMatrix(sol.center);
  result.signed_radius = sol.r;
  result.radius = std::max(0.0, sol.r);
  if (sol.r <= options.min_radius) {
    result.status = SolverStatus::kInfeasible;
    result.radius = 0.0;
  } else if (!sol.converged) {
    result.status = SolverStatus::kToleranceFailure;
  }
  return result;
}

WorstCaseResult max_over_confidence(const Matrix& s, const ConfidenceSetSpec& spec,
                                    const ConicOptions& options) {
  validate_spec(spec);
  require_same_dim(s.rows(), spec.dimension, "max_over_confidence");
  const CostMatrix objective(s);  // validates symmetric PSD
  const Eigen::Index d = spec.dimension;
  const auto ids = nonzero_cuts(spec);

  const auto start = interior_point(spec, ids, options);
  if (!start) {
    throw Error(ErrorCode::kInfeasible, "confidence set has empty interior");
  }
  WorstCaseResult result;
  result.multipliers = Vector::Zero(static_cast<Eigen::Index>(spec.cuts.size()));
  if (objective.entries().norm() == 0.0) {
    // Any feasible point is optimal and (U, t) = (0, 0) certifies zero.
    result.argmax = CostMatrix(*start);
    return result;
  }

  sdp::Problem p;
  p.dim = d;
  p.num_scalars = 0;
  p.objective = objective.entries();
  add_box_blocks(p, 0);
  for (auto k : ids) p.linear.push_back({spec.cuts[k].entries(), Vector(), spec.margin});
  const sdp::Solution sol = sdp::solve(p, *start, Vector(), options.solver);

  result.value = sol.objective;
  result.argmax = CostMatrix(sol.a);

  // Dual certificate: multipliers t from the central path, then the best U for
  // those t, which is the positive part of S - sum t M.
  result.multipliers = Vector::Zero(static_cast<Eigen::Index>(spec.cuts.size()));
  for (std::size_t n = 0; n < ids.size(); ++n) {
    result.multipliers[static_cast<Eigen::Index>(ids[n])] =
        std::max(0.0, sol.linear_duals[static_cast<Eigen::Index>(n)]);
  }
  result.dual_value = dual_bound(objective.entries(), spec, result.multipliers);
  result.gap = std::abs(result.value - result.dual_value);
  if (!sol.converged || result.gap > options.contract_gap) {
    result.status = SolverStatus::kToleranceFailure;
  }
  return result;
}

double dual_bound(const Matrix& s, const ConfidenceSetSpec& spec, const Vector& multipliers) {
  require_same_dim(static_cast<Eigen::Index>(spec.cuts.size()), multipliers.size(), "multipliers");
  Matrix rest = s;
  double t_sum = 0.0;
  for (std::size_t k = 0; k < spec.cuts.size(); ++k) {
    const double t = multipliers[static_cast<Eigen::Index>(k)];
    if (t == 0.0) continue;
    rest -= t * spec.cuts[k].entries();
    t_sum += t;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (rest + rest.transpose()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseMax(0.0).sum() + spec.margin * t_sum;
}

double default_big_m(const ConfidenceSetSpec& spec) {
  double worst = 0.0;
  for (const auto& cut : spec.cuts) worst = std::max(worst, nuclear_norm(cut.entries()));
  return 10.0 * (spec.margin + worst);
}

namespace {

struct PatternEval {
  std::vector<std::size_t> relaxed;  // positions among nonzero cuts
  ChebyshevSolve solve;
};

PatternEval evaluate_pattern(const ConfidenceSetSpec& spec,
                             const std::vector<std::size_t>& ids,
                             const std::vector<std::size_t>& relaxed, double big_m,
                             const ConicOptions& options) {
  std::vector<double> rhs(ids.size(), spec.margin);
  for (auto pos : relaxed) rhs[pos] += big_m;
  return {relaxed, solve_chebyshev(spec, ids, rhs, options)};
}

// Visits every k-subset of {0..n-1} in lexicographic order.
template <typename Fn>
void for_each_combination(std::size_t n, std::size_t k, Fn&& fn) {
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  if (k > n) return;
  while (true) {
    fn(idx);
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

constexpr double kRadiusTieTol = 1e-9;

}  // namespace

TolerantCenterResult tolerant_center(const ConfidenceSetSpec& spec, double alpha,
                                     double big_m, ToleranceObjective objective,
                                     const ConicOptions& options) {
  validate_spec(spec);
  if (spec.cuts.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "tolerant_center needs at least one preference");
  }
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must lie in [0, 1)");
  }
  if (big_m <= 0.0) big_m = default_big_m(spec);
  const auto budget = static_cast<std::size_t>(
      std::floor(alpha * static_cast<double>(spec.cuts.size()) + 1e-12));
  const auto ids = nonzero_cuts(spec);

  std::optional<PatternEval> best;
  auto better = [&](const PatternEval& cand) {
    if (cand.solve.r <= options.min_radius) return false;
    if (!best) return true;
    return cand.solve.r > best->solve.r + kRadiusTieTol;
  };

  if (ids.empty()) {
    const CenterResult c = chebyshev_center(spec, options);
    return {c.center, c.radius, {}};
  }

  if (ids.size() <= 15) {
    for (std::size_t size = 0; size <= std::min(budget, ids.size()); ++size) {
      for_each_combination(ids.size(), size, [&](const std::vector<std::size_t>& subset) {
        PatternEval eval = evaluate_pattern(spec, ids, subset, big_m, options);
        if (better(eval)) best = std::move(eval);
      });
      if (best && objective == ToleranceObjective::kFewestViolations) break;
    }
  } else {
    std::vector<std::size_t> relaxed;
    PatternEval current = evaluate_pattern(spec, ids, relaxed, big_m, options);
    auto done = [&] {
      if (relaxed.size() >= budget) return true;
      return objective == ToleranceObjective::kFewestViolations &&
             current.solve.r > options.min_radius;
    };
    while (!done()) {
      std::optional<PatternEval> step;
      for (std::size_t pos = 0; pos < ids.size(); ++pos) {
        if (std::find(relaxed.begin(), relaxed.end(), pos) != relaxed.end()) continue;
        auto trial = relaxed;
        trial.push_back(pos);
        std::sort(trial.begin(), trial.end());
        PatternEval eval = evaluate_pattern(spec, ids, trial, big_m, options);
        if (!step || eval.solve.r > step->solve.r + kRadiusTieTol) step = std::move(eval);
      }
      if (!step) break;
      relaxed = step->relaxed;
      current = std::move(*step);
    }
    if (current.solve.r > options.min_radius) best = std::move(current);
  }

  if (!best) {
    throw Error(ErrorCode::kInfeasible,
                "no admissible violation pattern leaves a nonempty interior");
  }
  TolerantCenterResult result{CostMatrix(best->solve.center), best->solve.r, {}};
  for (auto pos : best->relaxed) result.violated.push_back(ids[pos]);
  return result;
}

double box_violation(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.transpose()),
                                            Eigen::EigenvaluesOnly);
  return std::max(-eig.eigenvalues().minCoeff(), eig.eigenvalues().maxCoeff() - 1.0);
}

double center_violation(const ConfidenceSetSpec& spec, const Matrix& center,
                        double radius, const std::vector<std::size_t>& relaxed,
                        double big_m) {
  double worst = box_violation(center);
  worst = std::max(worst, -radius);
  for (std::size_t k = 0; k < spec.cuts.size(); ++k) {
    const auto& m = spec.cuts[k].entries();
    double rhs = spec.margin;
    if (std::find(relaxed.begin(), relaxed.end(), k) != relaxed.end()) rhs += big_m;
    worst = std::max(worst, frobenius_inner(center, m) + radius * m.norm() - rhs);
  }
  return worst;
}

double membership_violation(const ConfidenceSetSpec& spec, const Matrix& a) {
  double worst = box_violation(a);
  for (const auto& cut : spec.cuts) {
    worst = std::max(worst, frobenius_inner(a, cut.entries()) - spec.margin);
  }
  return worst;
}

}  // namespace reap
