#pragma once

#include <optional>
#include <string>
#include <vector>

#include "reap/conic.hpp"
#include "reap/core.hpp"
#include "reap/data.hpp"

namespace reap {

enum class LossKind { kQuadratic, kHinge };

LossKind loss_kind_from_string(const std::string& name);

struct LossValue {
  double value = 0.0;
  double derivative = 0.0;  // d/dp
};

/// Validity loss against the 0.5 threshold: quadratic (p - 0.5)^2 or hinge
/// max(0, 0.5 - p). Requires p in (0, 1).
LossValue loss(LossKind kind, double p);

/// Where the validity loss is evaluated: on f(x) directly, or on the score
/// z(x) / scale with threshold 0, which does not saturate far from the boundary.
enum class LossSpace { kProbability, kScore };

struct ValidityLoss {
  LossKind kind = LossKind::kHinge;
  LossSpace space = LossSpace::kScore;
  double scale = 1.0;  // score divisor, kScore only

  double value(const Classifier& clf, const FeatureVector& x) const;
  Vector gradient(const Classifier& clf, const FeatureVector& x) const;
};

struct OneHotBlock {
  Eigen::Index offset = 0;
  Eigen::Index width = 0;
};

struct GradConfig {
  double lambda = 1.0;
  double lr = 0.01;
  int max_iters = 1000;  // per lambda level
  LossKind loss = LossKind::kHinge;
  LossSpace loss_space = LossSpace::kScore;  // score scaled by |grad z(x0)|
  double lambda_decrement = 0.05;
  bool early_stop = true;
  std::vector<bool> frozen;             // per coordinate; empty = all free
  std::vector<OneHotBlock> categorical; // relaxed to the simplex, rounded at the end
  // The previous inner maximiser is kept while its dual certificate proves it
  // within this relative gap of the worst-case cost at the new iterate. 0
  // re-solves every iteration.
  double reuse_gap = 1e-5;
};

struct RecoursePlan {
  FeatureVector terminal;
  bool valid = false;
  int iterations_used = 0;
  double lambda_used = 0.0;
  double worst_case_cost = 0.0;
  std::optional<double> truth_cost;
};

/// Maximiser of (x - x0)^T A (x - x0) over U_P. With no cuts the identity is
/// returned exactly.
struct WorstCase {
  double value = 0.0;
  Matrix argmax;
};
WorstCase worst_case_cost(const FeatureVector& x, const FeatureVector& x0,
                          const ConfidenceSetSpec& spec, const ConicOptions& options = {});

/// l + lambda max_{A in U_P} (x - x0)^T A (x - x0), and its gradient
/// with the inner maximiser held fixed.
double recourse_objective(const FeatureVector& x, const FeatureVector& x0,
                          const Classifier& clf, const ConfidenceSetSpec& spec, double lambda,
                          const ValidityLoss& loss);
Vector recourse_gradient(const FeatureVector& x, const FeatureVector& x0, const Classifier& clf,
                         const ConfidenceSetSpec& spec, double lambda, const ValidityLoss& loss);

/// Projected gradient descent on the worst-case relaxation over the box
/// [0, 1]^d, with the lambda back-off schedule when no valid point is found.
RecoursePlan generate_grad(const FeatureVector& x0, const Classifier& clf,
                           const ConfidenceSetSpec& spec, const GradConfig& cfg = {});

/// Euclidean projection of v onto the probability simplex.
Vector project_simplex(const Vector& v);

std::vector<OneHotBlock> one_hot_blocks(const Dataset& data);

}  // namespace reap
