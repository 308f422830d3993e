#include "reap/recourse_grad.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace reap {
namespace {

bool has_cuts(const ConfidenceSetSpec& spec) {
  return std::any_of(spec.cuts.begin(), spec.cuts.end(),
                     [](const CutMatrix& c) { return c.norm() > 1e-13; });
}

Vector project(const Vector& x, const FeatureVector& x0, const GradConfig& cfg) {
  Vector y = x.cwiseMax(0.0).cwiseMin(1.0);
  for (const auto& b : cfg.categorical) y.segment(b.offset, b.width) = project_simplex(x.segment(b.offset, b.width));
  for (std::size_t k = 0; k < cfg.frozen.size(); ++k) {
    if (cfg.frozen[k]) y[static_cast<Eigen::Index>(k)] = x0[static_cast<Eigen::Index>(k)];
  }
  return y;
}

Vector round_categorical(const Vector& x, const std::vector<OneHotBlock>& blocks) {
  Vector y = x;
  for (const auto& b : blocks) {
    Eigen::Index arg = 0;
    x.segment(b.offset, b.width).maxCoeff(&arg);
    y.segment(b.offset, b.width).setZero();
    y[b.offset + arg] = 1.0;
  }
  return y;
}

// Inner maximiser along the descent path. Consecutive iterates are close, so
// the last solution is reused while the last multipliers certify it.
class WorstCaseTracker {
 public:
  WorstCaseTracker(const ConfidenceSetSpec& spec, double reuse_gap)
      : spec_(spec), reuse_gap_(reuse_gap), cuts_(has_cuts(spec)) {}

  Matrix argmax(const Vector& v) {
    if (!cuts_) return Matrix::Identity(v.size(), v.size());
    if (last_ && reuse_gap_ > 0.0) {
      const Matrix s = v * v.transpose();
      const double primal = v.dot(last_->argmax.entries() * v);
      if (dual_bound(s, spec_, last_->multipliers) - primal <= reuse_gap_ * primal) return last_->argmax.entries();
    }
    last_ = max_over_confidence(v * v.transpose(), spec_);
    return last_->argmax.entries();
  }

 private:
  const ConfidenceSetSpec& spec_;
  double reuse_gap_;
  bool cuts_;
  std::optional<WorstCaseResult> last_;
};

}  // namespace

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "quadratic") return LossKind::kQuadratic;
  if (name == "hinge") return LossKind::kHinge;
  throw Error(ErrorCode::kInvalidArgument, "unknown loss kind: " + name);
}

LossValue loss(LossKind kind, double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::kInvalidArgument, "probability must lie in (0, 1)");
  switch (kind) {
    case LossKind::kQuadratic: return {(p - 0.5) * (p - 0.5), 2.0 * (p - 0.5)};
    case LossKind::kHinge: return {std::max(0.0, 0.5 - p), p < 0.5 ? -1.0 : 0.0};
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown loss kind");
}

double ValidityLoss::value(const Classifier& clf, const FeatureVector& x) const {
  if (space == LossSpace::kProbability) return loss(kind, clf.probability(x)).value;
  const double z = clf.score(x) / scale;
  return kind == LossKind::kQuadratic ? z * z : std::max(0.0, -z);
}

Vector ValidityLoss::gradient(const Classifier& clf, const FeatureVector& x) const {
  if (space == LossSpace::kProbability) return loss(kind, clf.probability(x)).derivative * clf.gradient(x);
  const double z = clf.score(x) / scale;
  const double dz = kind == LossKind::kQuadratic ? 2.0 * z : (z < 0.0 ? -1.0 : 0.0);
  return (dz / scale) * clf.score_gradient(x);
}

Vector project_simplex(const Vector& v) {
  // Sort-based projection: find the threshold tau with sum max(v - tau, 0) = 1.
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0, tau = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cumulative += u[k];
    const double t = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) tau = t;
  }
  return (v.array() - tau).cwiseMax(0.0);
}

std::vector<OneHotBlock> one_hot_blocks(const Dataset& data) {
  std::vector<OneHotBlock> out;
  for (const auto& b : data.blocks) {
    if (b.kind == FeatureKind::kCategorical) out.push_back({b.offset, b.width});
  }
  return out;
}

WorstCase worst_case_cost(const FeatureVector& x, const FeatureVector& x0,
                          const ConfidenceSetSpec& spec, const ConicOptions& options) {
  require_same_dim(x.size(), x0.size(), "worst_case_cost");
  require_same_dim(x.size(), spec.dimension, "worst_case_cost");
  const Vector v = x - x0;
  const Eigen::Index d = x.size();
  if (!has_cuts(spec)) return {v.squaredNorm(), Matrix::Identity(d, d)};
  const WorstCaseResult r = max_over_confidence(v * v.transpose(), spec, options);
  return {r.value, r.argmax.entries()};
}

double recourse_objective(const FeatureVector& x, const FeatureVector& x0,
                          const Classifier& clf, const ConfidenceSetSpec& spec, double lambda,
                          const ValidityLoss& loss) {
  return loss.value(clf, x) + lambda * worst_case_cost(x, x0, spec).value;
}

Vector recourse_gradient(const FeatureVector& x, const FeatureVector& x0, const Classifier& clf,
                         const ConfidenceSetSpec& spec, double lambda, const ValidityLoss& loss) {
  Vector g = loss.gradient(clf, x);
  const Vector v = x - x0;
  if (lambda != 0.0 && v.squaredNorm() > 0.0) {
    g += 2.0 * lambda * worst_case_cost(x, x0, spec).argmax * v;
  }
  return g;
}

RecoursePlan generate_grad(const FeatureVector& x0, const Classifier& clf,
                           const ConfidenceSetSpec& spec, const GradConfig& cfg) {
  require_same_dim(x0.size(), clf.dim(), "generate_grad");
  if (!cfg.frozen.empty()) require_same_dim(static_cast<Eigen::Index>(cfg.frozen.size()), x0.size(), "freeze mask");
  if (!(cfg.lr > 0.0) || !(cfg.lambda >= 0.0) || cfg.max_iters < 0) {
    throw Error(ErrorCode::kInvalidArgument, "invalid gradient recourse configuration");
  }
  auto finish = [&](const Vector& x, bool valid, int iters, double lambda) {
    RecoursePlan plan;
    plan.terminal = x;
    plan.valid = valid;
    plan.iterations_used = iters;
    plan.lambda_used = lambda;
    plan.worst_case_cost = worst_case_cost(x, x0, spec).value;
    return plan;
  };
  if (cfg.early_stop && clf.predict(x0)) return finish(x0, true, 0, cfg.lambda);

  ValidityLoss vloss{cfg.loss, cfg.loss_space, 1.0};
  const double slope = clf.score_gradient(x0).norm();
  if (slope > 1e-12) vloss.scale = slope;

  Vector x = x0;
  Vector best = x0;
  double best_p = clf.probability(x0);
  int iters = 0;
  double lambda = cfg.lambda;
  WorstCaseTracker inner(spec, cfg.reuse_gap);
  while (true) {
    const double lam = std::max(0.0, lambda);
    for (int t = 0; t < cfg.max_iters; ++t) {
      if (cfg.early_stop && clf.predict(x)) break;
      Vector g = vloss.gradient(clf, x);
      const Vector v = x - x0;
      if (lam != 0.0 && v.squaredNorm() > 0.0) g += 2.0 * lam * inner.argmax(v) * v;
      for (std::size_t k = 0; k < cfg.frozen.size(); ++k) {
        if (cfg.frozen[k]) g[static_cast<Eigen::Index>(k)] = 0.0;
      }
      x = project(x - cfg.lr * g, x0, cfg);
      ++iters;
    }
    const Vector candidate = round_categorical(x, cfg.categorical);
    const double p = clf.probability(candidate);
    if (p >= 0.5) return finish(candidate, true, iters, lam);
    if (p > best_p) {
      best_p = p;
      best = candidate;
    }
    lambda -= cfg.lambda_decrement;
    if (cfg.lambda_decrement <= 0.0 || lambda < -1e-12) break;
  }
  return finish(best, false, iters, 0.0);
}

}  // namespace reap
