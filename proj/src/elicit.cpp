#include "reap/elicit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace reap {
namespace {

constexpr double kZeroCutNorm = 1e-13;

thread_local std::size_t g_windows_examined = 0;

std::pair<std::size_t, std::size_t> unordered(std::size_t i, std::size_t j) {
  return i < j ? std::make_pair(i, j) : std::make_pair(j, i);
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Norm of M_ij from a = u + v and b = u - v, where u = x_i - x0, v = x_j - x0:
// M_ij = (a b^T + b a^T) / 2, so ||M||^2 = (|a|^2 |b|^2 + (a^T b)^2) / 2. This
// stays accurate when x_i and x_j nearly coincide.
double cut_norm(const Vector& a, const Vector& b) {
  const double ab = a.dot(b);
  return std::sqrt(0.5 * (a.squaredNorm() * b.squaredNorm() + ab * ab));
}

std::vector<double> center_costs(const ElicitationSession& s) {
  const Matrix& c = s.incumbent().center.entries();
  std::vector<double> costs(s.pool().size());
  for (std::size_t i = 0; i < costs.size(); ++i) costs[i] = cost(c, s.pool()[i], s.x0());
  return costs;
}

bool any_pair_asked(const ElicitationSession& s, const std::vector<std::size_t>& opts) {
  for (std::size_t a = 0; a < opts.size(); ++a) {
    for (std::size_t b = a + 1; b < opts.size(); ++b) {
      if (s.was_asked(opts[a], opts[b])) return true;
    }
  }
  return false;
}

// Mean distance over consecutive option pairs; nullopt if any of them is a
// degenerate cut.
std::optional<double> mean_distance(const ElicitationSession& s,
                                    const std::vector<std::size_t>& opts) {
  double total = 0.0;
  const Matrix& c = s.incumbent().center.entries();
  for (std::size_t q = 0; q + 1 < opts.size(); ++q) {
    const auto d = projection_distance(c, s.pool()[opts[q]], s.pool()[opts[q + 1]], s.x0());
    if (!d) return std::nullopt;
    total += *d;
  }
  return total / static_cast<double>(opts.size() - 1);
}

}  // namespace

CostMatrix gen_truth_random(Eigen::Index d, Rng& rng) {
  if (d < 1) throw Error(ErrorCode::kInvalidArgument, "dimension must be >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = normal(rng);
  Matrix a = symmetrize(g * g.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
  return CostMatrix(a / eig.eigenvalues().maxCoeff());
}

CostMatrix gen_truth_lqr(const Matrix& q, const Matrix& r, double tol, int max_iter) {
  require_same_dim(q.rows(), r.rows(), "gen_truth_lqr");
  const CostMatrix qc(q);
  if (Eigen::LLT<Matrix>(symmetrize(r)).info() != Eigen::Success) {
    throw Error(ErrorCode::kNotPsd, "R must be positive definite");
  }
  const Matrix& qm = qc.entries();
  const Eigen::Index d = qm.rows();
  if (qm.norm() == 0.0) return CostMatrix(Matrix::Zero(d, d));
  const Matrix rs = symmetrize(r);
  Matrix a = qm + Matrix::Identity(d, d);
  for (int it = 0; it < max_iter; ++it) {
    const Matrix term = symmetrize(a * Eigen::LLT<Matrix>(rs + a).solve(a));
    if ((qm - term).norm() <= tol) return CostMatrix(a);
    a = symmetrize(qm + a - term);
  }
  throw Error(ErrorCode::kNonConvergence, "LQR fixed-point iteration did not converge");
}

CostMatrix gen_truth_causal(const Matrix& w, const Matrix& d) {
  require_same_dim(w.rows(), w.cols(), "gen_truth_causal W");
  require_same_dim(w.rows(), d.rows(), "gen_truth_causal D");
  const Matrix ds = symmetrize(d);
  Eigen::LLT<Matrix> dllt(ds);
  if (dllt.info() != Eigen::Success) {
    throw Error(ErrorCode::kNotPsd, "D must be positive definite");
  }
  const Matrix iw = Matrix::Identity(w.rows(), w.cols()) - w;
  Eigen::FullPivLU<Matrix> lu(iw);
  if (!lu.isInvertible()) throw Error(ErrorCode::kInvalidArgument, "I - W is singular");
  return CostMatrix(symmetrize(iw.transpose() * dllt.solve(iw)));
}

std::optional<double> projection_distance(const Matrix& center, const FeatureVector& xi,
                                          const FeatureVector& xj, const FeatureVector& x0) {
  require_same_dim(xi.size(), x0.size(), "projection_distance");
  require_same_dim(xj.size(), x0.size(), "projection_distance");
  const Vector a = xi + xj - 2.0 * x0;
  const Vector b = xi - xj;
  const double norm = cut_norm(a, b);
  if (norm <= kZeroCutNorm) return std::nullopt;
  return std::abs(a.dot(center * b)) / norm;
}

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::kExhaustive: return "exhaustive";
    case Strategy::kSimilarCost: return "similar";
    case Strategy::kRandom: return "random";
  }
  return "unknown";
}

Strategy strategy_from_string(const std::string& name) {
  if (name == "exhaustive") return Strategy::kExhaustive;
  if (name == "similar" || name == "similar2" || name == "similarK" || name == "similar_cost") {
    return Strategy::kSimilarCost;
  }
  if (name == "random") return Strategy::kRandom;
  throw Error(ErrorCode::kInvalidArgument, "unknown strategy: " + name);
}

ElicitationSession::ElicitationSession(FeatureVector x0, std::vector<FeatureVector> pool,
                                       SessionConfig cfg)
    : x0_(std::move(x0)), pool_(std::move(pool)), cfg_(std::move(cfg)),
      prefs_(cfg_.margin), rng_(cfg_.seed) {
  if (pool_.empty()) throw Error(ErrorCode::kInvalidArgument, "candidate pool is empty");
  if (cfg_.budget < 0) throw Error(ErrorCode::kInvalidArgument, "budget must be >= 0");
  if (cfg_.k < 2) throw Error(ErrorCode::kInvalidArgument, "k must be >= 2");
  if (!(cfg_.margin >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "margin must be >= 0");
  for (const auto& x : pool_) require_same_dim(x.size(), x0_.size(), "pool point");
  incumbent_ = chebyshev_center(spec(), cfg_.conic);
}

bool ElicitationSession::was_asked(std::size_t i, std::size_t j) const {
  return asked_.count(unordered(i, j)) > 0;
}

ConfidenceSetSpec ElicitationSession::spec() const { return make_spec(prefs_, pool_, x0_); }

Question ElicitationSession::next_question() {
  switch (cfg_.strategy) {
    case Strategy::kExhaustive:
      if (cfg_.k != 2) {
        throw Error(ErrorCode::kInvalidArgument, "exhaustive selection supports k = 2 only");
      }
      return next_question_exhaustive(*this);
    case Strategy::kSimilarCost:
      return next_question_similar_cost(*this, cfg_.k, cfg_.gamma);
    case Strategy::kRandom:
      return next_question_random(*this, cfg_.k, rng_);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown strategy");
}

void ElicitationSession::apply_answer(const Question& q, const Answer& a) {
  const auto& opts = q.options;
  if (opts.size() < 2) throw Error(ErrorCode::kInvalidArgument, "question needs >= 2 options");
  for (auto i : opts) {
    if (i >= pool_.size()) throw Error(ErrorCode::kInvalidArgument, "option outside pool");
  }
  if (finished()) throw Error(ErrorCode::kBudgetExceeded, "question budget exhausted");
  PreferenceSet next = prefs_;
  if (a.kind == Answer::Kind::kIndifferent) {
    if (opts.size() != 2) {
      throw Error(ErrorCode::kInvalidArgument, "indifference is only defined for k = 2");
    }
    next.add(opts[0], opts[1]);
    next.add(opts[1], opts[0]);
  } else {
    if (std::find(opts.begin(), opts.end(), a.index) == opts.end()) {
      throw Error(ErrorCode::kInvalidArgument, "preferred index is not one of the options");
    }
    for (auto other : opts) {
      if (other != a.index) next.add(a.index, other);
    }
  }

  const ConfidenceSetSpec next_spec = make_spec(next, pool_, x0_);
  CenterResult center = chebyshev_center(next_spec, cfg_.conic);
  std::vector<std::size_t> violated;
  if (center.status == SolverStatus::kInfeasible) {
    if (cfg_.alpha <= 0.0) {
      throw Error(ErrorCode::kInfeasible, "answers are inconsistent and tolerance is disabled");
    }
    const TolerantCenterResult tol = tolerant_center(
        next_spec, cfg_.alpha, 0.0, ToleranceObjective::kFewestViolations, cfg_.conic);
    center = CenterResult{tol.center, tol.radius, tol.radius, SolverStatus::kOptimal};
    violated = tol.violated;
  }

  prefs_ = std::move(next);
  for (std::size_t x = 0; x < opts.size(); ++x)
    for (std::size_t y = x + 1; y < opts.size(); ++y) asked_.insert(unordered(opts[x], opts[y]));
  ++round_;
  incumbent_ = center;
  violated_ = violated;
  transcript_.push_back(
      {round_, opts, a, incumbent_.center.entries(), incumbent_.radius, violated_});
}

Question next_question_exhaustive(const ElicitationSession& s) {
  const auto& pool = s.pool();
  const std::size_t n = pool.size();
  const std::vector<double> costs = center_costs(s);
  std::vector<Vector> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = pool[i] - s.x0();

  double best = std::numeric_limits<double>::infinity();
  std::optional<std::pair<std::size_t, std::size_t>> arg;
  Vector a(s.x0().size()), b(s.x0().size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      a = u[i] + u[j];
      b = u[i] - u[j];
      const double norm = cut_norm(a, b);
      if (norm <= kZeroCutNorm) continue;
      const double dist = std::abs(costs[i] - costs[j]) / norm;
      if (dist < best && !s.was_asked(i, j)) {
        best = dist;
        arg = {i, j};
      }
    }
  }
  if (!arg) throw Error(ErrorCode::kPoolExhausted, "every candidate pair has been asked");
  return {{arg->first, arg->second}, best};
}

Question next_question_similar_cost(const ElicitationSession& s, int k,
                                    std::optional<double> gamma) {
  if (k < 2) throw Error(ErrorCode::kInvalidArgument, "k must be >= 2");
  const auto kk = static_cast<std::size_t>(k);
  const std::size_t n = s.pool().size();
  g_windows_examined = 0;
  if (n < kk) throw Error(ErrorCode::kPoolExhausted, "pool smaller than k");
  const std::vector<double> costs = center_costs(s);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return costs[x] < costs[y] || (costs[x] == costs[y] && x < y);
  });

  // Distance of each adjacent sorted pair; nullopt marks a degenerate cut.
  const Matrix& c = s.incumbent().center.entries();
  std::vector<std::optional<double>> adjacent(n - 1);
  for (std::size_t p = 0; p + 1 < n; ++p) {
    adjacent[p] = projection_distance(c, s.pool()[order[p]], s.pool()[order[p + 1]], s.x0());
  }

  std::optional<Question> best;
  std::vector<std::size_t> opts(kk);
  for (std::size_t p = 0; p + kk <= n; ++p) {
    ++g_windows_examined;
    double total = 0.0;
    bool admissible = true;
    for (std::size_t q = p; q + 1 < p + kk; ++q) {
      if (!adjacent[q] || (gamma && costs[order[q + 1]] - costs[order[q]] <= *gamma)) {
        admissible = false;
        break;
      }
      total += *adjacent[q];
    }
    if (!admissible) continue;
    const double mean = total / static_cast<double>(kk - 1);
    if (best && mean >= best->projection_distance) continue;
    std::copy(order.begin() + static_cast<std::ptrdiff_t>(p),
              order.begin() + static_cast<std::ptrdiff_t>(p + kk), opts.begin());
    if (any_pair_asked(s, opts)) continue;
    best = Question{opts, mean};
  }
  if (!best) throw Error(ErrorCode::kPoolExhausted, "no admissible similar-cost window");
  return *best;
}

std::size_t last_similar_cost_windows() { return g_windows_examined; }

Question next_question_random(const ElicitationSession& s, int k, Rng& rng) {
  if (k < 2) throw Error(ErrorCode::kInvalidArgument, "k must be >= 2");
  const auto kk = static_cast<std::size_t>(k);
  const std::size_t n = s.pool().size();
  if (n < kk) throw Error(ErrorCode::kPoolExhausted, "pool smaller than k");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    for (std::size_t p = 0; p < kk; ++p) {
      std::uniform_int_distribution<std::size_t> pick(p, n - 1);
      std::swap(idx[p], idx[pick(rng)]);
    }
    std::vector<std::size_t> opts(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(kk));
    if (any_pair_asked(s, opts)) continue;
    if (const auto d = mean_distance(s, opts)) return {opts, *d};
  }
  throw Error(ErrorCode::kPoolExhausted, "no unasked random question found");
}

Answer respond_simulated(const CostMatrix& truth, const Question& q,
                         const ElicitationSession& s, double indiff_band, double flip_prob,
                         Rng& rng) {
  const auto& opts = q.options;
  if (opts.size() < 2) throw Error(ErrorCode::kInvalidArgument, "question needs >= 2 options");
  std::vector<double> c(opts.size());
  for (std::size_t n = 0; n < opts.size(); ++n) c[n] = cost(truth, s.pool()[opts[n]], s.x0());

  Answer answer;
  std::size_t chosen = 0;
  if (opts.size() == 2) {
    if (c[0] < c[1] - indiff_band) {
      chosen = 0;
    } else if (c[1] < c[0] - indiff_band) {
      chosen = 1;
    } else {
      answer = Answer::indifferent();
    }
  } else {
    for (std::size_t n = 1; n < opts.size(); ++n) {
      if (c[n] < c[chosen] || (c[n] == c[chosen] && opts[n] < opts[chosen])) chosen = n;
    }
  }
  if (flip_prob > 0.0) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const bool flip = unit(rng) < flip_prob;
    if (flip && answer.kind == Answer::Kind::kPreferred) {
      std::uniform_int_distribution<std::size_t> other(0, opts.size() - 2);
      std::size_t pos = other(rng);
      if (pos >= chosen) ++pos;
      chosen = pos;
    }
  }
  if (answer.kind == Answer::Kind::kPreferred) answer.index = opts[chosen];
  return answer;
}

SessionOutcome run_session(ElicitationSession& session, const Responder& responder) {
  SessionOutcome out;
  while (!session.finished()) {
    const Question q = session.next_question();
    const auto answer = responder(q, session);
    if (!answer) {
      out.paused = true;
      break;
    }
    session.apply_answer(q, *answer);
  }
  out.center = session.incumbent();
  out.transcript = session.transcript();
  return out;
}

SessionOutcome run_session(const FeatureVector& x0, const std::vector<FeatureVector>& pool,
                           const CostMatrix& truth, const SessionConfig& cfg,
                           double indiff_band, double flip_prob) {
  ElicitationSession session(x0, pool, cfg);
  Rng responder_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  return run_session(session, [&](const Question& q, const ElicitationSession& s) {
    return std::optional<Answer>(
        respond_simulated(truth, q, s, indiff_band, flip_prob, responder_rng));
  });
}

nlohmann::json to_json(const Answer& a) {
  if (a.kind == Answer::Kind::kIndifferent) return {{"kind", "indifferent"}};
  return {{"kind", "preferred"}, {"index", a.index}};
}

Answer answer_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    throw Error(ErrorCode::kParse, "answer must be an object with a string 'kind'");
  }
  const std::string kind = j["kind"];
  if (kind == "indifferent") return Answer::indifferent();
  if (kind == "preferred") {
    if (!j.contains("index") || !j["index"].is_number_integer() || j["index"].get<long long>() < 0) {
      throw Error(ErrorCode::kParse, "preferred answer needs a non-negative 'index'");
    }
    return Answer::preferred(j["index"].get<std::size_t>());
  }
  throw Error(ErrorCode::kParse, "unknown answer kind: " + kind);
}

nlohmann::json to_json(const TranscriptEntry& e) {
  nlohmann::json j = {{"round", e.round},
                      {"option_indices", e.options},
                      {"answer", to_json(e.answer)},
                      {"center", to_json(e.center)},
                      {"radius", e.radius}};
  if (!e.violated.empty()) j["violated"] = e.violated;
  return j;
}

nlohmann::json transcript_to_json(const std::vector<TranscriptEntry>& t) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : t) arr.push_back(to_json(e));
  return arr;
}

}  // namespace reap
