#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "reap/conic.hpp"
#include "reap/core.hpp"

namespace reap {

using Rng = std::mt19937_64;

// Ground-truth generators.

/// A = G G^T / sigma_max(G G^T) with G iid standard normal.
CostMatrix gen_truth_random(Eigen::Index d, Rng& rng);

/// Fixed point Q = A (R + A)^{-1} A reached by iterating
/// A <- Q + A - A (R + A)^{-1} A from A = Q + I.
CostMatrix gen_truth_lqr(const Matrix& q, const Matrix& r, double tol = 1e-10,
                         int max_iter = 100000);

/// (I - W)^T D^{-1} (I - W); not normalised.
CostMatrix gen_truth_causal(const Matrix& w, const Matrix& d);

/// Frobenius distance from `center` to the hyperplane <A, M_ij> = 0, or nullopt
/// when M_ij vanishes.
std::optional<double> projection_distance(const Matrix& center, const FeatureVector& xi,
                                          const FeatureVector& xj, const FeatureVector& x0);

enum class Strategy { kExhaustive, kSimilarCost, kRandom };

const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

struct Question {
  std::vector<std::size_t> options;
  double projection_distance = 0.0;
};

struct Answer {
  enum class Kind { kPreferred, kIndifferent };
  Kind kind = Kind::kPreferred;
  std::size_t index = 0;  // pool index of the preferred option

  static Answer preferred(std::size_t i) { return {Kind::kPreferred, i}; }
  static Answer indifferent() { return {Kind::kIndifferent, 0}; }
  friend bool operator==(const Answer&, const Answer&) = default;
};

struct SessionConfig {
  int budget = 5;                     // T
  Strategy strategy = Strategy::kSimilarCost;
  int k = 2;                          // options per question
  double margin = 0.01;               // epsilon
  double alpha = 0.0;                 // tolerant fallback budget; 0 disables
  std::optional<double> gamma;        // similar-cost inconsistency threshold
  std::uint64_t seed = 0;
  ConicOptions conic;
};

struct TranscriptEntry {
  int round = 0;
  std::vector<std::size_t> options;
  Answer answer;
  Matrix center;
  double radius = 0.0;
  std::vector<std::size_t> violated;  // non-empty only after a tolerant fallback
};

class ElicitationSession {
 public:
  ElicitationSession(FeatureVector x0, std::vector<FeatureVector> pool, SessionConfig cfg);

  const FeatureVector& x0() const { return x0_; }
  const std::vector<FeatureVector>& pool() const { return pool_; }
  const PreferenceSet& prefs() const { return prefs_; }
  const SessionConfig& config() const { return cfg_; }
  int round() const { return round_; }
  bool finished() const { return round_ >= cfg_.budget; }
  const CenterResult& incumbent() const { return incumbent_; }
  const std::vector<std::size_t>& violated() const { return violated_; }
  const std::vector<TranscriptEntry>& transcript() const { return transcript_; }
  bool was_asked(std::size_t i, std::size_t j) const;
  ConfidenceSetSpec spec() const;

  /// Selects the next question with the configured strategy. Throws
  /// kPoolExhausted when no admissible question remains.
  Question next_question();

  /// Records the answer, re-solves the center and advances the round. Throws
  /// kInfeasible when the preferences leave no interior even after the
  /// tolerant fallback; the session is left unchanged in that case.
  void apply_answer(const Question& q, const Answer& a);

 private:
  FeatureVector x0_;
  std::vector<FeatureVector> pool_;
  SessionConfig cfg_;
  PreferenceSet prefs_;
  int round_ = 0;
  CenterResult incumbent_;
  std::vector<std::size_t> violated_;
  std::set<std::pair<std::size_t, std::size_t>> asked_;
  std::vector<TranscriptEntry> transcript_;
  Rng rng_;
};

// Question selectors; exposed for tests and timing.
Question next_question_exhaustive(const ElicitationSession& s);
Question next_question_similar_cost(const ElicitationSession& s, int k,
                                    std::optional<double> gamma = std::nullopt);
Question next_question_random(const ElicitationSession& s, int k, Rng& rng);

// Number of windows the similar-cost heuristic evaluated on its last call in
// this thread.
std::size_t last_similar_cost_windows();

/// Simulated subject answering from a truth matrix.
Answer respond_simulated(const CostMatrix& truth, const Question& q,
                         const ElicitationSession& s, double indiff_band, double flip_prob,
                         Rng& rng);

// Returns nullopt when the subject did not answer in time; the session then
// pauses and can be resumed with another run_session call.
using Responder = std::function<std::optional<Answer>(const Question&, const ElicitationSession&)>;

struct SessionOutcome {
  CenterResult center;
  std::vector<TranscriptEntry> transcript;
  bool paused = false;
};

SessionOutcome run_session(ElicitationSession& session, const Responder& responder);

/// Convenience overload with a noise-free simulated subject.
SessionOutcome run_session(const FeatureVector& x0, const std::vector<FeatureVector>& pool,
                           const CostMatrix& truth, const SessionConfig& cfg,
                           double indiff_band = 0.0, double flip_prob = 0.0);

nlohmann::json to_json(const Answer& a);
Answer answer_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TranscriptEntry& e);
nlohmann::json transcript_to_json(const std::vector<TranscriptEntry>& t);

}  // namespace reap
