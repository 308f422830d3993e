#include "reap/elicit.hpp"

#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "test_support.hpp"

namespace reap {
namespace {

double max_eig(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

// Distance of `center` to <A, M> = 0 from the explicit cut matrix.
double brute_distance(const Matrix& center, const FeatureVector& xi, const FeatureVector& xj,
                      const FeatureVector& x0) {
  const Matrix m = pair_matrix(xi, xj, x0).entries();
  return std::abs(frobenius_inner(center, m)) / m.norm();
}

std::vector<FeatureVector> scalar_pool(std::initializer_list<double> xs) {
  std::vector<FeatureVector> pool;
  for (double x : xs) pool.push_back(Vector::Constant(1, x));
  return pool;
}

TEST(GenTruthRandom, ScalarIsOne) {
  Rng rng(3);
  for (int n = 0; n < 20; ++n) EXPECT_EQ(gen_truth_random(1, rng).entries()(0, 0), 1.0);
}

TEST(GenTruthRandom, UnitSpectralRadiusAndReplay) {
  for (int d = 2; d <= 8; ++d) {
    Rng a(42 + d), b(42 + d);
    const CostMatrix m1 = gen_truth_random(d, a);
    const CostMatrix m2 = gen_truth_random(d, b);
    EXPECT_NEAR(max_eig(m1.entries()), 1.0, 1e-9);
    EXPECT_EQ(m1.entries(), m2.entries());
  }
}

TEST(GenTruthLqr, ScalarGoldenRatio) {
  const CostMatrix a = gen_truth_lqr(Matrix::Ones(1, 1), Matrix::Ones(1, 1));
  EXPECT_NEAR(a.entries()(0, 0), (1.0 + std::sqrt(5.0)) / 2.0, 1e-9);
}

TEST(GenTruthLqr, ZeroStateCost) {
  const CostMatrix a = gen_truth_lqr(Matrix::Zero(3, 3), Matrix::Identity(3, 3));
  EXPECT_EQ(a.entries().norm(), 0.0);
}

TEST(GenTruthLqr, RiccatiResidualOnRandomPairs) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> dims(1, 5);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = dims(rng);
    const Matrix q = testing::random_psd(rng, d) + 0.1 * Matrix::Identity(d, d);
    const Matrix r = testing::random_psd(rng, d) + 0.1 * Matrix::Identity(d, d);
    const Matrix a = gen_truth_lqr(q, r).entries();
    const Matrix residual = q - a * (r + a).inverse() * a;
    EXPECT_LE(residual.norm(), 1e-8) << "trial " << trial;
  }
}

TEST(GenTruthCausal, Examples) {
  EXPECT_TRUE(gen_truth_causal(Matrix::Zero(3, 3), Matrix::Identity(3, 3))
                  .entries()
                  .isApprox(Matrix::Identity(3, 3)));
  const double w = 0.7;
  const Matrix expected{{1.0 + w * w, -w}, {-w, 1.0}};
  const Matrix got =
      gen_truth_causal(Matrix{{0.0, 0.0}, {w, 0.0}}, Matrix::Identity(2, 2)).entries();
  EXPECT_TRUE(got.isApprox(expected, 1e-14));
  EXPECT_THROW(gen_truth_causal(Matrix::Identity(2, 2), Matrix::Identity(2, 2)), Error);
}

TEST(GenTruthCausal, PositiveDefinite) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix w = 0.5 * testing::random_symmetric(rng, 4);
    for (int i = 0; i < 4; ++i) w(i, i) = 0.0;
    const Matrix d = testing::random_psd(rng, 4) + 0.2 * Matrix::Identity(4, 4);
    const Matrix a = gen_truth_causal(w, d).entries();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
    EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(ProjectionDistance, MatchesExplicitCut) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 500; ++trial) {
    const Matrix c = testing::random_psd(rng, 4);
    const Vector xi = testing::random_vector(rng, 4), xj = testing::random_vector(rng, 4),
                 x0 = testing::random_vector(rng, 4);
    EXPECT_NEAR(*projection_distance(c, xi, xj, x0), brute_distance(c, xi, xj, x0), 1e-10);
  }
  const Vector x = Vector::Constant(2, 0.3);
  EXPECT_FALSE(projection_distance(Matrix::Identity(2, 2), x, x, Vector::Zero(2)));
}

TEST(Exhaustive, TwoCandidatesForced) {
  SessionConfig cfg;
  cfg.strategy = Strategy::kExhaustive;
  ElicitationSession s(Vector::Zero(2), {Vector{{1.0, 0.0}}, Vector{{0.0, 3.0}}}, cfg);
  const Question q = next_question_exhaustive(s);
  EXPECT_EQ(q.options, (std::vector<std::size_t>{0, 1}));
}

TEST(Exhaustive, MatchesBruteForceRanking) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector x0 = testing::random_vector(rng, 2);
    std::vector<FeatureVector> pool;
    for (int n = 0; n < 3; ++n) pool.push_back(testing::random_vector(rng, 2));
    ElicitationSession s(x0, pool, SessionConfig{});
    const Matrix c = s.incumbent().center.entries();
    double best = 1e300;
    std::vector<std::size_t> arg;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = i + 1; j < 3; ++j) {
        const double d = brute_distance(c, pool[i], pool[j], x0);
        if (d < best) {
          best = d;
          arg = {i, j};
        }
      }
    const Question q = next_question_exhaustive(s);
    EXPECT_EQ(q.options, arg);
    EXPECT_NEAR(q.projection_distance, best, 1e-12);
  }
}

TEST(Exhaustive, SkipsDuplicateCandidates) {
  const std::vector<FeatureVector> pool{Vector{{0.5, 0.5}}, Vector{{0.5, 0.5}},
                                        Vector{{0.9, 0.1}}};
  ElicitationSession s(Vector::Zero(2), pool, SessionConfig{});
  const Question q = next_question_exhaustive(s);
  EXPECT_NE(q.options, (std::vector<std::size_t>{0, 1}));
}

TEST(Exhaustive, ExhaustedPoolThrows) {
  SessionConfig cfg;
  cfg.strategy = Strategy::kExhaustive;
  ElicitationSession s(Vector::Zero(1), scalar_pool({0.2, 0.5}), cfg);
  s.apply_answer(s.next_question(), Answer::preferred(0));
  try {
    next_question_exhaustive(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPoolExhausted);
  }
}

// Costs under the 1/2 I center are x^2 / 2; pick x so they are 0.20, 0.21, 0.90.
TEST(SimilarCost, ExaminesOnlyAdjacentPairs) {
  const auto pool = scalar_pool({std::sqrt(1.8), std::sqrt(0.4), std::sqrt(0.42)});
  ElicitationSession s(Vector::Zero(1), pool, SessionConfig{});
  const Question q = next_question_similar_cost(s, 2);
  EXPECT_EQ(last_similar_cost_windows(), 2u);
  // In one dimension every distance is 1/2, so the first sorted window wins.
  EXPECT_EQ(q.options, (std::vector<std::size_t>{1, 2}));
  EXPECT_NEAR(q.projection_distance, 0.5, 1e-12);
}

TEST(SimilarCost, WindowCountIsNMinusKPlusOne) {
  std::mt19937_64 rng(4);
  std::vector<FeatureVector> pool;
  for (int n = 0; n < 40; ++n) pool.push_back(testing::random_vector(rng, 3));
  ElicitationSession s(testing::random_vector(rng, 3), pool, SessionConfig{});
  for (int k = 2; k <= 6; ++k) {
    next_question_similar_cost(s, k);
    EXPECT_EQ(last_similar_cost_windows(), 40u - static_cast<std::size_t>(k) + 1u);
  }
}

TEST(SimilarCost, FullWindowWhenKEqualsN) {
  const auto pool = scalar_pool({0.1, 0.4, 0.7});
  ElicitationSession s(Vector::Zero(1), pool, SessionConfig{});
  const Question q = next_question_similar_cost(s, 3);
  EXPECT_EQ(q.options, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(SimilarCost, GammaKeepsOnlyWellSeparatedPairs) {
  // Costs 0.005, 0.045, 0.125, 0.245: gaps 0.04, 0.08, 0.12.
  const auto pool = scalar_pool({0.1, 0.3, 0.5, 0.7});
  ElicitationSession s(Vector::Zero(1), pool, SessionConfig{});
  EXPECT_EQ(next_question_similar_cost(s, 2, 0.1).options,
            (std::vector<std::size_t>{2, 3}));
  EXPECT_THROW(next_question_similar_cost(s, 2, 1.0), Error);
}

TEST(Respond, Examples) {
  const auto pool = scalar_pool({std::sqrt(0.5), 1.0});
  ElicitationSession s(Vector::Zero(1), pool, SessionConfig{});
  Rng rng(1);
  const CostMatrix truth = CostMatrix::identity(1);
  const Question q{{0, 1}, 0.0};
  EXPECT_EQ(respond_simulated(truth, q, s, 0.0, 0.0, rng), Answer::preferred(0));
  EXPECT_EQ(respond_simulated(truth, q, s, 0.6, 0.0, rng), Answer::indifferent());
  EXPECT_EQ(respond_simulated(truth, q, s, 0.0, 1.0, rng), Answer::preferred(1));

  const auto tied = scalar_pool({-0.5, 0.5});
  ElicitationSession t(Vector::Zero(1), tied, SessionConfig{});
  EXPECT_EQ(respond_simulated(truth, q, t, 0.0, 0.0, rng), Answer::indifferent());
}

TEST(Respond, KOptionTiesGoToLowestIndex) {
  const auto pool = scalar_pool({0.9, -0.3, 0.3});
  ElicitationSession s(Vector::Zero(1), pool, SessionConfig{});
  Rng rng(1);
  const Question q{{0, 2, 1}, 0.0};
  EXPECT_EQ(respond_simulated(CostMatrix::identity(1), q, s, 0.0, 0.0, rng),
            Answer::preferred(1));
}

TEST(ApplyAnswer, KOptionAddsKMinusOnePairs) {
  SessionConfig cfg;
  cfg.k = 3;
  ElicitationSession s(Vector::Zero(1), scalar_pool({0.2, 0.5, 0.9}), cfg);
  s.apply_answer(Question{{0, 1, 2}, 0.0}, Answer::preferred(0));
  ASSERT_EQ(s.prefs().size(), 2u);
  EXPECT_TRUE(s.prefs().contains(0, 1));
  EXPECT_TRUE(s.prefs().contains(0, 2));
  EXPECT_TRUE(s.was_asked(1, 2));
  EXPECT_EQ(s.round(), 1);
}

TEST(ApplyAnswer, IndifferenceAddsBothOrders) {
  ElicitationSession s(Vector::Zero(2), {Vector{{0.5, 0.1}}, Vector{{0.1, 0.5}}},
                       SessionConfig{});
  s.apply_answer(Question{{0, 1}, 0.0}, Answer::indifferent());
  EXPECT_TRUE(s.prefs().contains(0, 1));
  EXPECT_TRUE(s.prefs().contains(1, 0));
  EXPECT_EQ(s.spec().cuts.size(), 2u);
}

TEST(ApplyAnswer, RejectsMismatchedAnswer) {
  SessionConfig cfg;
  cfg.k = 3;
  ElicitationSession s(Vector::Zero(1), scalar_pool({0.2, 0.5, 0.9, 1.0}), cfg);
  EXPECT_THROW(s.apply_answer(Question{{0, 1, 2}, 0.0}, Answer::preferred(3)), Error);
  EXPECT_THROW(s.apply_answer(Question{{0, 1, 2}, 0.0}, Answer::indifferent()), Error);
  EXPECT_EQ(s.round(), 0);
}

TEST(ApplyAnswer, ContradictionWithoutToleranceLeavesSessionUnchanged) {
  SessionConfig cfg;
  cfg.margin = 0.0;
  cfg.budget = 3;
  ElicitationSession s(Vector::Zero(1), scalar_pool({1.0, 2.0, 3.0}), cfg);
  s.apply_answer(Question{{0, 1}, 0.0}, Answer::preferred(0));
  s.apply_answer(Question{{1, 2}, 0.0}, Answer::preferred(1));
  EXPECT_EQ(s.round(), 2);
  // x = 3 over x = 1 forces a <= 0, leaving no interior.
  EXPECT_THROW(s.apply_answer(Question{{0, 2}, 0.0}, Answer::preferred(2)), Error);
  EXPECT_EQ(s.round(), 2);
}

TEST(ApplyAnswer, ToleranceFallbackDropsACut) {
  SessionConfig cfg;
  cfg.margin = 0.0;
  cfg.alpha = 0.5;
  ElicitationSession s(Vector::Zero(1), scalar_pool({1.0, 2.0}), cfg);
  // Equal treatment under eps = 0: both orders at once leaves no interior.
  s.apply_answer(Question{{0, 1}, 0.0}, Answer::indifferent());
  EXPECT_EQ(s.violated().size(), 1u);
  EXPECT_GT(s.incumbent().radius, 0.0);
}

TEST(RunSession, ZeroBudgetReturnsHalfIdentity) {
  SessionConfig cfg;
  cfg.budget = 0;
  const auto out =
      run_session(Vector::Zero(3), {Vector::Ones(3), Vector::Constant(3, 0.5)},
                  CostMatrix::identity(3), cfg);
  EXPECT_EQ(out.center.center.entries(), 0.5 * Matrix::Identity(3, 3));
  EXPECT_EQ(out.center.radius, 0.5);
  EXPECT_TRUE(out.transcript.empty());
}

TEST(RunSession, SingleQuestionBudget) {
  SessionConfig cfg;
  cfg.budget = 1;
  const auto out = run_session(Vector::Zero(2), {Vector{{0.2, 0.4}}, Vector{{0.5, 0.1}}},
                               CostMatrix::identity(2), cfg);
  ASSERT_EQ(out.transcript.size(), 1u);
}

TEST(RunSession, PausesWhenResponderTimesOut) {
  SessionConfig cfg;
  cfg.budget = 2;
  ElicitationSession s(Vector::Zero(1), scalar_pool({0.2, 0.5, 0.9}), cfg);
  const auto out = run_session(s, [](const Question&, const ElicitationSession&) {
    return std::optional<Answer>();
  });
  EXPECT_TRUE(out.paused);
  EXPECT_EQ(s.round(), 0);
}

struct SessionFixture {
  FeatureVector x0;
  std::vector<FeatureVector> pool;
  CostMatrix truth = CostMatrix::identity(1);
};

SessionFixture random_fixture(std::uint64_t seed, int d, int n) {
  std::mt19937_64 rng(seed);
  SessionFixture f;
  f.x0 = testing::random_vector(rng, d);
  for (int i = 0; i < n; ++i) f.pool.push_back(testing::random_vector(rng, d));
  f.truth = gen_truth_random(d, rng);
  return f;
}

TEST(RunSession, ReplayIsDeterministic) {
  const auto f = random_fixture(99, 3, 30);
  for (Strategy st : {Strategy::kExhaustive, Strategy::kSimilarCost, Strategy::kRandom}) {
    SessionConfig cfg;
    cfg.budget = 6;
    cfg.strategy = st;
    cfg.seed = 7;
    const auto a = run_session(f.x0, f.pool, f.truth, cfg);
    const auto b = run_session(f.x0, f.pool, f.truth, cfg);
    EXPECT_EQ(transcript_to_json(a.transcript).dump(),
              transcript_to_json(b.transcript).dump());
  }
}

// Noise-free sessions: no repeated pair, truth stays inside U_P, radius never
// grows after the first answer.
TEST(RunSession, NoiseFreeInvariants) {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto f = random_fixture(seed, 2 + static_cast<int>(seed % 3), 25);
    for (int k : {2, 3}) {
      SessionConfig cfg;
      cfg.budget = 8;
      cfg.k = k;
      cfg.strategy = seed % 2 == 0 || k == 3 ? Strategy::kSimilarCost : Strategy::kExhaustive;
      cfg.seed = seed;
      ElicitationSession s(f.x0, f.pool, cfg);
      Rng rng(seed);
      double prev_radius = 0.0;
      while (!s.finished()) {
        const Question q = s.next_question();
        for (std::size_t a = 0; a < q.options.size(); ++a)
          for (std::size_t b = a + 1; b < q.options.size(); ++b)
            ASSERT_FALSE(s.was_asked(q.options[a], q.options[b]));
        s.apply_answer(q, respond_simulated(f.truth, q, s, 0.0, 0.0, rng));
        for (const auto& cut : s.spec().cuts) {
          ASSERT_LE(frobenius_inner(f.truth.entries(), cut.entries()), cfg.margin + 1e-12);
        }
        if (s.round() > 1) {
          EXPECT_LE(s.incumbent().radius, prev_radius + 1e-7);
        }
        prev_radius = s.incumbent().radius;
      }
    }
  }
}

TEST(Transcript, JsonShape) {
  SessionConfig cfg;
  cfg.budget = 2;
  const auto out = run_session(Vector::Zero(1), scalar_pool({0.2, 0.5, 0.9}),
                               CostMatrix::identity(1), cfg);
  const auto j = transcript_to_json(out.transcript);
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0]["round"], 1);
  EXPECT_TRUE(j[0]["option_indices"].is_array());
  EXPECT_EQ(j[0]["answer"]["kind"], "preferred");
  EXPECT_TRUE(j[0]["center"].is_array());
  EXPECT_TRUE(j[0]["radius"].is_number());
  EXPECT_EQ(answer_from_json(j[0]["answer"]), out.transcript[0].answer);
  EXPECT_THROW(answer_from_json(nlohmann::json::parse(R"({"kind":"maybe"})")), Error);
}

}  // namespace
}  // namespace reap
