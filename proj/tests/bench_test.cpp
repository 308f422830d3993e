#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "reap/bench.hpp"
#include "reap/error.hpp"
#include "test_support.hpp"

namespace reap {
namespace {

TEST(MeanRank, PerfectRetrievalIsZero) {
  std::mt19937_64 rng(3);
  const FeatureVector x0 = testing::random_vector(rng, 3);
  std::vector<FeatureVector> pool;
  for (int i = 0; i < 30; ++i) pool.push_back(testing::random_vector(rng, 3));
  const CostMatrix truth(testing::random_psd(rng, 3));
  EXPECT_DOUBLE_EQ(mean_rank(truth, truth, pool, x0, 5), 0.0);
}

TEST(MeanRank, FormulaExample) {
  EXPECT_NEAR(mean_rank_from_ranks({3, 4}, 4), 4.0 / 7.0, 1e-15);
}

TEST(MeanRank, FullSelectionIgnoresCenter) {
  std::mt19937_64 rng(4);
  const FeatureVector x0 = testing::random_vector(rng, 2);
  std::vector<FeatureVector> pool;
  for (int i = 0; i < 12; ++i) pool.push_back(testing::random_vector(rng, 2));
  const CostMatrix truth(testing::random_psd(rng, 2));
  const double expected = mean_rank_from_ranks({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}, 12);
  for (int trial = 0; trial < 5; ++trial) {
    const CostMatrix center(testing::random_psd(rng, 2));
    EXPECT_DOUBLE_EQ(mean_rank(center, truth, pool, x0, 12), expected);
  }
}

TEST(MeanRank, RejectsKAbovePool) {
  const std::vector<FeatureVector> pool(3, FeatureVector::Zero(2));
  const CostMatrix a = CostMatrix::identity(2);
  EXPECT_THROW(mean_rank(a, a, pool, FeatureVector::Zero(2), 4), Error);
}

TEST(Wilcoxon, AllNegativeFive) {
  EXPECT_NEAR(wilcoxon_one_sided({-1, -2, -3, -4, -5}), 1.0 / 32.0, 1e-15);
}

TEST(Wilcoxon, SymmetricPairsNearHalf) {
  const double p = wilcoxon_one_sided({-1, 1, -2, 2, -3, 3});
  EXPECT_GT(p, 0.5);
  EXPECT_LT(p, 0.65);
}

TEST(Wilcoxon, TooFewNonzero) {
  EXPECT_THROW(wilcoxon_one_sided({-1, -2, 0, 0, -3, -4}), Error);
  EXPECT_THROW(wilcoxon_one_sided({0, 0, 0, 0, 0}), Error);
}

// P(W+ <= observed) by enumerating all 2^n sign patterns of the same midranks.
double brute_force_p(const std::vector<double>& d) {
  const std::size_t n = d.size();
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double below = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(d[j]) < std::abs(d[i])) ++below;
      if (std::abs(d[j]) == std::abs(d[i])) ++equal;
    }
    rank[i] = below + (equal + 1.0) / 2.0;
  }
  double observed = 0;
  for (std::size_t i = 0; i < n; ++i) observed += d[i] > 0 ? rank[i] : 0.0;
  std::size_t hits = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double w = 0;
    for (std::size_t i = 0; i < n; ++i) w += (mask >> i & 1) ? rank[i] : 0.0;
    hits += w <= observed + 1e-9 ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(std::size_t{1} << n);
}

TEST(Wilcoxon, ExactMatchesEnumerationWithTies) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> v(-4, 3);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> d;
    while (d.size() < 12) {
      const int x = v(rng);
      if (x != 0) d.push_back(x);
    }
    EXPECT_NEAR(wilcoxon_one_sided(d), brute_force_p(d), 1e-12);
  }
}

TEST(Wilcoxon, NormalApproximationTracksExactTail) {
  // n = 21 leaves the exact branch; the enumeration oracle still handles it.
  std::vector<double> d;
  for (int i = 1; i <= 21; ++i) d.push_back(i % 3 == 0 ? i : -i);
  EXPECT_NEAR(wilcoxon_one_sided(d), brute_force_p(d), 5e-3);
  std::vector<double> all_neg;
  for (int i = 1; i <= 40; ++i) all_neg.push_back(-i);
  EXPECT_LT(wilcoxon_one_sided(all_neg), 1e-6);
}

TEST(ExperimentConfig, JsonRoundTrip) {
  ExperimentConfig c;
  c.t_values = {0, 3};
  c.num_truths = 4;
  c.strategy = Strategy::kRandom;
  c.k = 3;
  c.methods = {Method::kGraphWorstCase, Method::kFace};
  c.seed = 99;
  c.graph.symmetrize = true;
  const ExperimentConfig back = ExperimentConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.strategy_label(), "random3");
}

TEST(ExperimentConfig, RejectsBadValues) {
  EXPECT_THROW(ExperimentConfig::from_json({{"num_truths", 0}}), Error);
  EXPECT_THROW(ExperimentConfig::from_json({{"t_values", {0, -1}}}), Error);
  EXPECT_THROW(ExperimentConfig::from_json({{"methods", {"dice"}}}), Error);
}

TEST(Seeds, DerivedSeedsDiffer) {
  EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
  EXPECT_NE(derive_seed(1, 2, 0), derive_seed(2, 2, 0));
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.dataset.synthetic_n = 400;
  c.t_values = {0, 2};
  c.recourse_t_values = {0, 2};
  c.report_t = 2;
  c.num_truths = 2;
  c.num_subjects = 3;
  c.pool_size = 60;
  c.graph_nodes = 120;
  c.train.epochs = 40;
  c.methods = {Method::kGrad, Method::kWachter, Method::kGraph, Method::kGraphWorstCase, Method::kFace};
  c.seed = 5;
  return c;
}

class SmallExperiment : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { report_ = new Report(run_experiment(small_config())); }
  static void TearDownTestSuite() { delete report_; }
  static Report* report_;
};
Report* SmallExperiment::report_ = nullptr;

TEST_F(SmallExperiment, TZeroGradEqualsWachter) {
  std::map<std::pair<std::size_t, std::size_t>, double> grad, wachter;
  for (const auto& r : report_->rows) {
    if (r.t != 0 || !r.cost) continue;
    if (r.method == "reap-grad") grad[{r.truth_id, r.subject_id}] = *r.cost;
    if (r.method == "wachter") wachter[{r.truth_id, r.subject_id}] = *r.cost;
  }
  ASSERT_EQ(grad.size(), 6u);
  for (const auto& [key, c] : grad) EXPECT_EQ(c, wachter.at(key));
}

TEST_F(SmallExperiment, GraphPlansAlwaysValid) {
  std::size_t seen = 0;
  for (const auto& r : report_->rows) {
    if (r.method == "reap-graph" || r.method == "reap-graph-wc" || r.method == "face") {
      if (!r.error.empty()) continue;
      ASSERT_TRUE(r.validity);
      EXPECT_EQ(*r.validity, 1.0);
      ++seen;
    }
  }
  EXPECT_GT(seen, 0u);
}

TEST_F(SmallExperiment, CostsAreUnderTheTruth) {
  // The Wachter point ignores the truth, so its cost can only vary with the
  // truth it is graded under.
  std::map<std::size_t, double> by_truth;
  for (const auto& r : report_->rows) {
    if (r.method == "wachter" && r.t == 0 && r.subject_id == 0 && r.cost) by_truth[r.truth_id] = *r.cost;
  }
  ASSERT_EQ(by_truth.size(), 2u);
  EXPECT_NE(by_truth[0], by_truth[1]);
}

TEST_F(SmallExperiment, CellsCarrySampleCounts) {
  for (const auto& c : report_->cells) {
    for (const auto& [name, s] : c.metrics) {
      EXPECT_GT(s.n, 0u);
      EXPECT_EQ(s.std.has_value(), s.n >= 2) << c.method << ' ' << name;
    }
  }
  ASSERT_NE(report_->cell("elicit-similar2", 2), nullptr);
  EXPECT_EQ(report_->comparisons.size(), 3u);
}

TEST_F(SmallExperiment, RawCsvShape) {
  const std::string csv = raw_csv(*report_);
  EXPECT_EQ(csv.rfind("dataset,method,T,truth_id,subject_id,seed,validity,cost,path_cost,mean_rank,time_ms\n", 0), 0u);
  // 2 truths x 3 subjects x (2 elicit rows + 2 T x 5 methods)
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 6 * 12);
  const auto j = report_json(*report_);
  EXPECT_EQ(j["header"]["mean_rank_k"], 10);
}

TEST_F(SmallExperiment, DeterministicAcrossThreadCounts) {
  ExperimentConfig c = small_config();
  c.threads = 3;
  EXPECT_EQ(raw_csv(run_experiment(c)), raw_csv(*report_));
}

TEST(HeuristicTiming, SmallPoolsAgree) {
  const auto rows = heuristic_timing({50, 100}, 1, 2);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) EXPECT_LE(r.relative_gap, 1e-2);
  EXPECT_NE(timing_csv(rows).find("relative_gap"), std::string::npos);
}

}  // namespace
}  // namespace reap
