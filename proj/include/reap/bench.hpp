#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reap/data.hpp"
#include "reap/elicit.hpp"
#include "reap/recourse_grad.hpp"
#include "reap/recourse_graph.hpp"

namespace reap {

/// Normalised mean rank of the top-K pool items under `center`, ranked by
/// `truth` (rank 1 = cheapest, ties by pool index). 0 is a perfect retrieval.
double mean_rank(const CostMatrix& center, const CostMatrix& truth,
                 const std::vector<FeatureVector>& pool, const FeatureVector& x0,
                 std::size_t k = 10);

/// (sum ranks - K(K+1)/2) / ((2N - K + 1) K / 2) for the selected true ranks.
double mean_rank_from_ranks(const std::vector<std::size_t>& ranks, std::size_t n);

/// One-sided Wilcoxon signed-rank p-value for "first smaller": small when the
/// paired differences (first - second) are mostly negative. Zero differences
/// are dropped; exact for n <= 20, normal approximation with continuity
/// correction beyond. Needs at least 5 nonzero differences.
double wilcoxon_one_sided(const std::vector<double>& differences);

enum class Method { kGrad, kWachter, kGraph, kGraphWorstCase, kFace };

const char* to_string(Method m);
Method method_from_string(const std::string& name);

struct DatasetSource {
  std::string name = "synthetic";
  std::string csv;     // empty = synthetic
  std::string schema;  // required with csv
  std::size_t synthetic_n = 1000;
};

struct ExperimentConfig {
  DatasetSource dataset;
  std::vector<int> t_values = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<int> recourse_t_values = {0, 5};  // T values where methods run
  std::size_t num_truths = 10;
  std::size_t num_subjects = 20;
  Strategy strategy = Strategy::kSimilarCost;
  int k = 2;
  double margin = 0.01;
  std::uint64_t seed = 0;
  std::vector<Method> methods = {Method::kGrad, Method::kWachter, Method::kGraph, Method::kFace};
  std::size_t mean_rank_k = 10;
  std::size_t pool_size = 500;    // cap on the positive candidate pool
  std::size_t graph_nodes = 1000; // cap on data rows in the recourse graph
  GraphConfig graph;
  GradConfig grad;
  TrainConfig train;
  int report_t = 5;
  std::size_t threads = 1;
  bool record_time = false;

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  /// Strategy label used in method names, e.g. "similar2", "similar3".
  std::string strategy_label() const;
};

struct TrialRow {
  std::string dataset;
  std::string method;
  int t = 0;
  std::size_t truth_id = 0;
  std::size_t subject_id = 0;
  std::uint64_t seed = 0;
  std::optional<double> validity, cost, path_cost, mean_rank, time_ms;
  std::string error;  // non-empty for a failed trial
};

struct Stat {
  std::size_t n = 0;
  double mean = 0.0;
  std::optional<double> std;  // sample std, n >= 2
};

struct Cell {
  std::string method;
  int t = 0;
  std::map<std::string, Stat> metrics;  // validity, cost, path_cost, mean_rank, time_ms
  std::size_t failures = 0;
};

struct Comparison {
  std::string first, second, metric;
  int t = 0;
  std::size_t pairs = 0;
  double mean_first = 0.0, mean_second = 0.0;
  std::optional<double> p_value;
  std::string note;
};

struct Report {
  std::string dataset;
  ExperimentConfig config;
  std::vector<TrialRow> rows;
  std::vector<Cell> cells;  // sorted by (method, T)
  std::vector<Comparison> comparisons;

  const Cell* cell(const std::string& method, int t) const;
};

/// Elicitation rows are named "elicit-<strategy label>"; recourse rows by method.
Report run_experiment(const ExperimentConfig& cfg);

Report summarize(const std::string& dataset, const ExperimentConfig& cfg,
                 std::vector<TrialRow> rows);

std::string raw_csv(const Report& r);
/// One row per method at the report T.
std::string report_csv(const Report& r);
nlohmann::json report_json(const Report& r);
/// Long format: dataset, method, T, metric, n, mean, std.
std::string sweep_csv(const Report& r);

struct TimingRow {
  std::size_t n = 0;
  double exhaustive_ms = 0.0;
  double heuristic_ms = 0.0;
  double exhaustive_objective = 0.0;
  double heuristic_objective = 0.0;
  double relative_gap = 0.0;
};

/// Question-selection time and objective of exhaustive search against the
/// similar-cost heuristic on 2-d synthetic pools of each size.
std::vector<TimingRow> heuristic_timing(const std::vector<std::size_t>& sizes, std::uint64_t seed,
                                        int rounds = 1);
std::string timing_csv(const std::vector<TimingRow>& rows);

/// Deterministic child seed from a base seed and two indices.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

}  // namespace reap
