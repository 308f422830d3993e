#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include <nlohmann/json.hpp>

#include "reap/conic.hpp"
#include "reap/core.hpp"
#include "reap/data.hpp"

namespace reap {

struct GraphConfig {
  std::size_t k = 10;
  bool symmetrize = false;  // also add j -> i for every kNN edge i -> j
};

struct GraphEdge {
  std::size_t dst = 0;
  double weight = 0.0;
};

/// Directed kNN graph over x0 (node 0) and the candidate points (nodes 1..N).
struct RecourseGraph {
  Matrix points;            // row i holds node i
  std::vector<int> classes; // 1 = positive; node 0 is the subject
  std::vector<std::vector<GraphEdge>> adj;  // sorted by dst
  std::size_t k = 0;

  std::size_t size() const { return classes.size(); }
  std::size_t edge_count() const;
  FeatureVector node(std::size_t i) const { return points.row(static_cast<Eigen::Index>(i)).transpose(); }
  bool has_edge(std::size_t i, std::size_t j) const;
};

/// Euclidean kNN construction, ties broken by node index. Initial weights are
/// squared Euclidean lengths.
RecourseGraph build_graph(const FeatureVector& x0, const std::vector<FeatureVector>& points,
                          const std::vector<int>& classes, const GraphConfig& cfg = {});

/// Nodes are x0 followed by data rows in the given order, classed by the model.
RecourseGraph build_graph(const Dataset& data, const std::vector<std::size_t>& rows,
                          const Classifier& clf, const FeatureVector& x0,
                          const GraphConfig& cfg = {});

RecourseGraph assign_weights(RecourseGraph g, const CostMatrix& a);

/// w_ij = max over U_P of (x_i - x_j)^T A (x_i - x_j), for every edge.
RecourseGraph assign_worst_case_weights(RecourseGraph g, const ConfidenceSetSpec& spec,
                                        const ConicOptions& options = {});

struct SequentialPlan {
  std::vector<std::size_t> path;  // source first, positive terminal last
  double path_cost = 0.0;
  std::vector<double> edge_costs;
  int terminal_class = 1;
};

/// Edge weight evaluated on demand, e.g. a cached worst-case weight.
using EdgeWeight = std::function<double(std::size_t, std::size_t)>;

/// Worst-case weight of edge (i, j), solved lazily and memoised per unordered pair.
EdgeWeight worst_case_edge_weight(const RecourseGraph& g, const ConfidenceSetSpec& spec,
                                  const ConicOptions& options = {});

/// Dijkstra from `source` that stops at positive nodes without expanding them.
/// Throws kUnreachable when no positive node can be reached.
SequentialPlan shortest_sequential_recourse(const RecourseGraph& g, std::size_t source = 0);
SequentialPlan shortest_sequential_recourse(const RecourseGraph& g, const EdgeWeight& weight,
                                            std::size_t source = 0);

struct ExhaustiveOptions {
  std::size_t path_length_cap = 8;  // edges
  std::size_t budget = 10'000'000;  // candidate paths
  ConicOptions conic;
};

/// Enumerates every simple path ending at its first positive node and returns
/// the one minimising max over U_P of sum_edges (x_i - x_j)^T A (x_i - x_j).
/// edge_costs are evaluated at the maximising A, so they sum to path_cost.
SequentialPlan minmax_flow_exhaustive(const RecourseGraph& g, const ConfidenceSetSpec& spec,
                                      const ExhaustiveOptions& options = {},
                                      std::size_t source = 0);

/// Max over U_P of the path's total cost (exact sum of squares with no cuts).
WorstCaseResult path_worst_case(const RecourseGraph& g, const std::vector<std::size_t>& path,
                                const ConfidenceSetSpec& spec, const ConicOptions& options = {});

/// Sum of (x_i - x_j)^T A (x_i - x_j) along the path.
double path_cost(const RecourseGraph& g, const std::vector<std::size_t>& path, const CostMatrix& a);

double jaccard_edges(const SequentialPlan& a, const SequentialPlan& b);

/// {nodes:[{id, class, features}], edges:[{src, dst, weight}]}
nlohmann::json graph_to_json(const RecourseGraph& g);
nlohmann::json to_json(const SequentialPlan& plan);

}  // namespace reap
