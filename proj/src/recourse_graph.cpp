#include "reap/recourse_graph.hpp"

#include <algorithm>
#include <limits>
#include <memory>
#include <queue>
#include <set>
#include <unordered_map>
#include <utility>

namespace reap {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool has_cuts(const ConfidenceSetSpec& spec) {
  return std::any_of(spec.cuts.begin(), spec.cuts.end(),
                     [](const CutMatrix& c) { return c.norm() > 1e-13; });
}

Vector edge_vector(const RecourseGraph& g, std::size_t i, std::size_t j) {
  return (g.points.row(static_cast<Eigen::Index>(i)) - g.points.row(static_cast<Eigen::Index>(j))).transpose();
}

void check_node(const RecourseGraph& g, std::size_t i, const char* what) {
  if (i >= g.size()) throw Error(ErrorCode::kInvalidArgument, std::string(what) + ": node out of range");
}

}  // namespace

std::size_t RecourseGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& out : adj) n += out.size();
  return n;
}

bool RecourseGraph::has_edge(std::size_t i, std::size_t j) const {
  if (i >= adj.size()) return false;
  const auto& out = adj[i];
  return std::binary_search(out.begin(), out.end(), GraphEdge{j, 0.0},
                            [](const GraphEdge& a, const GraphEdge& b) { return a.dst < b.dst; });
}

RecourseGraph build_graph(const FeatureVector& x0, const std::vector<FeatureVector>& points,
                          const std::vector<int>& classes, const GraphConfig& cfg) {
  if (points.empty()) throw Error(ErrorCode::kInvalidArgument, "build_graph: no data points");
  if (classes.size() != points.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "build_graph: one class per point required");
  }
  const std::size_t n = points.size() + 1;
  if (cfg.k == 0 || cfg.k >= n) {
    throw Error(ErrorCode::kInvalidArgument,
                "build_graph: K must lie in [1, " + std::to_string(n - 1) + "]");
  }
  RecourseGraph g;
  g.k = cfg.k;
  g.points.resize(static_cast<Eigen::Index>(n), x0.size());
  g.points.row(0) = x0.transpose();
  g.classes.assign(n, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    require_same_dim(points[i].size(), x0.size(), "build_graph");
    g.points.row(static_cast<Eigen::Index>(i + 1)) = points[i].transpose();
    g.classes[i + 1] = classes[i];
  }

  std::vector<std::set<std::size_t>> out(n);
  std::vector<std::pair<double, std::size_t>> dist(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) dist[m++] = {edge_vector(g, i, j).squaredNorm(), j};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(cfg.k), dist.end());
    for (std::size_t r = 0; r < cfg.k; ++r) {
      out[i].insert(dist[r].second);
      if (cfg.symmetrize) out[dist[r].second].insert(i);
    }
  }
  g.adj.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : out[i]) g.adj[i].push_back({j, edge_vector(g, i, j).squaredNorm()});
  }
  return g;
}

RecourseGraph build_graph(const Dataset& data, const std::vector<std::size_t>& rows,
                          const Classifier& clf, const FeatureVector& x0, const GraphConfig& cfg) {
  std::vector<FeatureVector> points;
  std::vector<int> classes;
  points.reserve(rows.size());
  classes.reserve(rows.size());
  for (std::size_t r : rows) {
    points.push_back(data.row(r));
    classes.push_back(clf.predict(points.back()) ? 1 : 0);
  }
  return build_graph(x0, points, classes, cfg);
}

RecourseGraph assign_weights(RecourseGraph g, const CostMatrix& a) {
  require_same_dim(a.dim(), g.points.cols(), "assign_weights");
  const Matrix& m = a.entries();
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (auto& e : g.adj[i]) {
      const Vector v = edge_vector(g, i, e.dst);
      e.weight = std::max(0.0, v.dot(m * v));
    }
  }
  return g;
}

RecourseGraph assign_worst_case_weights(RecourseGraph g, const ConfidenceSetSpec& spec,
                                        const ConicOptions& options) {
  const EdgeWeight w = worst_case_edge_weight(g, spec, options);
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (auto& e : g.adj[i]) e.weight = w(i, e.dst);
  }
  return g;
}

EdgeWeight worst_case_edge_weight(const RecourseGraph& g, const ConfidenceSetSpec& spec,
                                  const ConicOptions& options) {
  require_same_dim(spec.dimension, g.points.cols(), "worst-case weights");
  const bool cuts = has_cuts(spec);
  auto cache = std::make_shared<std::unordered_map<std::size_t, double>>();
  const std::size_t n = g.size();
  // The returned closure copies the points so it can outlive the graph.
  return [points = g.points, spec, options, cuts, cache, n](std::size_t i, std::size_t j) {
    const std::size_t key = std::min(i, j) * n + std::max(i, j);
    if (auto it = cache->find(key); it != cache->end()) return it->second;
    const Vector v = (points.row(static_cast<Eigen::Index>(i)) -
                      points.row(static_cast<Eigen::Index>(j))).transpose();
    double w = v.squaredNorm();
    if (cuts && w > 0.0) w = std::max(0.0, max_over_confidence(v * v.transpose(), spec, options).value);
    cache->emplace(key, w);
    return w;
  };
}

SequentialPlan shortest_sequential_recourse(const RecourseGraph& g, std::size_t source) {
  return shortest_sequential_recourse(
      g,
      [&g](std::size_t i, std::size_t j) {
        const auto& out = g.adj[i];
        const auto it = std::lower_bound(out.begin(), out.end(), j,
                                         [](const GraphEdge& e, std::size_t d) { return e.dst < d; });
        return it->weight;
      },
      source);
}

SequentialPlan shortest_sequential_recourse(const RecourseGraph& g, const EdgeWeight& weight,
                                            std::size_t source) {
  check_node(g, source, "shortest_sequential_recourse");
  const std::size_t n = g.size();
  std::vector<double> dist(n, kInf);
  std::vector<std::size_t> pred(n, n);
  std::vector<double> pred_w(n, 0.0);
  std::vector<bool> done(n, false);
  using Item = std::pair<double, std::size_t>;  // (distance, node): ties pop the lower index
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[source] = 0.0;
  queue.push({0.0, source});
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (done[u]) continue;
    done[u] = true;
    if (u != source && g.classes[u] == 1) {
      // First positive node settled is the cheapest (lowest index on ties).
      SequentialPlan plan;
      for (std::size_t v = u; v != n; v = pred[v]) plan.path.push_back(v);
      std::reverse(plan.path.begin(), plan.path.end());
      for (std::size_t s = 1; s < plan.path.size(); ++s) plan.edge_costs.push_back(pred_w[plan.path[s]]);
      for (double c : plan.edge_costs) plan.path_cost += c;
      return plan;
    }
    for (const auto& e : g.adj[u]) {
      if (done[e.dst]) continue;
      const double w = weight(u, e.dst);
      if (w < 0.0) throw Error(ErrorCode::kInvalidArgument, "negative edge weight");
      const double cand = d + w;
      if (cand < dist[e.dst]) {
        dist[e.dst] = cand;
        pred[e.dst] = u;
        pred_w[e.dst] = w;
        queue.push({cand, e.dst});
      }
    }
  }
  throw Error(ErrorCode::kUnreachable, "no positively classified node is reachable");
}

WorstCaseResult path_worst_case(const RecourseGraph& g, const std::vector<std::size_t>& path,
                                const ConfidenceSetSpec& spec, const ConicOptions& options) {
  const Eigen::Index d = g.points.cols();
  require_same_dim(spec.dimension, d, "path_worst_case");
  Matrix s = Matrix::Zero(d, d);
  for (std::size_t t = 1; t < path.size(); ++t) {
    const Vector v = edge_vector(g, path[t - 1], path[t]);
    s.noalias() += v * v.transpose();
  }
  if (!has_cuts(spec)) {
    WorstCaseResult r;
    r.value = s.trace();
    r.argmax = CostMatrix::identity(d);
    r.dual_value = r.value;
    return r;
  }
  return max_over_confidence(s, spec, options);
}

double path_cost(const RecourseGraph& g, const std::vector<std::size_t>& path, const CostMatrix& a) {
  double total = 0.0;
  for (std::size_t t = 1; t < path.size(); ++t) {
    const Vector v = edge_vector(g, path[t - 1], path[t]);
    total += v.dot(a.entries() * v);
  }
  return total;
}

SequentialPlan minmax_flow_exhaustive(const RecourseGraph& g, const ConfidenceSetSpec& spec,
                                      const ExhaustiveOptions& options, std::size_t source) {
  check_node(g, source, "minmax_flow_exhaustive");
  const std::size_t n = g.size();

  // Enumerate candidate paths first so the budget is checked before any solve.
  std::vector<std::vector<std::size_t>> candidates;
  std::vector<std::size_t> path{source};
  std::vector<bool> on_path(n, false);
  on_path[source] = true;
  std::function<void(std::size_t)> dfs = [&](std::size_t u) {
    if (path.size() - 1 >= options.path_length_cap) return;
    for (const auto& e : g.adj[u]) {
      if (on_path[e.dst]) continue;
      path.push_back(e.dst);
      if (g.classes[e.dst] == 1) {
        if (candidates.size() >= options.budget) {
          throw Error(ErrorCode::kBudgetExceeded, "exhaustive path enumeration exceeds budget of " +
                                                      std::to_string(options.budget) + " candidates");
        }
        candidates.push_back(path);
      } else {
        on_path[e.dst] = true;
        dfs(e.dst);
        on_path[e.dst] = false;
      }
      path.pop_back();
    }
  };
  dfs(source);
  if (candidates.empty()) throw Error(ErrorCode::kUnreachable, "no positively classified node is reachable");

  double best_value = kInf;
  std::size_t best = 0;
  Matrix best_a;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const WorstCaseResult r = path_worst_case(g, candidates[c], spec, options.conic);
    // Candidates are generated in lexicographic order of adjacency, so a strict
    // comparison keeps the first of equal-valued paths.
    if (r.value < best_value - 1e-12) {
      best_value = r.value;
      best = c;
      best_a = r.argmax.entries();
    }
  }
  SequentialPlan plan;
  plan.path = candidates[best];
  for (std::size_t t = 1; t < plan.path.size(); ++t) {
    const Vector v = edge_vector(g, plan.path[t - 1], plan.path[t]);
    plan.edge_costs.push_back(v.dot(best_a * v));
  }
  plan.path_cost = best_value;
  return plan;
}

double jaccard_edges(const SequentialPlan& a, const SequentialPlan& b) {
  auto edges = [](const SequentialPlan& p) {
    std::set<std::pair<std::size_t, std::size_t>> e;
    for (std::size_t t = 1; t < p.path.size(); ++t) e.insert({p.path[t - 1], p.path[t]});
    return e;
  };
  const auto ea = edges(a), eb = edges(b);
  std::size_t common = 0;
  for (const auto& e : ea) common += eb.count(e);
  const std::size_t uni = ea.size() + eb.size() - common;
  if (uni == 0) return 0.0;
  return 1.0 - static_cast<double>(common) / static_cast<double>(uni);
}

nlohmann::json graph_to_json(const RecourseGraph& g) {
  nlohmann::json nodes = nlohmann::json::array(), edges = nlohmann::json::array();
  for (std::size_t i = 0; i < g.size(); ++i) {
    nodes.push_back({{"id", i}, {"class", g.classes[i]}, {"features", to_json(Vector(g.node(i)))}});
    for (const auto& e : g.adj[i]) edges.push_back({{"src", i}, {"dst", e.dst}, {"weight", e.weight}});
  }
  return {{"nodes", nodes}, {"edges", edges}};
}

nlohmann::json to_json(const SequentialPlan& plan) {
  return {{"path", plan.path},
          {"path_cost", plan.path_cost},
          {"edge_costs", plan.edge_costs},
          {"terminal_class", plan.terminal_class}};
}

}  // namespace reap
