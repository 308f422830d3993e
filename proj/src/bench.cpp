#include "reap/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

namespace reap {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "NA"; }

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Rows sampled without replacement, returned ascending.
std::vector<std::size_t> sample_sorted(std::vector<std::size_t> rows, std::size_t cap, Rng& rng) {
  if (rows.size() > cap) {
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(cap);
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

struct Prepared {
  Dataset data;
  std::unique_ptr<Mlp> clf;
  std::vector<FeatureVector> pool;
  std::vector<std::size_t> subjects;  // dataset rows
  std::vector<std::size_t> graph_rows;
  std::vector<CostMatrix> truths;
};

struct SubjectContext {
  FeatureVector x0;
  std::optional<RecourseGraph> graph;
  std::string graph_error;
  std::optional<RecoursePlan> wachter;
  std::optional<SequentialPlan> face;
  std::string face_error;
};

bool wants(const ExperimentConfig& cfg, Method m) {
  return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
}

bool needs_graph(const ExperimentConfig& cfg) {
  return wants(cfg, Method::kGraph) || wants(cfg, Method::kGraphWorstCase) ||
         wants(cfg, Method::kFace);
}

Prepared prepare(const ExperimentConfig& cfg) {
  Prepared p;
  if (cfg.dataset.csv.empty()) {
    Rng rng(derive_seed(cfg.seed, 1));
    p.data = gen_synthetic(cfg.dataset.synthetic_n, rng);
    p.data.name = cfg.dataset.name;
  } else {
    if (cfg.dataset.schema.empty()) throw Error(ErrorCode::kInvalidArgument, "csv dataset needs a schema");
    p.data = load_csv(cfg.dataset.csv, load_schema(cfg.dataset.schema), derive_seed(cfg.seed, 3));
    if (!cfg.dataset.name.empty() && cfg.dataset.name != "synthetic") p.data.name = cfg.dataset.name;
  }
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, 2);
  p.clf = train_classifier(p.data, tc);

  Rng rng(derive_seed(cfg.seed, 4));
  const Partition test = partition(p.data, *p.clf, p.data.test);
  std::vector<std::size_t> subjects = test.negative;
  std::shuffle(subjects.begin(), subjects.end(), rng);
  if (subjects.size() > cfg.num_subjects) subjects.resize(cfg.num_subjects);
  p.subjects = subjects;
  if (p.subjects.empty()) throw Error(ErrorCode::kInvalidArgument, "no negatively classified test subjects");

  const Partition train = partition(p.data, *p.clf, p.data.train);
  for (std::size_t r : sample_sorted(train.positive, cfg.pool_size, rng)) p.pool.push_back(p.data.row(r));
  if (p.pool.size() < static_cast<std::size_t>(std::max(2, cfg.k))) {
    throw Error(ErrorCode::kInvalidArgument, "too few positively classified training rows for a pool");
  }
  p.graph_rows = sample_sorted(p.data.train, cfg.graph_nodes, rng);

  Rng truth_rng(derive_seed(cfg.seed, 5));
  for (std::size_t t = 0; t < cfg.num_truths; ++t) p.truths.push_back(gen_truth_random(p.data.dim(), truth_rng));
  return p;
}

SubjectContext prepare_subject(const ExperimentConfig& cfg, const Prepared& p, std::size_t row) {
  SubjectContext s;
  s.x0 = p.data.row(row);
  const ConfidenceSetSpec empty{{}, cfg.margin, p.data.dim()};
  if (wants(cfg, Method::kWachter)) s.wachter = generate_grad(s.x0, *p.clf, empty, cfg.grad);
  if (needs_graph(cfg)) {
    try {
      s.graph = build_graph(p.data, p.graph_rows, *p.clf, s.x0, cfg.graph);
    } catch (const Error& e) {
      s.graph_error = e.what();
    }
  }
  if (wants(cfg, Method::kFace) && s.graph) {
    try {
      s.face = shortest_sequential_recourse(assign_weights(*s.graph, CostMatrix::identity(p.data.dim(), 0.5)));
    } catch (const Error& e) {
      s.face_error = e.what();
    }
  }
  return s;
}

void fill_grad(TrialRow& row, const RecoursePlan& plan, const Classifier& clf, const CostMatrix& truth,
               const FeatureVector& x0) {
  row.validity = plan.valid && clf.predict(plan.terminal) ? 1.0 : 0.0;
  row.cost = cost(truth, plan.terminal, x0);
}

void fill_graph(TrialRow& row, const RecourseGraph& g, const SequentialPlan& plan, const CostMatrix& truth) {
  row.validity = g.classes[plan.path.back()] == 1 ? 1.0 : 0.0;
  row.cost = cost(truth, g.node(plan.path.back()), g.node(0));
  row.path_cost = path_cost(g, plan.path, truth);
}

std::vector<TrialRow> run_trial(const ExperimentConfig& cfg, const Prepared& p,
                                const SubjectContext& subj, std::size_t truth_id,
                                std::size_t subject_id) {
  const std::uint64_t seed = derive_seed(cfg.seed, 100 + truth_id, subject_id);
  const CostMatrix& truth = p.truths[truth_id];
  const std::string& dataset = p.data.name;
  std::set<int> all_t(cfg.t_values.begin(), cfg.t_values.end());
  all_t.insert(cfg.recourse_t_values.begin(), cfg.recourse_t_values.end());
  const int max_t = all_t.empty() ? 0 : *all_t.rbegin();

  SessionConfig sc;
  sc.budget = max_t;
  sc.strategy = cfg.strategy;
  sc.k = cfg.k;
  sc.margin = cfg.margin;
  sc.seed = seed;
  ElicitationSession session(subj.x0, p.pool, sc);
  Rng responder(seed ^ 0x9E3779B97F4A7C15ULL);

  std::vector<TrialRow> rows;
  auto make_row = [&](const std::string& method, int t) {
    TrialRow r;
    r.dataset = dataset;
    r.method = method;
    r.t = t;
    r.truth_id = truth_id;
    r.subject_id = subject_id;
    r.seed = seed;
    return r;
  };

  double session_ms = 0.0;
  std::string session_error;
  for (int t : all_t) {
    const auto start = Clock::now();
    while (session.round() < t && session_error.empty()) {
      try {
        const Question q = session.next_question();
        session.apply_answer(q, respond_simulated(truth, q, session, 0.0, 0.0, responder));
      } catch (const Error& e) {
        // The pool ran out of admissible questions or the answers left no
        // interior: later T values reuse the last center.
        session_error = e.what();
      }
    }
    session_ms += elapsed_ms(start);
    const CostMatrix& center = session.incumbent().center;

    if (std::find(cfg.t_values.begin(), cfg.t_values.end(), t) != cfg.t_values.end()) {
      TrialRow r = make_row("elicit-" + cfg.strategy_label(), t);
      r.mean_rank = mean_rank(center, truth, p.pool, subj.x0, std::min(cfg.mean_rank_k, p.pool.size()));
      if (cfg.record_time) r.time_ms = session_ms;
      rows.push_back(std::move(r));
    }
    if (std::find(cfg.recourse_t_values.begin(), cfg.recourse_t_values.end(), t) == cfg.recourse_t_values.end()) {
      continue;
    }
    const ConfidenceSetSpec spec = session.spec();
    for (Method m : cfg.methods) {
      TrialRow r = make_row(to_string(m), t);
      const auto m_start = Clock::now();
      try {
        switch (m) {
          case Method::kGrad:
            fill_grad(r, generate_grad(subj.x0, *p.clf, spec, cfg.grad), *p.clf, truth, subj.x0);
            break;
          case Method::kWachter:
            fill_grad(r, *subj.wachter, *p.clf, truth, subj.x0);
            break;
          case Method::kFace:
            if (!subj.face) throw Error(ErrorCode::kUnreachable, subj.graph ? subj.face_error : subj.graph_error);
            fill_graph(r, *subj.graph, *subj.face, truth);
            break;
          case Method::kGraph: {
            if (!subj.graph) throw Error(ErrorCode::kInvalidArgument, subj.graph_error);
            const RecourseGraph g = assign_weights(*subj.graph, center);
            fill_graph(r, g, shortest_sequential_recourse(g), truth);
            break;
          }
          case Method::kGraphWorstCase: {
            if (!subj.graph) throw Error(ErrorCode::kInvalidArgument, subj.graph_error);
            fill_graph(r, *subj.graph,
                       shortest_sequential_recourse(*subj.graph, worst_case_edge_weight(*subj.graph, spec)),
                       truth);
            break;
          }
        }
      } catch (const Error& e) {
        r.validity.reset();
        r.cost.reset();
        r.path_cost.reset();
        r.error = e.what();
      }
      if (cfg.record_time) r.time_ms = elapsed_ms(m_start);
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

Stat stat_of(const std::vector<double>& v) {
  Stat s;
  s.n = v.size();
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() >= 2) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

const std::vector<std::pair<const char*, std::optional<double> TrialRow::*>> kMetrics = {
    {"validity", &TrialRow::validity},   {"cost", &TrialRow::cost},
    {"path_cost", &TrialRow::path_cost}, {"mean_rank", &TrialRow::mean_rank},
    {"time_ms", &TrialRow::time_ms}};

Comparison compare(const std::vector<TrialRow>& rows, const std::string& first,
                   const std::string& second, const std::string& metric, int t) {
  Comparison c{first, second, metric, t, 0, 0.0, 0.0, std::nullopt, ""};
  std::optional<double> TrialRow::*field = nullptr;
  for (const auto& [name, f] : kMetrics) {
    if (metric == name) field = f;
  }
  std::map<std::pair<std::size_t, std::size_t>, std::pair<std::optional<double>, std::optional<double>>> paired;
  for (const auto& r : rows) {
    if (r.t != t) continue;
    if (r.method == first) paired[{r.truth_id, r.subject_id}].first = r.*field;
    if (r.method == second) paired[{r.truth_id, r.subject_id}].second = r.*field;
  }
  std::vector<double> diffs;
  double s1 = 0.0, s2 = 0.0;
  for (const auto& [key, v] : paired) {
    if (!v.first || !v.second) continue;
    diffs.push_back(*v.first - *v.second);
    s1 += *v.first;
    s2 += *v.second;
  }
  c.pairs = diffs.size();
  if (!diffs.empty()) {
    c.mean_first = s1 / static_cast<double>(diffs.size());
    c.mean_second = s2 / static_cast<double>(diffs.size());
  }
  try {
    c.p_value = wilcoxon_one_sided(diffs);
  } catch (const Error& e) {
    c.note = e.what();
  }
  return c;
}

const char* kRawHeader = "dataset,method,T,truth_id,subject_id,seed,validity,cost,path_cost,mean_rank,time_ms\n";

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return splitmix(splitmix(splitmix(base) ^ a) ^ (b * 0xD6E8FEB86659FD93ULL));
}

double mean_rank_from_ranks(const std::vector<std::size_t>& ranks, std::size_t n) {
  const std::size_t k = ranks.size();
  if (k == 0 || k > n) throw Error(ErrorCode::kInvalidArgument, "mean rank needs 1 <= K <= N");
  const double sum = static_cast<double>(std::accumulate(ranks.begin(), ranks.end(), std::size_t{0}));
  const double kd = static_cast<double>(k), nd = static_cast<double>(n);
  const double r_min = kd * (kd + 1.0) / 2.0;
  const double r_max = (2.0 * nd - kd + 1.0) * kd / 2.0;
  return (sum - r_min) / r_max;
}

double mean_rank(const CostMatrix& center, const CostMatrix& truth,
                 const std::vector<FeatureVector>& pool, const FeatureVector& x0, std::size_t k) {
  const std::size_t n = pool.size();
  if (k == 0 || k > n) throw Error(ErrorCode::kInvalidArgument, "mean rank needs 1 <= K <= N");
  auto order_by = [&](const CostMatrix& a) {
    std::vector<std::pair<double, std::size_t>> c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = {cost(a, pool[i], x0), i};
    std::sort(c.begin(), c.end());
    return c;
  };
  const auto by_truth = order_by(truth);
  std::vector<std::size_t> rank(n);
  for (std::size_t r = 0; r < n; ++r) rank[by_truth[r].second] = r + 1;
  const auto by_center = order_by(center);
  std::vector<std::size_t> selected;
  for (std::size_t r = 0; r < k; ++r) selected.push_back(rank[by_center[r].second]);
  return mean_rank_from_ranks(selected, n);
}

double wilcoxon_one_sided(const std::vector<double>& differences) {
  std::vector<double> d;
  for (double x : differences) {
    if (x != 0.0) d.push_back(x);
  }
  if (d.empty()) throw Error(ErrorCode::kInvalidArgument, "all paired differences are zero");
  if (d.size() < 5) throw Error(ErrorCode::kInvalidArgument, "fewer than 5 nonzero differences");
  const std::size_t n = d.size();

  // Mid-ranks of |d|, stored doubled so they stay integral.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
  std::vector<std::size_t> rank2(n);
  double tie_term = 0.0;
  for (std::size_t s = 0; s < n;) {
    std::size_t e = s;
    while (e + 1 < n && std::abs(d[idx[e + 1]]) == std::abs(d[idx[s]])) ++e;
    const std::size_t twice_mid = (s + 1) + (e + 1);  // 2 * average of ranks s+1..e+1
    for (std::size_t q = s; q <= e; ++q) rank2[idx[q]] = twice_mid;
    const double t = static_cast<double>(e - s + 1);
    tie_term += t * t * t - t;
    s = e + 1;
  }
  std::size_t w2 = 0;  // doubled W+
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] > 0) w2 += rank2[i];
  }

  if (n <= 20) {
    const std::size_t max_sum = n * (n + 1);
    std::vector<double> count(max_sum + 1, 0.0);
    count[0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t s = max_sum; s + 1 > rank2[i]; --s) count[s] += count[s - rank2[i]];
    }
    double below = 0.0;
    for (std::size_t s = 0; s <= w2; ++s) below += count[s];
    return below / std::ldexp(1.0, static_cast<int>(n));
  }
  const double nd = static_cast<double>(n);
  const double mean = nd * (nd + 1.0) / 4.0;
  const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
  const double z = (static_cast<double>(w2) / 2.0 - mean + 0.5) / std::sqrt(var);
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

const char* to_string(Method m) {
  switch (m) {
    case Method::kGrad: return "reap-grad";
    case Method::kWachter: return "wachter";
    case Method::kGraph: return "reap-graph";
    case Method::kGraphWorstCase: return "reap-graph-wc";
    case Method::kFace: return "face";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  if (name == "grad" || name == "reap-grad") return Method::kGrad;
  if (name == "wachter") return Method::kWachter;
  if (name == "graph" || name == "reap-graph") return Method::kGraph;
  if (name == "graph-worst-case" || name == "reap-graph-wc") return Method::kGraphWorstCase;
  if (name == "face") return Method::kFace;
  throw Error(ErrorCode::kInvalidArgument, "unknown method: " + name);
}

std::string ExperimentConfig::strategy_label() const {
  switch (strategy) {
    case Strategy::kSimilarCost: return "similar" + std::to_string(k);
    case Strategy::kExhaustive: return "exhaustive";
    case Strategy::kRandom: return "random" + std::to_string(k);
  }
  return "?";
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      c.dataset.name = d.value("name", c.dataset.name);
      c.dataset.csv = d.value("csv", c.dataset.csv);
      c.dataset.schema = d.value("schema", c.dataset.schema);
      c.dataset.synthetic_n = d.value("synthetic_n", c.dataset.synthetic_n);
    }
    c.t_values = j.value("t_values", c.t_values);
    c.recourse_t_values = j.value("recourse_t_values", c.recourse_t_values);
    c.num_truths = j.value("num_truths", c.num_truths);
    c.num_subjects = j.value("num_subjects", c.num_subjects);
    if (j.contains("strategy")) {
      const std::string s = j["strategy"];
      c.strategy = strategy_from_string(s);
      if (s == "similar2") c.k = 2;
    }
    c.k = j.value("k", c.k);
    c.margin = j.value("margin", c.margin);
    c.seed = j.value("seed", c.seed);
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j["methods"]) c.methods.push_back(method_from_string(m.get<std::string>()));
    }
    c.mean_rank_k = j.value("mean_rank_k", c.mean_rank_k);
    c.pool_size = j.value("pool_size", c.pool_size);
    c.graph_nodes = j.value("graph_nodes", c.graph_nodes);
    c.graph.k = j.value("graph_k", c.graph.k);
    c.graph.symmetrize = j.value("symmetrize", c.graph.symmetrize);
    c.grad.lambda = j.value("lambda", c.grad.lambda);
    c.grad.lr = j.value("lr", c.grad.lr);
    c.grad.max_iters = j.value("max_iters", c.grad.max_iters);
    if (j.contains("loss")) c.grad.loss = loss_kind_from_string(j["loss"]);
    c.grad.reuse_gap = j.value("reuse_gap", c.grad.reuse_gap);
    c.train.epochs = j.value("epochs", c.train.epochs);
    c.train.hidden = j.value("hidden", c.train.hidden);
    c.report_t = j.value("report_t", c.report_t);
    c.threads = j.value("threads", c.threads);
    c.record_time = j.value("record_time", c.record_time);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("experiment config: ") + e.what());
  }
  if (c.num_truths == 0 || c.num_subjects == 0) {
    throw Error(ErrorCode::kInvalidArgument, "num_truths and num_subjects must be positive");
  }
  for (int t : c.t_values) {
    if (t < 0) throw Error(ErrorCode::kInvalidArgument, "T must be nonnegative");
  }
  for (int t : c.recourse_t_values) {
    if (t < 0) throw Error(ErrorCode::kInvalidArgument, "T must be nonnegative");
  }
  return c;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json methods_j = nlohmann::json::array();
  for (Method m : methods) methods_j.push_back(reap::to_string(m));
  return {{"dataset",
           {{"name", dataset.name}, {"csv", dataset.csv}, {"schema", dataset.schema},
            {"synthetic_n", dataset.synthetic_n}}},
          {"t_values", t_values},
          {"recourse_t_values", recourse_t_values},
          {"num_truths", num_truths},
          {"num_subjects", num_subjects},
          {"strategy", reap::to_string(strategy)},
          {"k", k},
          {"margin", margin},
          {"seed", seed},
          {"methods", methods_j},
          {"mean_rank_k", mean_rank_k},
          {"pool_size", pool_size},
          {"graph_nodes", graph_nodes},
          {"graph_k", graph.k},
          {"symmetrize", graph.symmetrize},
          {"lambda", grad.lambda},
          {"lr", grad.lr},
          {"max_iters", grad.max_iters},
          {"loss", grad.loss == LossKind::kHinge ? "hinge" : "quadratic"},
          {"reuse_gap", grad.reuse_gap},
          {"epochs", train.epochs},
          {"hidden", train.hidden},
          {"report_t", report_t},
          {"threads", threads},
          {"record_time", record_time}};
}

const Cell* Report::cell(const std::string& method, int t) const {
  for (const auto& c : cells) {
    if (c.method == method && c.t == t) return &c;
  }
  return nullptr;
}

Report run_experiment(const ExperimentConfig& cfg) {
  const Prepared p = prepare(cfg);
  const std::size_t n_subj = p.subjects.size();
  std::vector<SubjectContext> subjects(n_subj);
  const std::size_t n_trials = cfg.num_truths * n_subj;
  std::vector<std::vector<TrialRow>> results(n_trials);

  // Subject contexts first, then trials; both fan out over the same workers
  // and write into preallocated slots, so the output order is fixed.
  auto parallel_for = [&](std::size_t count, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.threads, count));
    if (workers == 1) {
      for (std::size_t i = 0; i < count; ++i) body(i);
      return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            body(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  };
  parallel_for(n_subj, [&](std::size_t s) { subjects[s] = prepare_subject(cfg, p, p.subjects[s]); });
  parallel_for(n_trials, [&](std::size_t i) {
    const std::size_t truth = i / n_subj, subject = i % n_subj;
    results[i] = run_trial(cfg, p, subjects[subject], truth, subject);
  });

  std::vector<TrialRow> rows;
  for (auto& r : results) {
    for (auto& row : r) rows.push_back(std::move(row));
  }
  return summarize(p.data.name, cfg, std::move(rows));
}

Report summarize(const std::string& dataset, const ExperimentConfig& cfg, std::vector<TrialRow> rows) {
  Report rep;
  rep.dataset = dataset;
  rep.config = cfg;
  rep.rows = std::move(rows);

  std::map<std::pair<std::string, int>, std::vector<const TrialRow*>> groups;
  for (const auto& r : rep.rows) groups[{r.method, r.t}].push_back(&r);
  for (const auto& [key, members] : groups) {
    Cell c;
    c.method = key.first;
    c.t = key.second;
    for (const auto& [name, field] : kMetrics) {
      std::vector<double> v;
      for (const TrialRow* r : members) {
        if (r->*field) v.push_back(*(r->*field));
      }
      if (!v.empty()) c.metrics[name] = stat_of(v);
    }
    for (const TrialRow* r : members) c.failures += r->error.empty() ? 0 : 1;
    rep.cells.push_back(std::move(c));
  }

  const std::vector<std::tuple<Method, Method, const char*>> pairs = {
      {Method::kGrad, Method::kWachter, "cost"},
      {Method::kGraph, Method::kFace, "path_cost"},
      {Method::kGraphWorstCase, Method::kFace, "path_cost"}};
  for (const auto& [a, b, metric] : pairs) {
    if (wants(cfg, a) && wants(cfg, b)) {
      rep.comparisons.push_back(compare(rep.rows, to_string(a), to_string(b), metric, cfg.report_t));
    }
  }
  return rep;
}

std::string raw_csv(const Report& r) {
  std::ostringstream out;
  out << kRawHeader;
  for (const auto& row : r.rows) {
    out << row.dataset << ',' << row.method << ',' << row.t << ',' << row.truth_id << ','
        << row.subject_id << ',' << row.seed << ',' << fmt(row.validity) << ',' << fmt(row.cost) << ','
        << fmt(row.path_cost) << ',' << fmt(row.mean_rank) << ',' << fmt(row.time_ms) << '\n';
  }
  return out.str();
}

std::string report_csv(const Report& r) {
  std::ostringstream out;
  out << "dataset,method,T,mean_rank_k,failures";
  for (const auto& [name, field] : kMetrics) out << ',' << name << "_n," << name << "_mean," << name << "_std";
  out << '\n';
  for (const auto& c : r.cells) {
    if (c.t != r.config.report_t) continue;
    out << r.dataset << ',' << c.method << ',' << c.t << ',' << r.config.mean_rank_k << ',' << c.failures;
    for (const auto& [name, field] : kMetrics) {
      const auto it = c.metrics.find(name);
      if (it == c.metrics.end()) {
        out << ",0,NA,NA";
      } else {
        out << ',' << it->second.n << ',' << fmt(it->second.mean) << ',' << fmt(it->second.std);
      }
    }
    out << '\n';
  }
  return out.str();
}

std::string sweep_csv(const Report& r) {
  std::ostringstream out;
  out << "dataset,method,T,metric,n,mean,std\n";
  for (const auto& c : r.cells) {
    for (const auto& [name, s] : c.metrics) {
      out << r.dataset << ',' << c.method << ',' << c.t << ',' << name << ',' << s.n << ','
          << fmt(s.mean) << ',' << fmt(s.std) << '\n';
    }
  }
  return out.str();
}

nlohmann::json report_json(const Report& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    nlohmann::json m = nlohmann::json::object();
    for (const auto& [name, s] : c.metrics) {
      m[name] = {{"n", s.n}, {"mean", s.mean}, {"std", s.std ? nlohmann::json(*s.std) : nlohmann::json()}};
    }
    cells.push_back({{"method", c.method}, {"T", c.t}, {"failures", c.failures}, {"metrics", m}});
  }
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : r.comparisons) {
    comps.push_back({{"first", c.first},
                     {"second", c.second},
                     {"metric", c.metric},
                     {"T", c.t},
                     {"pairs", c.pairs},
                     {"mean_first", c.mean_first},
                     {"mean_second", c.mean_second},
                     {"p_value", c.p_value ? nlohmann::json(*c.p_value) : nlohmann::json()},
                     {"note", c.note}});
  }
  return {{"header",
           {{"dataset", r.dataset},
            {"mean_rank_k", r.config.mean_rank_k},
            {"report_t", r.config.report_t},
            {"config", r.config.to_json()}}},
          {"cells", cells},
          {"comparisons", comps}};
}

std::vector<TimingRow> heuristic_timing(const std::vector<std::size_t>& sizes, std::uint64_t seed,
                                        int rounds) {
  std::vector<TimingRow> out;
  for (std::size_t n : sizes) {
    Rng rng(derive_seed(seed, n));
    std::vector<FeatureVector> pool;
    FeatureVector x0;
    for (std::size_t m = 3 * n + 50; pool.size() < n; m *= 2) {
      pool.clear();
      x0.resize(0);
      const Dataset data = gen_synthetic(m, rng);
      for (std::size_t i = 0; i < data.size(); ++i) {
        if (data.y[i] == 1) {
          if (pool.size() < n) pool.push_back(data.row(i));
        } else if (x0.size() == 0) {
          x0 = data.row(i);
        }
      }
    }
    const CostMatrix truth = gen_truth_random(2, rng);
    SessionConfig sc;
    sc.budget = rounds;
    ElicitationSession s(x0, pool, sc);
    TimingRow row;
    row.n = n;
    for (int r = 0; r < rounds; ++r) {
      auto start = Clock::now();
      const Question e = next_question_exhaustive(s);
      row.exhaustive_ms += elapsed_ms(start) / rounds;
      start = Clock::now();
      const Question h = next_question_similar_cost(s, 2);
      row.heuristic_ms += elapsed_ms(start) / rounds;
      row.exhaustive_objective += e.projection_distance / rounds;
      row.heuristic_objective += h.projection_distance / rounds;
      const double gap = e.projection_distance > 0.0
                             ? std::abs(e.projection_distance - h.projection_distance) / e.projection_distance
                             : (h.projection_distance > 0.0 ? 1.0 : 0.0);
      row.relative_gap = std::max(row.relative_gap, gap);
      s.apply_answer(h, respond_simulated(truth, h, s, 0.0, 0.0, rng));
    }
    out.push_back(row);
  }
  return out;
}

std::string timing_csv(const std::vector<TimingRow>& rows) {
  std::ostringstream out;
  out << "N,exhaustive_ms,heuristic_ms,speedup,exhaustive_objective,heuristic_objective,relative_gap\n";
  for (const auto& r : rows) {
    out << r.n << ',' << fmt(r.exhaustive_ms) << ',' << fmt(r.heuristic_ms) << ','
        << fmt(r.heuristic_ms > 0 ? r.exhaustive_ms / r.heuristic_ms : 0.0) << ','
        << fmt(r.exhaustive_objective) << ',' << fmt(r.heuristic_objective) << ','
        << fmt(r.relative_gap) << '\n';
  }
  return out.str();
}

}  // namespace reap
