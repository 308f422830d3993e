// Runs every primary acceptance criterion and prints one PASS/FAIL line each.
//
//   reap_acceptance [--only name[,name...]] [--csv path --schema path] [--list]
//
// Exits 1 when any selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../test_support.hpp"
#include "reap/bench.hpp"
#include "reap/conic.hpp"
#include "reap/elicit.hpp"
#include "reap/recourse_grad.hpp"
#include "reap/recourse_graph.hpp"

using namespace reap;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double limit_s;
  std::function<Outcome()> run;
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string csv_path = REAP_SOURCE_DIR "/data/credit_demo.csv";
std::string schema_path = REAP_SOURCE_DIR "/data/schemas/credit_demo.json";

Outcome cost_identity() {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> dims(1, 8);
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const int d = dims(rng);
    const Matrix a = testing::random_psd(rng, d);
    const Vector x0 = testing::random_vector(rng, d, -1, 1);
    const Vector xi = testing::random_vector(rng, d, -1, 1);
    const Vector xj = testing::random_vector(rng, d, -1, 1);
    const CutMatrix m = pair_matrix(xi, xj, x0);
    // Quadratic forms written out element by element.
    auto form = [&](const Vector& x) {
      double s = 0.0;
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) s += (x[r] - x0[r]) * a(r, c) * (x[c] - x0[c]);
      return s;
    };
    worst = std::max(worst, std::abs(frobenius_inner(a, m.entries()) - (form(xi) - form(xj))));
  }
  return {worst <= 1e-9, "max |error| " + num(worst) + " over 1000 instances"};
}

Outcome chebyshev_contract() {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> dims(1, 6), cuts(0, 8);
  double worst = -1.0;
  int failed = 0;
  for (int n = 0; n < 200; ++n) {
    const auto inst = testing::random_instance(rng, dims(rng), static_cast<std::size_t>(cuts(rng)));
    const CenterResult c = chebyshev_center(inst.spec);
    if (!c.ok()) {
      ++failed;
      continue;
    }
    worst = std::max(worst, center_violation(inst.spec, c.center.entries(), c.radius));
  }
  ConfidenceSetSpec scalar{{}, 0.01, 1};
  scalar.cuts.emplace_back(Matrix::Constant(1, 1, 3.0), 0, 1);
  const CenterResult lp = chebyshev_center(scalar);
  const double lp_err = std::max(std::abs(lp.center.entries()(0, 0)), std::abs(lp.radius - 1.0 / 300.0));
  bool half = true;
  for (Eigen::Index d : {1, 2, 5}) {
    const CenterResult e = chebyshev_center(ConfidenceSetSpec{{}, 0.01, d});
    half = half && e.center.entries() == 0.5 * Matrix::Identity(d, d) && e.radius == 0.5;
  }
  const bool pass = failed == 0 && worst <= 1e-7 && lp_err <= 1e-6 && half;
  return {pass, "max violation " + num(worst) + ", solver failures " + std::to_string(failed) +
                    ", scalar LP error " + num(lp_err) + ", empty set " + (half ? "1/2 I" : "WRONG")};
}

Outcome duality() {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> dims(1, 6), cuts(0, 8);
  double worst = 0.0, infeasibility = 0.0;
  for (int n = 0; n < 200; ++n) {
    const int d = dims(rng);
    const auto inst = testing::random_instance(rng, d, static_cast<std::size_t>(cuts(rng)));
    const Vector v = testing::random_vector(rng, d, -1, 1);
    const Matrix s = v * v.transpose() + 0.1 * testing::random_psd(rng, d);
    const WorstCaseResult w = max_over_confidence(s, inst.spec);
    worst = std::max(worst, w.dual_value - w.value);
    worst = std::max(worst, w.gap);
    infeasibility = std::max(infeasibility, membership_violation(inst.spec, w.argmax.entries()));
  }
  return {worst <= 1e-5 && infeasibility <= 1e-7,
          "max gap " + num(worst) + ", max primal violation " + num(infeasibility)};
}

// Shared by the mean-rank and ReAP-K criteria.
struct MeanRankRuns {
  std::vector<double> k2;  // T = 0..10
  double k3_at_10 = 0.0;
};

const MeanRankRuns& mean_rank_runs() {
  static const MeanRankRuns runs = [] {
    ExperimentConfig cfg;
    cfg.methods.clear();
    cfg.recourse_t_values.clear();
    cfg.seed = 11;
    MeanRankRuns out;
    const Report r2 = run_experiment(cfg);
    for (int t = 0; t <= 10; ++t) out.k2.push_back(r2.cell("elicit-similar2", t)->metrics.at("mean_rank").mean);
    cfg.k = 3;
    cfg.t_values = {10};
    const Report r3 = run_experiment(cfg);
    out.k3_at_10 = r3.cell("elicit-similar3", 10)->metrics.at("mean_rank").mean;
    return out;
  }();
  return runs;
}

Outcome mean_rank_decrease() {
  const auto& mr = mean_rank_runs().k2;
  int inversions = 0;
  double largest = 0.0;
  std::ostringstream sweep;
  for (std::size_t t = 0; t < mr.size(); ++t) {
    sweep << (t ? " " : "") << num(mr[t]);
    if (t > 0 && mr[t] > mr[t - 1]) {
      ++inversions;
      largest = std::max(largest, mr[t] - mr[t - 1]);
    }
  }
  const bool pass = mr.back() < mr.front() && (inversions == 0 || (inversions == 1 && largest <= 0.02));
  return {pass, "T=0..10: " + sweep.str() + "; inversions " + std::to_string(inversions) +
                    ", largest rise " + num(largest)};
}

Outcome reap_k() {
  const auto& r = mean_rank_runs();
  return {r.k3_at_10 <= r.k2.back(), "T=10 mean rank k=3 " + num(r.k3_at_10) + " vs k=2 " + num(r.k2.back())};
}

Outcome cost_improvement() {
  ExperimentConfig cfg;
  cfg.t_values = {5};
  cfg.recourse_t_values = {5};
  cfg.seed = 13;
  bool pass = true;
  std::ostringstream detail;
  for (const bool csv : {false, true}) {
    ExperimentConfig c = cfg;
    if (csv) {
      c.dataset.name = "csv";
      c.dataset.csv = csv_path;
      c.dataset.schema = schema_path;
    }
    const Report r = run_experiment(c);
    detail << (csv ? "; " : "") << r.dataset << ":";
    for (const auto& cmp : r.comparisons) {
      // Ordering of the means, and the signed-rank test leaning the same way.
      const bool ok = cmp.mean_first <= cmp.mean_second && cmp.p_value && *cmp.p_value < 0.5;
      pass = pass && ok;
      detail << ' ' << cmp.first << ' ' << num(cmp.mean_first)
             << (cmp.mean_first <= cmp.mean_second ? " <= " : " > ") << cmp.second << ' ' << num(cmp.mean_second)
             << " (" << cmp.metric << ", p=" << (cmp.p_value ? num(*cmp.p_value) : "NA") << ", n=" << cmp.pairs
             << (ok ? ")" : ", FAIL)");
    }
  }
  return {pass, detail.str()};
}

Outcome jaccard() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> nodes(5, 10);
  std::bernoulli_distribution positive(0.35);
  double total = 0.0;
  int graphs = 0;
  while (graphs < 20) {
    const auto inst = testing::random_instance(rng, 2, 4);
    const std::size_t n = nodes(rng);
    std::vector<FeatureVector> pts;
    std::vector<int> cls;
    for (std::size_t i = 1; i < n; ++i) {
      pts.push_back(testing::random_vector(rng, 2));
      cls.push_back(positive(rng) ? 1 : 0);
    }
    cls.back() = 1;
    const RecourseGraph g = build_graph(inst.x0, pts, cls, {3});
    try {
      const SequentialPlan ex = minmax_flow_exhaustive(g, inst.spec);
      const SequentialPlan rel = shortest_sequential_recourse(g, worst_case_edge_weight(g, inst.spec));
      total += jaccard_edges(ex, rel);
      ++graphs;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kUnreachable) throw;
    }
  }
  const double mean = total / graphs;
  return {mean <= 0.1, "mean Jaccard distance " + num(mean) + " over 20 graphs"};
}

Outcome heuristic() {
  const auto small = heuristic_timing({50, 100, 200, 500}, 17);
  double gap = 0.0;
  for (const auto& row : small) gap = std::max(gap, row.relative_gap);
  const auto big = heuristic_timing({10000}, 17);
  const double speedup = big[0].exhaustive_ms / std::max(big[0].heuristic_ms, 1e-9);
  return {gap <= 1e-2 && speedup >= 20.0, "max relative gap " + num(gap) + " for N <= 500; N = 10000 exhaustive " +
                                              num(big[0].exhaustive_ms) + " ms, heuristic " +
                                              num(big[0].heuristic_ms) + " ms, speedup " + num(speedup) + "x"};
}

Outcome lqr() {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> dims(1, 5);
  double worst = 0.0;
  for (int n = 0; n < 50; ++n) {
    const int d = dims(rng);
    const Matrix q = testing::random_psd(rng, d) + 0.1 * Matrix::Identity(d, d);
    const Matrix r = testing::random_psd(rng, d) + 0.1 * Matrix::Identity(d, d);
    const Matrix a = gen_truth_lqr(q, r).entries();
    worst = std::max(worst, (q - a * (r + a).inverse() * a).norm());
  }
  const double golden =
      std::abs(gen_truth_lqr(Matrix::Ones(1, 1), Matrix::Ones(1, 1)).entries()(0, 0) - (1.0 + std::sqrt(5.0)) / 2.0);
  return {worst <= 1e-8 && golden <= 1e-9, "max Riccati residual " + num(worst) + ", scalar error " + num(golden)};
}

Mlp random_mlp(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> n(0.0, 1.0);
  auto fill = [&](Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
  };
  return Mlp({fill(8, d), fill(1, 8)}, {fill(8, 1).col(0), Vector::Zero(1)});
}

Outcome gradient_check() {
  std::mt19937_64 rng(9);
  int checked = 0;
  double worst = 0.0;
  const double h = 1e-5;
  for (int trial = 0; trial < 400 && checked < 50; ++trial) {
    const int d = 2 + trial % 3;
    const auto inst = testing::random_instance(rng, d, 3);
    const Mlp clf = random_mlp(rng, d);
    const Vector x = testing::random_vector(rng, d, 0.1, 0.9);
    const ValidityLoss quad{LossKind::kQuadratic, trial % 2 ? LossSpace::kScore : LossSpace::kProbability, 1.0};
    const Matrix a_here = worst_case_cost(x, inst.x0, inst.spec).argmax;
    bool stable = true;
    Vector fd(d);
    for (int k = 0; k < d && stable; ++k) {
      Vector xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      for (const Vector& xs : {xp, xm}) {
        if ((worst_case_cost(xs, inst.x0, inst.spec).argmax - a_here).norm() > 1e-3) stable = false;
      }
      fd[k] = (recourse_objective(xp, inst.x0, clf, inst.spec, 1.0, quad) -
               recourse_objective(xm, inst.x0, clf, inst.spec, 1.0, quad)) /
              (2 * h);
    }
    if (!stable) continue;
    const Vector g = recourse_gradient(x, inst.x0, clf, inst.spec, 1.0, quad);
    if (g.norm() < 1e-3) continue;
    ++checked;
    worst = std::max(worst, (g - fd).norm() / g.norm());
  }
  return {checked == 50 && worst <= 1e-4,
          "max relative error " + num(worst) + " on " + std::to_string(checked) + " points"};
}

Outcome tolerance() {
  // x = 1 and x = 2 judged equal under eps = 0: both orders at once, no interior.
  const std::vector<FeatureVector> pool{Vector::Constant(1, 1.0), Vector::Constant(1, 2.0)};
  PreferenceSet prefs(0.0);
  prefs.add(0, 1);
  prefs.add(1, 0);
  const ConfidenceSetSpec spec = make_spec(prefs, pool, Vector::Zero(1));
  const TolerantCenterResult half = tolerant_center(spec, 0.5);
  const double viol = center_violation(spec, half.center.entries(), half.radius, half.violated, default_big_m(spec));
  const bool half_ok = half.violated.size() == 1 && half.radius > 0.0 && viol <= 1e-7;
  std::string zero = "no error";
  bool zero_ok = false;
  try {
    tolerant_center(spec, 0.0);
  } catch (const Error& e) {
    zero = to_string(e.code());
    zero_ok = e.code() == ErrorCode::kInfeasible;
  }
  return {half_ok && zero_ok, "alpha 0.5: " + std::to_string(half.violated.size()) + " violated, radius " +
                                  num(half.radius) + ", violation " + num(viol) + "; alpha 0: " + zero};
}

Outcome determinism() {
  ExperimentConfig cfg;
  cfg.num_truths = 3;
  cfg.num_subjects = 6;
  cfg.recourse_t_values = {0, 3};
  cfg.report_t = 3;
  cfg.methods = {Method::kGrad, Method::kWachter, Method::kGraph, Method::kGraphWorstCase, Method::kFace};
  cfg.seed = 19;
  const std::string first = raw_csv(run_experiment(cfg));
  const std::string second = raw_csv(run_experiment(cfg));
  cfg.threads = 2;
  const std::string threaded = raw_csv(run_experiment(cfg));
  return {first == second && first == threaded,
          std::to_string(first.size()) + " bytes; repeat " + (first == second ? "identical" : "DIFFERS") +
              ", 2 threads " + (first == threaded ? "identical" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {"cost-identity", 1, cost_identity},
      {"chebyshev-contract", 60, chebyshev_contract},
      {"duality", 60, duality},
      {"mean-rank-decrease", 600, mean_rank_decrease},
      {"reap-k-efficiency", 600, reap_k},
      {"cost-improvement", 900, cost_improvement},
      {"worst-case-jaccard", 300, jaccard},
      {"heuristic-selection", 300, heuristic},
      {"lqr-generator", 5, lqr},
      {"gradient-check", 30, gradient_check},
      {"inconsistency-tolerance", 5, tolerance},
      {"determinism", 900, determinism},
  };
  std::set<std::string> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--list") {
      for (const auto& c : all) std::cout << c.name << '\n';
      return 0;
    } else if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(tok);
    } else if (arg == "--csv" && i + 1 < argc) {
      csv_path = argv[++i];
    } else if (arg == "--schema" && i + 1 < argc) {
      schema_path = argv[++i];
    } else {
      std::cerr << "usage: reap_acceptance [--only a,b] [--csv path --schema path] [--list]\n";
      return 2;
    }
  }

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.name)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    // The ReAP-K numbers come from the mean-rank run, so its time counts there.
    const bool in_time = secs <= c.limit_s;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::cout << (pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << " [" << num(secs) << " s, limit "
              << num(c.limit_s) << " s" << (in_time ? "" : ", OVER TIME") << "]" << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : "all criteria passed") << std::endl;
  return failed ? 1 : 0;
}
