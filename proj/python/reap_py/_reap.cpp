#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "reap/bench.hpp"
#include "reap/conic.hpp"
#include "reap/elicit.hpp"
#include "reap/recourse_grad.hpp"

namespace py = pybind11;
using namespace reap;

namespace {

ConfidenceSetSpec spec_of(const std::vector<Matrix>& cuts, double margin, Eigen::Index dim) {
  ConfidenceSetSpec spec;
  spec.margin = margin;
  spec.dimension = dim;
  for (std::size_t k = 0; k < cuts.size(); ++k) spec.cuts.emplace_back(cuts[k], k, k);
  return spec;
}

Eigen::Index dim_of(const std::vector<Matrix>& cuts, Eigen::Index dim) {
  if (dim > 0) return dim;
  if (cuts.empty()) throw Error(ErrorCode::kInvalidArgument, "dim is required when there are no cuts");
  return cuts.front().rows();
}

// Elicitation session with the answer plumbing kept on the C++ side.
class PySession {
 public:
  PySession(const Vector& x0, const std::vector<Vector>& pool, int budget, int k,
            const std::string& strategy, double epsilon, double alpha, std::uint64_t seed)
      : session_(x0, pool, config(budget, k, strategy, epsilon, alpha, seed)), rng_(seed) {}

  std::vector<std::size_t> next_question() {
    pending_ = session_.next_question();
    return pending_->options;
  }

  // preferred = None records indifference.
  void answer(std::optional<std::size_t> preferred) {
    if (!pending_) throw Error(ErrorCode::kInvalidArgument, "no pending question");
    session_.apply_answer(*pending_, preferred ? Answer::preferred(*preferred) : Answer::indifferent());
    pending_.reset();
  }

  std::optional<std::size_t> simulated_answer(const Matrix& truth) {
    if (!pending_) throw Error(ErrorCode::kInvalidArgument, "no pending question");
    const Answer a = respond_simulated(CostMatrix(truth), *pending_, session_, 0.0, 0.0, rng_);
    if (a.kind == Answer::Kind::kIndifferent) return std::nullopt;
    return a.index;
  }

  const ElicitationSession& session() const { return session_; }

 private:
  static SessionConfig config(int budget, int k, const std::string& strategy, double epsilon,
                              double alpha, std::uint64_t seed) {
    SessionConfig c;
    c.budget = budget;
    c.k = k;
    c.strategy = strategy_from_string(strategy);
    c.margin = epsilon;
    c.alpha = alpha;
    c.seed = seed;
    return c;
  }

  ElicitationSession session_;
  std::optional<Question> pending_;
  Rng rng_;
};

}  // namespace

PYBIND11_MODULE(_reap, m) {
  m.doc() = "Cost-adaptive recourse by preference elicitation";

  py::register_exception<Error>(m, "ReapError");

  m.def("cost", [](const Matrix& a, const Vector& x, const Vector& x0) { return cost(a, x, x0); },
        py::arg("a"), py::arg("x"), py::arg("x0"));
  m.def("pair_matrix",
        [](const Vector& xi, const Vector& xj, const Vector& x0) { return pair_matrix(xi, xj, x0).entries(); },
        py::arg("xi"), py::arg("xj"), py::arg("x0"));

  m.def(
      "chebyshev_center",
      [](const std::vector<Matrix>& cuts, double margin, Eigen::Index dim) {
        const CenterResult r = chebyshev_center(spec_of(cuts, margin, dim_of(cuts, dim)));
        py::dict out;
        out["center"] = r.center.entries();
        out["radius"] = r.radius;
        out["status"] = to_string(r.status);
        return out;
      },
      py::arg("cuts"), py::arg("margin") = 0.01, py::arg("dim") = 0);

  m.def(
      "max_over_confidence",
      [](const Matrix& s, const std::vector<Matrix>& cuts, double margin) {
        const WorstCaseResult r = max_over_confidence(s, spec_of(cuts, margin, s.rows()));
        py::dict out;
        out["value"] = r.value;
        out["argmax"] = r.argmax.entries();
        out["dual_value"] = r.dual_value;
        out["gap"] = r.gap;
        out["status"] = to_string(r.status);
        return out;
      },
      py::arg("s"), py::arg("cuts"), py::arg("margin") = 0.01);

  m.def(
      "tolerant_center",
      [](const std::vector<Matrix>& cuts, double margin, double alpha) {
        const TolerantCenterResult r = tolerant_center(spec_of(cuts, margin, dim_of(cuts, 0)), alpha);
        py::dict out;
        out["center"] = r.center.entries();
        out["radius"] = r.radius;
        out["violated"] = r.violated;
        return out;
      },
      py::arg("cuts"), py::arg("margin"), py::arg("alpha"));

  m.def("gen_truth_lqr", [](const Matrix& q, const Matrix& r) { return gen_truth_lqr(q, r).entries(); },
        py::arg("q"), py::arg("r"));
  m.def(
      "gen_truth_random",
      [](Eigen::Index d, std::uint64_t seed) {
        Rng rng(seed);
        return gen_truth_random(d, rng).entries();
      },
      py::arg("d"), py::arg("seed"));

  m.def(
      "mean_rank",
      [](const Matrix& center, const Matrix& truth, const std::vector<Vector>& pool, const Vector& x0,
         std::size_t k) { return mean_rank(CostMatrix(center), CostMatrix(truth), pool, x0, k); },
      py::arg("center"), py::arg("truth"), py::arg("pool"), py::arg("x0"), py::arg("k") = 10);
  m.def("wilcoxon_one_sided", &wilcoxon_one_sided, py::arg("differences"));

  m.def(
      "generate_grad_logistic",
      [](const Vector& x0, const Vector& w, double b, const std::vector<Matrix>& cuts, double margin,
         double lam, int max_iters) {
        const LogisticRegression clf(w, b);
        GradConfig cfg;
        cfg.lambda = lam;
        cfg.max_iters = max_iters;
        const RecoursePlan plan = generate_grad(x0, clf, spec_of(cuts, margin, x0.size()), cfg);
        py::dict out;
        out["terminal"] = plan.terminal;
        out["valid"] = plan.valid;
        out["iterations"] = plan.iterations_used;
        out["worst_case_cost"] = plan.worst_case_cost;
        return out;
      },
      py::arg("x0"), py::arg("w"), py::arg("b"), py::arg("cuts") = std::vector<Matrix>{},
      py::arg("margin") = 0.01, py::arg("lam") = 1.0, py::arg("max_iters") = 1000);

  m.def(
      "run_experiment_json",
      [](const std::string& config) {
        const ExperimentConfig cfg = ExperimentConfig::from_json(nlohmann::json::parse(config));
        Report r;
        {
          py::gil_scoped_release release;
          r = run_experiment(cfg);
        }
        nlohmann::json out = report_json(r);
        out["raw_csv"] = raw_csv(r);
        return out.dump();
      },
      py::arg("config"));

  py::class_<PySession>(m, "Session")
      .def(py::init<const Vector&, const std::vector<Vector>&, int, int, const std::string&, double, double,
                    std::uint64_t>(),
           py::arg("x0"), py::arg("pool"), py::arg("budget") = 5, py::arg("k") = 2,
           py::arg("strategy") = "similar", py::arg("epsilon") = 0.01, py::arg("alpha") = 0.0,
           py::arg("seed") = 0)
      .def("next_question", &PySession::next_question)
      .def("answer", &PySession::answer, py::arg("preferred"))
      .def("simulated_answer", &PySession::simulated_answer, py::arg("truth"))
      .def_property_readonly("round", [](const PySession& s) { return s.session().round(); })
      .def_property_readonly("finished", [](const PySession& s) { return s.session().finished(); })
      .def_property_readonly("center", [](const PySession& s) { return s.session().incumbent().center.entries(); })
      .def_property_readonly("radius", [](const PySession& s) { return s.session().incumbent().radius; })
      .def_property_readonly("violated", [](const PySession& s) { return s.session().violated(); })
      .def_property_readonly("cuts", [](const PySession& s) {
        std::vector<Matrix> out;
        for (const auto& c : s.session().spec().cuts) out.push_back(c.entries());
        return out;
      })
      .def("transcript_json", [](const PySession& s) { return transcript_to_json(s.session().transcript()).dump(); });
}
