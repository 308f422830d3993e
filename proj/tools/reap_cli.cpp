// reap: serve | bench | elicit-sim | recourse

#include <CLI11.hpp>

#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "reap/bench.hpp"
#include "reap/error.hpp"
#include "reap/http_server.hpp"
#include "reap/service.hpp"

namespace fs = std::filesystem;
using namespace reap;

namespace {

struct DataFlags {
  std::string id = "synthetic";
  std::string csv, schema;
  std::size_t synthetic_n = 1000;
  std::size_t pool_size = 500;
  std::size_t graph_nodes = 1000;
  int epochs = 200;
  std::uint64_t seed = 0;
  std::vector<std::string> extra;  // id=csv,schema

  void add_to(CLI::App* app) {
    app->add_option("--dataset-id", id, "Id of the primary dataset");
    app->add_option("--csv", csv, "CSV file; synthetic data when omitted");
    app->add_option("--schema", schema, "Schema JSON for --csv");
    app->add_option("--synthetic-n", synthetic_n, "Synthetic sample size");
    app->add_option("--pool-size", pool_size, "Cap on the candidate pool");
    app->add_option("--graph-nodes", graph_nodes, "Cap on graph rows");
    app->add_option("--epochs", epochs, "Classifier training epochs");
    app->add_option("--seed", seed, "Base seed");
  }

  DatasetOptions options() const {
    DatasetOptions o;
    o.seed = seed;
    o.pool_size = pool_size;
    o.graph_nodes = graph_nodes;
    o.train.epochs = epochs;
    return o;
  }

  std::shared_ptr<DatasetRegistry> registry() const {
    auto reg = std::make_shared<DatasetRegistry>();
    if (csv.empty()) {
      reg->add(synthetic_dataset(id, synthetic_n, options()));
    } else {
      if (schema.empty()) throw Error(ErrorCode::kInvalidArgument, "--csv needs --schema");
      reg->add(csv_dataset(id, csv, schema, options()));
    }
    for (const auto& spec : extra) {
      const auto eq = spec.find('='), comma = spec.find(',');
      if (eq == std::string::npos || comma == std::string::npos || comma < eq) {
        throw Error(ErrorCode::kInvalidArgument, "--add-dataset expects id=csv,schema: " + spec);
      }
      reg->add(csv_dataset(spec.substr(0, eq), spec.substr(eq + 1, comma - eq - 1), spec.substr(comma + 1), options()));
    }
    return reg;
  }
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + p.string());
  out << text;
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ',');) out.push_back(std::stoul(tok));
  return out;
}

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int run_serve(const DataFlags& data, const std::string& host, int port, const std::string& storage,
              const std::string& api_key, const std::string& static_dir) {
  auto reg = data.registry();
  SessionService svc(reg, {storage, api_key});
  HttpServer server(svc, static_dir);
  const int bound = server.bind(host, port);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "listening on " << host << ':' << bound << " (" << svc.size() << " sessions restored)\n";
  server.listen();
  g_server = nullptr;
  return 0;
}

int run_bench(const std::string& config_path, const fs::path& out_dir, std::optional<std::uint64_t> seed,
              std::optional<std::size_t> threads, const std::string& timing_sizes, bool record_time) {
  ExperimentConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open config " + config_path);
    cfg = ExperimentConfig::from_json(nlohmann::json::parse(in));
  }
  if (seed) cfg.seed = *seed;
  if (threads) cfg.threads = *threads;
  if (record_time) cfg.record_time = true;
  fs::create_directories(out_dir);
  const auto start = std::chrono::steady_clock::now();
  const Report r = run_experiment(cfg);
  write_file(out_dir / "raw.csv", raw_csv(r));
  write_file(out_dir / "report.csv", report_csv(r));
  write_file(out_dir / "sweep.csv", sweep_csv(r));
  write_file(out_dir / "report.json", report_json(r).dump(2) + "\n");
  for (const auto& c : r.comparisons) {
    std::cout << c.first << " vs " << c.second << " on " << c.metric << " at T=" << c.t << ": "
              << c.mean_first << " vs " << c.mean_second << ", one-sided p = "
              << (c.p_value ? std::to_string(*c.p_value) : "NA (" + c.note + ")") << '\n';
  }
  if (!timing_sizes.empty()) {
    write_file(out_dir / "timing.csv", timing_csv(heuristic_timing(parse_sizes(timing_sizes), cfg.seed)));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cerr << "wrote " << out_dir.string() << " in " << secs << " s\n";
  return 0;
}

int run_elicit_sim(const DataFlags& data, const nlohmann::json& request, std::uint64_t truth_seed,
                   const std::string& save) {
  auto reg = data.registry();
  auto dataset = reg->get(data.id);
  CreateRequest req = CreateRequest::from_json(request);
  if (!req.test_row) throw Error(ErrorCode::kInvalidArgument, "simulation needs a test row subject");
  Rng rng(truth_seed);
  const CostMatrix truth = gen_truth_random(dataset->data.dim(), rng);
  SessionRecord rec("sim" + std::to_string(truth_seed), dataset, req, 0);
  std::vector<nlohmann::json> events = rec.take_new_events();
  int token = 0;
  while (rec.status() == SessionStatus::kAwaitingAnswer) {
    const Answer a = respond_simulated(truth, *rec.pending(), rec.session(), 0.0, 0.0, rng);
    rec.submit("sim-" + std::to_string(token++), to_json(a), 0);
    for (auto& e : rec.take_new_events()) events.push_back(std::move(e));
  }
  if (!save.empty()) {
    std::string text;
    for (const auto& e : events) text += e.dump() + "\n";
    write_file(save, text);
  }
  nlohmann::json out = rec.transcript_json();
  out["truth"] = to_json(truth.entries());
  out["final"] = rec.to_json();
  std::cout << out.dump(2) << '\n';
  return rec.status() == SessionStatus::kFailed ? 2 : 0;
}

int run_recourse(const DataFlags& data, const std::string& session_file, const std::string& method) {
  auto reg = data.registry();
  auto rec = load_session_log(session_file, *reg);
  std::cout << rec->recourse(method, 0).dump(2) << '\n';
  return 0;
}

std::size_t first_negative_test_row(const DataFlags& data) {
  auto reg = data.registry();
  const auto d = reg->get(data.id);
  for (std::size_t i = 0; i < d->data.test.size(); ++i) {
    if (!d->clf->predict(d->data.row(d->data.test[i]))) return i;
  }
  throw Error(ErrorCode::kInvalidArgument, "no negatively classified test row");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cost-adaptive recourse by preference elicitation"};
  app.require_subcommand(1);

  DataFlags data;

  auto* serve = app.add_subcommand("serve", "Run the HTTP session API");
  std::string host = "127.0.0.1", storage = "sessions", api_key, static_dir;
  int port = 8080;
  data.add_to(serve);
  serve->add_option("--add-dataset", data.extra, "Extra CSV dataset as id=csv,schema");
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--storage", storage, "Directory for session event logs");
  serve->add_option("--api-key", api_key, "Require this X-API-Key header");
  serve->add_option("--static-dir", static_dir, "Serve UI assets from this directory");

  auto* bench = app.add_subcommand("bench", "Run an experiment config");
  std::string config_path, timing;
  fs::path out_dir = "bench_out";
  std::optional<std::uint64_t> bench_seed;
  std::optional<std::size_t> threads;
  bool record_time = false;
  bench->add_option("config", config_path, "Experiment config JSON; defaults when omitted");
  bench->add_option("--out", out_dir, "Output directory");
  bench->add_option("--seed", bench_seed, "Override the config seed");
  bench->add_option("--threads", threads, "Worker threads");
  bench->add_option("--timing", timing, "Also time question selection at these pool sizes, e.g. 100,1000,10000");
  bench->add_flag("--record-time", record_time, "Fill the time_ms column");

  auto* sim = app.add_subcommand("elicit-sim", "Run one simulated elicitation and print its transcript");
  int t = 5, k = 2;
  std::string strategy = "similar";
  double epsilon = 0.01, alpha = 0.0;
  std::optional<std::size_t> subject;
  std::uint64_t truth_seed = 1;
  std::string save;
  data.add_to(sim);
  sim->add_option("--T", t, "Question budget");
  sim->add_option("--k", k, "Options per question");
  sim->add_option("--strategy", strategy, "similar, exhaustive or random");
  sim->add_option("--epsilon", epsilon);
  sim->add_option("--alpha", alpha, "Tolerant fallback budget");
  sim->add_option("--subject", subject, "Test-row index; first negative row when omitted");
  sim->add_option("--truth-seed", truth_seed, "Seed of the simulated truth matrix");
  sim->add_option("--save", save, "Write the session event log here");

  auto* rec = app.add_subcommand("recourse", "Generate recourse from a saved session log");
  std::string session_file, method = "grad";
  data.add_to(rec);
  rec->add_option("session", session_file, "Session event log (JSON lines)")->required();
  rec->add_option("--method", method, "grad, graph or graph-worst-case");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) return run_serve(data, host, port, storage, api_key, static_dir);
    if (*bench) return run_bench(config_path, out_dir, bench_seed, threads, timing, record_time);
    if (*sim) {
      const std::size_t row = subject ? *subject : first_negative_test_row(data);
      const nlohmann::json request = {{"dataset_id", data.id},
                                      {"subject", {{"test_row", row}}},
                                      {"T", t},
                                      {"k", k},
                                      {"strategy", strategy},
                                      {"epsilon", epsilon},
                                      {"alpha", alpha},
                                      {"seed", data.seed}};
      return run_elicit_sim(data, request, truth_seed, save);
    }
    if (*rec) return run_recourse(data, session_file, method);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
