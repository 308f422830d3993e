#include "reap/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "reap/bench.hpp"
#include "reap/error.hpp"

namespace reap {
namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::vector<std::size_t> sample_sorted(std::vector<std::size_t> rows, std::size_t cap, Rng& rng) {
  if (rows.size() > cap) {
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(cap);
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

void append_lines(const std::filesystem::path& file, const std::vector<nlohmann::json>& events) {
  if (events.empty()) return;
  std::string buf;
  for (const auto& e : events) buf += e.dump() + '\n';
  // One write() on an O_APPEND descriptor, so concurrent readers never see a
  // half-written batch from this process.
  const int fd = ::open(file.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw Error(ErrorCode::kIo, "cannot open event log " + file.string() + ": " + std::strerror(errno));
  const char* p = buf.data();
  std::size_t left = buf.size();
  while (left > 0) {
    const ssize_t n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw Error(ErrorCode::kIo, "event log write failed: " + std::string(std::strerror(err)));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  ::fdatasync(fd);
  ::close(fd);
}

std::vector<nlohmann::json> read_events(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::kIo, "cannot open session log " + file.string());
  std::vector<nlohmann::json> events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      events.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error&) {
      // A torn final line from a crash mid-write; everything before it stands.
      if (in.peek() == EOF) break;
      throw Error(ErrorCode::kParse, "corrupt event in " + file.string());
    }
  }
  if (events.empty() || events.front().value("type", "") != "created") {
    throw Error(ErrorCode::kParse, "session log must start with a created event: " + file.string());
  }
  return events;
}

}  // namespace

ServedDataset prepare_dataset(std::string id, Dataset data, const DatasetOptions& options) {
  ServedDataset d;
  d.id = std::move(id);
  d.data = std::move(data);
  TrainConfig tc = options.train;
  tc.seed = derive_seed(options.seed, 2);
  d.clf = train_classifier(d.data, tc);
  Rng rng(derive_seed(options.seed, 4));
  const Partition train = partition(d.data, *d.clf, d.data.train);
  d.pool_rows = sample_sorted(train.positive, options.pool_size, rng);
  for (std::size_t r : d.pool_rows) d.pool.push_back(d.data.row(r));
  if (d.pool.size() < 2) throw Error(ErrorCode::kInvalidArgument, "dataset has fewer than 2 positive train rows");
  d.graph_rows = sample_sorted(d.data.train, options.graph_nodes, rng);
  return d;
}

ServedDataset synthetic_dataset(const std::string& id, std::size_t n, const DatasetOptions& options) {
  Rng rng(derive_seed(options.seed, 1));
  Dataset data = gen_synthetic(n, rng);
  data.name = id;
  return prepare_dataset(id, std::move(data), options);
}

ServedDataset csv_dataset(const std::string& id, const std::string& csv, const std::string& schema,
                          const DatasetOptions& options) {
  Dataset data = load_csv(csv, load_schema(schema), derive_seed(options.seed, 3));
  data.name = id;
  return prepare_dataset(id, std::move(data), options);
}

void DatasetRegistry::add(ServedDataset d) {
  const std::string id = d.id;
  items_[id] = std::make_shared<const ServedDataset>(std::move(d));
}

std::shared_ptr<const ServedDataset> DatasetRegistry::get(const std::string& id) const {
  const auto it = items_.find(id);
  if (it == items_.end()) throw Error(ErrorCode::kNotFound, "unknown dataset: " + id);
  return it->second;
}

nlohmann::json DatasetRegistry::list() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [id, d] : items_) {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& b : d->data.blocks) {
      nlohmann::json f = {{"name", b.name}};
      if (b.kind == FeatureKind::kContinuous) {
        f["kind"] = "continuous";
        f["min"] = b.min;
        f["max"] = b.max;
      } else {
        f["kind"] = "categorical";
        f["categories"] = b.categories;
      }
      features.push_back(f);
    }
    out.push_back({{"id", id},
                   {"rows", d->data.size()},
                   {"test_rows", d->data.test.size()},
                   {"pool_size", d->pool.size()},
                   {"features", features}});
  }
  return out;
}

const char* to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::kAwaitingAnswer: return "awaiting_answer";
    case SessionStatus::kReady: return "ready";
    case SessionStatus::kCompleted: return "completed";
    case SessionStatus::kFailed: return "failed";
  }
  return "?";
}

CreateRequest CreateRequest::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kParse, "request body must be a JSON object");
  CreateRequest r;
  try {
    r.dataset_id = j.at("dataset_id").get<std::string>();
    const auto& subject = j.at("subject");
    if (subject.contains("test_row")) {
      r.test_row = subject["test_row"].get<std::size_t>();
    } else if (subject.contains("features")) {
      r.features = subject["features"];
    } else {
      throw Error(ErrorCode::kParse, "subject needs 'test_row' or 'features'");
    }
    r.session.budget = j.value("T", r.session.budget);
    if (j.contains("strategy")) r.session.strategy = strategy_from_string(j["strategy"].get<std::string>());
    r.session.k = j.value("k", r.session.k);
    r.session.margin = j.value("epsilon", r.session.margin);
    r.session.alpha = j.value("alpha", r.session.alpha);
    if (j.contains("gamma") && !j["gamma"].is_null()) r.session.gamma = j["gamma"].get<double>();
    r.session.seed = j.value("seed", r.session.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("create session: ") + e.what());
  }
  if (r.session.budget < 0) throw Error(ErrorCode::kInvalidArgument, "T must be nonnegative");
  if (r.session.k < 2) throw Error(ErrorCode::kInvalidArgument, "k must be at least 2");
  if (!(r.session.margin >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "epsilon must be nonnegative");
  if (!(r.session.alpha >= 0.0 && r.session.alpha <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must lie in [0, 1]");
  }
  return r;
}

nlohmann::json CreateRequest::to_json() const {
  nlohmann::json subject = test_row ? nlohmann::json{{"test_row", *test_row}} : nlohmann::json{{"features", *features}};
  return {{"dataset_id", dataset_id},
          {"subject", subject},
          {"T", session.budget},
          {"strategy", reap::to_string(session.strategy)},
          {"k", session.k},
          {"epsilon", session.margin},
          {"alpha", session.alpha},
          {"gamma", session.gamma ? nlohmann::json(*session.gamma) : nlohmann::json()},
          {"seed", session.seed}};
}

SessionRecord::SessionRecord(std::string id, std::shared_ptr<const ServedDataset> dataset,
                             CreateRequest request, std::int64_t created_ms)
    : id_(std::move(id)), dataset_(std::move(dataset)), request_(std::move(request)),
      created_ms_(created_ms), updated_ms_(created_ms) {
  const Dataset& data = dataset_->data;
  FeatureVector x0;
  if (request_.test_row) {
    if (*request_.test_row >= data.test.size()) {
      throw Error(ErrorCode::kInvalidArgument, "test_row outside the test split");
    }
    x0 = data.row(data.test[*request_.test_row]);
  } else {
    x0 = data.scale(*request_.features);
  }
  if (dataset_->clf->predict(x0)) {
    throw Error(ErrorCode::kSubjectPositive, "subject is already classified positively");
  }
  session_ = std::make_unique<ElicitationSession>(x0, dataset_->pool, request_.session);
  new_events_.push_back({{"type", "created"}, {"id", id_}, {"time", created_ms}, {"request", request_.to_json()}});
  advance();
}

void SessionRecord::advance() {
  pending_.reset();
  if (session_->finished()) {
    status_ = SessionStatus::kReady;
    return;
  }
  try {
    pending_ = session_->next_question();
    status_ = SessionStatus::kAwaitingAnswer;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kPoolExhausted) throw;
    // No admissible question left: the current center is final.
    status_ = SessionStatus::kReady;
  }
}

nlohmann::json SessionRecord::submit(const std::string& token, const nlohmann::json& answer, std::int64_t now) {
  if (token.empty()) throw Error(ErrorCode::kInvalidArgument, "an idempotency token is required");
  const auto it = tokens_.find(token);
  if (it != tokens_.end()) {
    if (it->second.first != answer) {
      throw Error(ErrorCode::kConflict, "token already used with a different answer");
    }
    return it->second.second;
  }
  if (status_ == SessionStatus::kFailed) throw Error(ErrorCode::kConflict, "session has failed");
  if (status_ != SessionStatus::kAwaitingAnswer) throw Error(ErrorCode::kConflict, "session is not awaiting an answer");
  return apply(token, answer, now);
}

nlohmann::json SessionRecord::apply(const std::string& token, const nlohmann::json& answer, std::int64_t now) {
  const Answer a = answer_from_json(answer);
  const Question q = *pending_;
  // Validated before anything is logged so malformed answers leave no trace.
  if (a.kind == Answer::Kind::kPreferred &&
      std::find(q.options.begin(), q.options.end(), a.index) == q.options.end()) {
    throw Error(ErrorCode::kInvalidArgument, "preferred index is not one of the pending options");
  }
  if (a.kind == Answer::Kind::kIndifferent && q.options.size() != 2) {
    throw Error(ErrorCode::kInvalidArgument, "indifference is only defined for k = 2");
  }
  updated_ms_ = now;
  new_events_.push_back({{"type", "answer"}, {"token", token}, {"round", session_->round()},
                         {"answer", answer}, {"time", now}});
  try {
    session_->apply_answer(q, a);
    advance();
  } catch (const Error& e) {
    status_ = SessionStatus::kFailed;
    pending_.reset();
    failure_ = error_json(e.code(), e.what(), {{"round", session_->round()}});
  }
  nlohmann::json response = to_json();
  tokens_[token] = {answer, response};
  return response;
}

void SessionRecord::replay(const nlohmann::json& event) {
  const std::string type = event.at("type");
  const std::int64_t time = event.value("time", std::int64_t{0});
  if (type == "answer") {
    const std::string token = event.at("token");
    if (status_ != SessionStatus::kAwaitingAnswer) {
      throw Error(ErrorCode::kParse, "logged answer for a session that is not awaiting one");
    }
    apply(token, event.at("answer"), time);
  } else if (type == "recourse") {
    if (status_ == SessionStatus::kReady) status_ = SessionStatus::kCompleted;
    updated_ms_ = time;
  } else {
    throw Error(ErrorCode::kParse, "unknown event type: " + type);
  }
  new_events_.clear();
}

std::vector<nlohmann::json> SessionRecord::take_new_events() {
  std::vector<nlohmann::json> out;
  out.swap(new_events_);
  return out;
}

nlohmann::json SessionRecord::question_json(const Question& q) const {
  const Dataset& data = dataset_->data;
  nlohmann::json options = nlohmann::json::array();
  for (std::size_t idx : q.options) {
    const FeatureVector& x = dataset_->pool[idx];
    options.push_back({{"index", idx},
                       {"features", data.unscale(x)},
                       {"deltas", data.deltas(session_->x0(), x)}});
  }
  return {{"round", session_->round() + 1},
          {"of", session_->config().budget},
          {"k", q.options.size()},
          {"indifferent_allowed", q.options.size() == 2},
          {"options", options}};
}

nlohmann::json SessionRecord::to_json() const {
  const auto& inc = session_->incumbent();
  nlohmann::json j = {{"session_id", id_},
                      {"dataset_id", request_.dataset_id},
                      {"status", reap::to_string(status_)},
                      {"round", session_->round()},
                      {"T", session_->config().budget},
                      {"subject", dataset_->data.unscale(session_->x0())},
                      {"center", reap::to_json(inc.center.entries())},
                      {"radius", inc.radius},
                      {"violated", session_->violated()},
                      {"created_ms", created_ms_},
                      {"updated_ms", updated_ms_}};
  j["question"] = pending_ ? question_json(*pending_) : nlohmann::json();
  if (status_ == SessionStatus::kFailed) j["failure"] = failure_;
  return j;
}

nlohmann::json SessionRecord::transcript_json() const {
  nlohmann::json entries = transcript_to_json(session_->transcript());
  const Dataset& data = dataset_->data;
  for (auto& e : entries) {
    nlohmann::json opts = nlohmann::json::array();
    for (const auto& idx : e["option_indices"]) opts.push_back(data.unscale(dataset_->pool[idx.get<std::size_t>()]));
    e["options"] = opts;
  }
  return {{"session_id", id_}, {"status", reap::to_string(status_)}, {"entries", entries}};
}

nlohmann::json SessionRecord::recourse(const std::string& method_name, std::int64_t now) {
  if (status_ != SessionStatus::kReady && status_ != SessionStatus::kCompleted) {
    throw Error(ErrorCode::kConflict, std::string("recourse needs a ready session, status is ") + reap::to_string(status_));
  }
  const Method method = method_from_string(method_name);
  const Dataset& data = dataset_->data;
  const Classifier& clf = *dataset_->clf;
  const FeatureVector& x0 = session_->x0();
  const CostMatrix& center = session_->incumbent().center;
  const ConfidenceSetSpec spec = session_->spec();

  nlohmann::json out = {{"session_id", id_}, {"method", to_string(method)}};
  nlohmann::json steps = nlohmann::json::array();
  FeatureVector terminal;
  if (method == Method::kGrad || method == Method::kWachter) {
    const ConfidenceSetSpec empty{{}, spec.margin, spec.dimension};
    const RecoursePlan plan = generate_grad(x0, clf, method == Method::kGrad ? spec : empty, dataset_->grad);
    if (!plan.valid) {
      throw Error(ErrorCode::kInvalidPlan, "gradient descent found no valid point over the whole lambda schedule");
    }
    terminal = plan.terminal;
    out["valid"] = true;
    out["worst_case_cost"] = plan.worst_case_cost;
    out["iterations"] = plan.iterations_used;
    out["lambda"] = plan.lambda_used;
    steps.push_back({{"features", data.unscale(terminal)}, {"deltas", data.deltas(x0, terminal)}});
  } else {
    RecourseGraph g = build_graph(data, dataset_->graph_rows, clf, x0, dataset_->graph);
    SequentialPlan plan;
    if (method == Method::kGraphWorstCase) {
      plan = shortest_sequential_recourse(g, worst_case_edge_weight(g, spec));
    } else {
      g = assign_weights(std::move(g), method == Method::kFace ? CostMatrix::identity(data.dim(), 0.5) : center);
      plan = shortest_sequential_recourse(g);
    }
    terminal = g.node(plan.path.back());
    out["valid"] = g.classes[plan.path.back()] == 1;
    out["path_cost"] = plan.path_cost;
    out["path"] = plan.path;
    out["terminal_class"] = g.classes[plan.path.back()];
    for (std::size_t s = 1; s < plan.path.size(); ++s) {
      const FeatureVector from = g.node(plan.path[s - 1]);
      const FeatureVector to = g.node(plan.path[s]);
      steps.push_back({{"node", plan.path[s]},
                       {"features", data.unscale(to)},
                       {"deltas", data.deltas(from, to)},
                       {"edge_cost", plan.edge_costs[s - 1]}});
    }
  }
  out["subject"] = data.unscale(x0);
  out["terminal"] = data.unscale(terminal);
  out["total_deltas"] = data.deltas(x0, terminal);
  out["center_cost"] = cost(center, terminal, x0);
  out["steps"] = steps;

  status_ = SessionStatus::kCompleted;
  updated_ms_ = now;
  new_events_.push_back({{"type", "recourse"}, {"method", to_string(method)}, {"time", now}});
  return out;
}

SessionService::SessionService(std::shared_ptr<const DatasetRegistry> datasets, ServiceOptions options)
    : datasets_(std::move(datasets)), options_(std::move(options)), id_rng_(std::random_device{}()) {
  if (!options_.storage.empty()) {
    std::filesystem::create_directories(options_.storage);
    load_all();
  }
}

std::string SessionService::new_id() {
  std::lock_guard<std::mutex> lock(id_mutex_);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(id_rng_()));
  return buf;
}

std::size_t SessionService::size() const {
  std::shared_lock<std::shared_mutex> lock(map_mutex_);
  return sessions_.size();
}

std::shared_ptr<SessionRecord> SessionService::find(const std::string& id) {
  std::shared_lock<std::shared_mutex> lock(map_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::kNotFound, "unknown session: " + id);
  return it->second;
}

void SessionService::persist(SessionRecord& r) {
  auto events = r.take_new_events();
  if (options_.storage.empty()) return;
  append_lines(options_.storage / (r.id() + ".jsonl"), events);
}

nlohmann::json SessionService::create(const nlohmann::json& body) {
  CreateRequest req = CreateRequest::from_json(body);
  auto dataset = datasets_->get(req.dataset_id);
  auto record = std::make_shared<SessionRecord>(new_id(), std::move(dataset), std::move(req), now_ms());
  std::lock_guard<std::mutex> lock(record->mutex());
  persist(*record);
  {
    std::unique_lock<std::shared_mutex> map_lock(map_mutex_);
    sessions_[record->id()] = record;
  }
  return record->to_json();
}

nlohmann::json SessionService::get(const std::string& id) {
  auto r = find(id);
  std::lock_guard<std::mutex> lock(r->mutex());
  return r->to_json();
}

nlohmann::json SessionService::submit_answer(const std::string& id, const nlohmann::json& body) {
  if (!body.is_object() || !body.contains("token") || !body["token"].is_string() || !body.contains("answer")) {
    throw Error(ErrorCode::kParse, "body must be {token: string, answer: object}");
  }
  auto r = find(id);
  std::lock_guard<std::mutex> lock(r->mutex());
  nlohmann::json out = r->submit(body["token"].get<std::string>(), body["answer"], now_ms());
  persist(*r);
  return out;
}

nlohmann::json SessionService::request_recourse(const std::string& id, const nlohmann::json& body) {
  if (!body.is_object() || !body.contains("method") || !body["method"].is_string()) {
    throw Error(ErrorCode::kParse, "body must be {method: string}");
  }
  const std::string method = body["method"];
  if (method != "grad" && method != "graph" && method != "graph-worst-case") {
    throw Error(ErrorCode::kInvalidArgument, "method must be grad, graph or graph-worst-case");
  }
  auto r = find(id);
  std::lock_guard<std::mutex> lock(r->mutex());
  nlohmann::json out = r->recourse(method, now_ms());
  persist(*r);
  return out;
}

nlohmann::json SessionService::transcript(const std::string& id) {
  auto r = find(id);
  std::lock_guard<std::mutex> lock(r->mutex());
  return r->transcript_json();
}

std::unique_ptr<SessionRecord> load_session_log(const std::filesystem::path& path,
                                                const DatasetRegistry& datasets) {
  const auto events = read_events(path);
  const auto& created = events.front();
  CreateRequest req = CreateRequest::from_json(created.at("request"));
  auto dataset = datasets.get(req.dataset_id);
  auto r = std::make_unique<SessionRecord>(created.at("id").get<std::string>(), std::move(dataset),
                                           std::move(req), created.value("time", std::int64_t{0}));
  r->take_new_events();
  for (std::size_t i = 1; i < events.size(); ++i) r->replay(events[i]);
  return r;
}

void SessionService::load_all() {
  for (const auto& entry : std::filesystem::directory_iterator(options_.storage)) {
    if (entry.path().extension() != ".jsonl") continue;
    try {
      std::unique_ptr<SessionRecord> r = load_session_log(entry.path(), *datasets_);
      const std::string id = r->id();
      sessions_[id] = std::shared_ptr<SessionRecord>(std::move(r));
    } catch (const Error& e) {
      // A log for a dataset that is not being served stays on disk untouched.
      std::fprintf(stderr, "skipping session log %s: %s\n", entry.path().c_str(), e.what());
    }
  }
}

nlohmann::json error_json(ErrorCode code, const std::string& message, const nlohmann::json& detail) {
  return {{"code", to_string(code)}, {"message", message}, {"detail", detail}};
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kConflict:
    case ErrorCode::kBudgetExceeded: return 409;
    case ErrorCode::kSubjectPositive:
    case ErrorCode::kInfeasible:
    case ErrorCode::kUnreachable:
    case ErrorCode::kInvalidPlan:
    case ErrorCode::kPoolExhausted: return 422;
    case ErrorCode::kParse:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kDimensionMismatch: return 400;
    default: return 500;
  }
}

}  // namespace reap
