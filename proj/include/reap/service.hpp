#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reap/data.hpp"
#include "reap/elicit.hpp"
#include "reap/recourse_grad.hpp"
#include "reap/recourse_graph.hpp"

namespace reap {

/// A dataset the service can open sessions on: data, trained model, the
/// candidate pool (positively classified train rows) and the graph rows.
struct ServedDataset {
  std::string id;
  Dataset data;
  std::shared_ptr<const Classifier> clf;
  std::vector<std::size_t> pool_rows;
  std::vector<FeatureVector> pool;
  std::vector<std::size_t> graph_rows;
  GraphConfig graph;
  GradConfig grad;
};

struct DatasetOptions {
  std::uint64_t seed = 0;
  std::size_t pool_size = 500;
  std::size_t graph_nodes = 1000;
  TrainConfig train;
};

/// Deterministic in (data, options): reloading gives the same pool and model.
ServedDataset prepare_dataset(std::string id, Dataset data, const DatasetOptions& options = {});
ServedDataset synthetic_dataset(const std::string& id, std::size_t n, const DatasetOptions& options = {});
ServedDataset csv_dataset(const std::string& id, const std::string& csv, const std::string& schema,
                          const DatasetOptions& options = {});

class DatasetRegistry {
 public:
  void add(ServedDataset d);
  std::shared_ptr<const ServedDataset> get(const std::string& id) const;  // kNotFound
  nlohmann::json list() const;

 private:
  std::map<std::string, std::shared_ptr<const ServedDataset>> items_;
};

enum class SessionStatus { kAwaitingAnswer, kReady, kCompleted, kFailed };

const char* to_string(SessionStatus s);

/// Parsed body of POST /sessions.
struct CreateRequest {
  std::string dataset_id;
  std::optional<std::size_t> test_row;     // index into the test split
  std::optional<nlohmann::json> features;  // original units, by feature name
  SessionConfig session;

  static CreateRequest from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// One live session. The event log is the source of truth; the elicitation
/// state is rebuilt from it on load.
class SessionRecord {
 public:
  SessionRecord(std::string id, std::shared_ptr<const ServedDataset> dataset, CreateRequest request,
                std::int64_t created_ms);

  const std::string& id() const { return id_; }
  SessionStatus status() const { return status_; }
  const ElicitationSession& session() const { return *session_; }
  const ServedDataset& dataset() const { return *dataset_; }
  const CreateRequest& request() const { return request_; }
  const std::optional<Question>& pending() const { return pending_; }

  /// Applies one answer. A repeated token returns the cached response; a
  /// token reused with a different answer is a conflict.
  nlohmann::json submit(const std::string& token, const nlohmann::json& answer, std::int64_t now_ms);
  nlohmann::json recourse(const std::string& method, std::int64_t now_ms);
  nlohmann::json to_json() const;
  nlohmann::json transcript_json() const;

  std::mutex& mutex() { return mutex_; }

  // Events not yet written to the log, oldest first.
  std::vector<nlohmann::json> take_new_events();
  /// Re-applies a logged event without recording it again.
  void replay(const nlohmann::json& event);

 private:
  void advance();
  nlohmann::json apply(const std::string& token, const nlohmann::json& answer, std::int64_t now_ms);
  nlohmann::json question_json(const Question& q) const;

  std::string id_;
  std::shared_ptr<const ServedDataset> dataset_;
  CreateRequest request_;
  std::unique_ptr<ElicitationSession> session_;
  SessionStatus status_ = SessionStatus::kAwaitingAnswer;
  std::optional<Question> pending_;
  nlohmann::json failure_;
  std::map<std::string, std::pair<nlohmann::json, nlohmann::json>> tokens_;  // token -> (answer, response)
  std::vector<nlohmann::json> new_events_;
  std::int64_t created_ms_ = 0, updated_ms_ = 0;
  std::mutex mutex_;
};

struct ServiceOptions {
  std::filesystem::path storage;  // empty = in memory only
  std::string api_key;            // empty = no key required
};

/// Session store with per-session locking and a JSON-lines event log per
/// session under `storage`. Existing logs are replayed on construction.
class SessionService {
 public:
  SessionService(std::shared_ptr<const DatasetRegistry> datasets, ServiceOptions options = {});

  nlohmann::json create(const nlohmann::json& body);
  nlohmann::json get(const std::string& id);
  nlohmann::json submit_answer(const std::string& id, const nlohmann::json& body);
  nlohmann::json request_recourse(const std::string& id, const nlohmann::json& body);
  nlohmann::json transcript(const std::string& id);
  nlohmann::json datasets() const { return datasets_->list(); }

  const ServiceOptions& options() const { return options_; }
  std::size_t size() const;

 private:
  std::shared_ptr<SessionRecord> find(const std::string& id);
  void persist(SessionRecord& r);
  void load_all();
  std::string new_id();

  std::shared_ptr<const DatasetRegistry> datasets_;
  ServiceOptions options_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<SessionRecord>> sessions_;
  std::mutex id_mutex_;
  Rng id_rng_;
};

/// Rebuilds a session from a JSON-lines event log (the format the service
/// persists), e.g. for one-shot recourse from the command line.
std::unique_ptr<SessionRecord> load_session_log(const std::filesystem::path& path,
                                                const DatasetRegistry& datasets);

/// {code, message, detail} and the HTTP status for an error code.
nlohmann::json error_json(ErrorCode code, const std::string& message,
                          const nlohmann::json& detail = nlohmann::json::object());
int http_status(ErrorCode code);

}  // namespace reap
