#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "reap/service.hpp"

namespace reap {

/// HTTP+JSON front end over a SessionService:
///   POST /sessions, GET /sessions/{id}, POST /sessions/{id}/answers,
///   POST /sessions/{id}/recourse, GET /sessions/{id}/transcript, GET /datasets.
/// When an API key is configured every request must carry it in X-API-Key.
class HttpServer {
 public:
  explicit HttpServer(SessionService& service, std::filesystem::path static_dir = {});
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop() is called.
  void listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace reap
