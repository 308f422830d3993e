#include "reap/http_server.hpp"

#include <httplib.h>

#include "reap/error.hpp"

namespace reap {
namespace {

constexpr const char* kJson = "application/json";

void send(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  send(res, http_status(code), error_json(code, message));
}

nlohmann::json parse_body(const httplib::Request& req) {
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("request body is not JSON: ") + e.what());
  }
}

// Runs a handler and turns library errors into {code, message, detail}.
template <typename F>
httplib::Server::Handler guarded(F f, int ok_status = 200) {
  return [f, ok_status](const httplib::Request& req, httplib::Response& res) {
    try {
      send(res, ok_status, f(req));
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
    } catch (const std::exception& e) {
      send(res, 500, {{"code", "internal"}, {"message", e.what()}, {"detail", nlohmann::json::object()}});
    }
  };
}

}  // namespace

struct HttpServer::Impl {
  SessionService& service;
  httplib::Server server;

  explicit Impl(SessionService& s) : service(s) {}
};

HttpServer::HttpServer(SessionService& service, std::filesystem::path static_dir)
    : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  auto& svc = impl_->service;

  srv.set_pre_routing_handler([&svc](const httplib::Request& req, httplib::Response& res) {
    const std::string& key = svc.options().api_key;
    if (key.empty() || (req.path.rfind("/sessions", 0) != 0 && req.path != "/datasets")) {
      return httplib::Server::HandlerResponse::Unhandled;
    }
    if (req.get_header_value("X-API-Key") == key) return httplib::Server::HandlerResponse::Unhandled;
    send(res, 401, {{"code", "unauthorized"}, {"message", "missing or wrong X-API-Key"}, {"detail", nlohmann::json::object()}});
    return httplib::Server::HandlerResponse::Handled;
  });

  srv.Get("/datasets", guarded([&svc](const httplib::Request&) { return svc.datasets(); }));
  srv.Post("/sessions", guarded([&svc](const httplib::Request& req) { return svc.create(parse_body(req)); }, 201));
  srv.Get(R"(/sessions/([0-9a-f]+))",
          guarded([&svc](const httplib::Request& req) { return svc.get(req.matches[1]); }));
  srv.Post(R"(/sessions/([0-9a-f]+)/answers)", guarded([&svc](const httplib::Request& req) {
             return svc.submit_answer(req.matches[1], parse_body(req));
           }));
  srv.Post(R"(/sessions/([0-9a-f]+)/recourse)", guarded([&svc](const httplib::Request& req) {
             return svc.request_recourse(req.matches[1], parse_body(req));
           }));
  srv.Get(R"(/sessions/([0-9a-f]+)/transcript)",
          guarded([&svc](const httplib::Request& req) { return svc.transcript(req.matches[1]); }));

  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.status == 404 && res.body.empty()) send_error(res, ErrorCode::kNotFound, "no such route");
  });
  if (!static_dir.empty()) srv.set_mount_point("/", static_dir.string());
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p < 0) throw Error(ErrorCode::kIo, "cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace reap
