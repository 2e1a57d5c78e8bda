#include "rolecheck/review_server.hpp"

#include <httplib.h>

namespace rolecheck {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

int status_for(const Error& e) {
  const auto& k = e.kind();
  if (k == "UnknownItem") return 404;
  if (k == "AlreadyFinalized" || k == "IncompleteVerdicts") return 409;
  return 400;
}

nlohmann::json item_view(const ReviewItem& item) {
  nlohmann::json j = item.view;
  j["item_id"] = item.item_id;
  j["kind"] = to_string(item.kind);
  return j;
}

}  // namespace

ReviewServer::ReviewServer(ScreeningStore& store, std::string static_dir, int required_annotators)
    : store_(store),
      static_dir_(std::move(static_dir)),
      required_annotators_(required_annotators),
      server_(std::make_unique<httplib::Server>()) {
  // httplib's default adds SO_REUSEPORT, which lets a second server share a
  // busy port silently.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  install_routes();
}

ReviewServer::~ReviewServer() { stop(); }

void ReviewServer::install_routes() {
  auto& s = *server_;

  s.Get("/api/queue", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      if (!req.has_param("annotator")) throw UsageError("missing query parameter 'annotator'");
      auto kind = item_kind_from_string(req.has_param("kind") ? req.get_param_value("kind") : "memory");
      auto annotator = req.get_param_value("annotator");
      nlohmann::json items = nlohmann::json::array();
      for (const auto& item : store_.queue(annotator, kind)) items.push_back(item_view(item));
      send_json(res, 200, {{"annotator", annotator}, {"kind", to_string(kind)}, {"items", items}});
    } catch (const Error& e) {
      send_json(res, status_for(e), {{"error", e.kind()}, {"message", e.what()}});
    }
  });

  s.Post("/api/verdict", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      auto body = nlohmann::json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object()) throw UsageError("request body is not a JSON object");
      for (const char* field : {"item_id", "annotator_id", "decision"})
        if (!body.contains(field) || !body[field].is_string())
          throw UsageError(std::string("missing string field '") + field + "'");
      std::optional<std::string> reason;
      if (body.contains("reason") && body["reason"].is_string()) reason = body["reason"].get<std::string>();
      auto v = store_.record_verdict(body["item_id"].get<std::string>(), body["annotator_id"].get<std::string>(),
                                     decision_from_string(body["decision"].get<std::string>()), reason);
      send_json(res, 200, v.to_json());
    } catch (const Error& e) {
      send_json(res, status_for(e), {{"error", e.kind()}, {"message", e.what()}});
    }
  });

  s.Get("/api/progress", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, store_.progress());
  });

  s.Get("/api/agreement", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      auto kind = item_kind_from_string(req.has_param("kind") ? req.get_param_value("kind") : "memory");
      send_json(res, 200, store_.finalize_intersection(kind, required_annotators_).to_json());
    } catch (const IncompleteVerdicts& e) {
      nlohmann::json missing = nlohmann::json::array();
      for (const auto& m : e.missing()) missing.push_back({{"item_id", m.item_id}, {"annotator_id", m.annotator_id}});
      send_json(res, 409, {{"error", e.kind()}, {"message", e.what()}, {"missing", missing}});
    } catch (const Error& e) {
      send_json(res, status_for(e), {{"error", e.kind()}, {"message", e.what()}});
    }
  });

  if (!static_dir_.empty()) s.set_mount_point("/", static_dir_);
}

int ReviewServer::start(const std::string& host, int port) {
  if (thread_.joinable()) throw UsageError("review server already running");
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
    if (port_ < 0) throw PortBusy("could not bind any port on " + host);
  } else {
    if (!server_->bind_to_port(host, port)) throw PortBusy("port " + std::to_string(port) + " is not available");
    port_ = port;
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void ReviewServer::wait() {
  if (thread_.joinable()) thread_.join();
}

void ReviewServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace rolecheck
