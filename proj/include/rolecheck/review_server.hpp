#pragma once

#include <memory>
#include <string>
#include <thread>

#include "rolecheck/screening.hpp"

namespace httplib {
class Server;
}

namespace rolecheck {

// HTTP front for a ScreeningStore:
//   GET  /api/queue?annotator=<id>&kind=<memory|query_pair>
//   POST /api/verdict   {item_id, annotator_id, decision, reason?}
//   GET  /api/progress
//   GET  /api/agreement?kind=<memory|query_pair>
// Everything else is served from `static_dir` when one is given.
// Domain errors come back as {"error": <kind>, "message": ...} with 4xx.
class ReviewServer {
 public:
  ReviewServer(ScreeningStore& store, std::string static_dir = {}, int required_annotators = 3);
  ~ReviewServer();
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  // Binds and starts serving on a background thread. Port 0 picks a free
  // port. Throws PortBusy when the port cannot be bound.
  int start(const std::string& host, int port);
  // Blocks the caller until stop() is called from elsewhere.
  void wait();
  void stop();
  int port() const noexcept { return port_; }

 private:
  void install_routes();

  ScreeningStore& store_;
  std::string static_dir_;
  int required_annotators_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace rolecheck
