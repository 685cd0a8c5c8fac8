#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <thread>

#include "rating/service.hpp"

namespace httplib {
class Server;
}

namespace ieqa::rating {

/// JSON-over-HTTP front end for a RatingService.
///
///   POST /sessions                 {"rater_id", "seed"?}       -> session
///   GET  /sessions/{id}                                         -> session
///   GET  /sessions/{id}/next                                    -> sample | break | done
///   POST /sessions/{id}/ratings    {"case_id", "scores", "dwell_ms"?} -> session
///   GET  /export                                                -> ratings CSV
///   GET  /images/{case_id}/{source|edited}                      -> image bytes
///
/// Errors are {"error": code, "message": text} with 400/404/409/425; early
/// submissions also carry retry_after_ms and a Retry-After header.
class HttpServer {
 public:
  HttpServer(RatingService& service, std::uint64_t default_seed = 0);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds (port 0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void listen();
  /// Serves on a background thread.
  void start();
  void stop();

 private:
  RatingService& service_;
  std::uint64_t default_seed_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace ieqa::rating
