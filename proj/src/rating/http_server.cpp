#include "rating/http_server.hpp"

#include <httplib.h>

#include "common/error.hpp"
#include "common/log.hpp"
#include "common/text.hpp"

namespace ieqa::rating {

using nlohmann::json;

namespace {

int status_for(RatingError::Code c) {
  switch (c) {
    case RatingError::Code::not_found: return 404;
    case RatingError::Code::invalid: return 400;
    case RatingError::Code::too_early: return 425;
    case RatingError::Code::conflict:
    case RatingError::Code::on_break:
    case RatingError::Code::done: return 409;
  }
  return 500;
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& msg) {
  send_json(res, status, json{{"error", code}, {"message", msg}});
}

template <class F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const RatingError& e) {
    json body{{"error", to_string(e.code)}, {"message", e.what()}};
    if (e.code == RatingError::Code::too_early) {
      body["retry_after_ms"] = e.retry_after_ms;
      res.set_header("Retry-After", std::to_string((e.retry_after_ms + 999) / 1000));
    }
    send_json(res, status_for(e.code), body);
  } catch (const json::exception& e) {
    send_error(res, 400, "invalid", std::string("malformed request body: ") + e.what());
  } catch (const ValidationError& e) {
    send_error(res, 400, "invalid", e.what());
  } catch (const std::exception& e) {
    log::error("rating server: ", e.what());
    send_error(res, 500, "internal", e.what());
  }
}

std::string content_type_for(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".bmp") return "image/bmp";
  if (ext == ".webp") return "image/webp";
  return "application/octet-stream";
}

}  // namespace

HttpServer::HttpServer(RatingService& service, std::uint64_t default_seed)
    : service_(service), default_seed_(default_seed), server_(std::make_unique<httplib::Server>()) {
  auto& srv = *server_;
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  srv.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = json::parse(req.body);
      const auto rater = body.at("rater_id").get<std::string>();
      const auto seed = body.value("seed", default_seed_);
      send_json(res, 201, to_json(service_.create_session(rater, seed)));
    });
  });

  srv.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, to_json(service_.session(req.matches[1]))); });
  });

  srv.Get(R"(/sessions/([^/]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto next = service_.next_sample(req.matches[1]);
      send_json(res, 200, to_json(next, service_.now_ms()));
    });
  });

  srv.Post(R"(/sessions/([^/]+)/ratings)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = json::parse(req.body);
      Submission sub;
      sub.case_id = body.at("case_id").get<std::string>();
      for (const auto& [dim, v] : body.at("scores").items()) {
        if (!v.is_number_integer()) throw RatingError(RatingError::Code::invalid, "score for '" + dim + "' is not an integer");
        sub.scores[dim] = v.get<int>();
      }
      if (body.contains("dwell_ms") && !body.at("dwell_ms").is_null())
        sub.client_dwell_ms = body.at("dwell_ms").get<std::int64_t>();
      send_json(res, 200, to_json(service_.submit_rating(req.matches[1], sub)));
    });
  });

  srv.Get("/export", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      res.status = 200;
      res.set_content(service_.export_csv(), "text/csv");
    });
  });

  srv.Get(R"(/images/([^/]+)/(source|edited))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto* c = service_.cases().find(req.matches[1].str());
      if (!c) throw RatingError(RatingError::Code::not_found, "no case '" + std::string(req.matches[1]) + "'");
      const auto path = service_.cases().resolve(req.matches[2] == "source" ? c->source_image : c->edited_image);
      std::string bytes;
      try {
        bytes = text::read_file(path.string());
      } catch (const std::exception&) {
        throw RatingError(RatingError::Code::not_found, "image unavailable");
      }
      res.status = 200;
      res.set_content(std::move(bytes), content_type_for(path));
    });
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = server_->bind_to_any_port(host);
    if (p < 0) throw IoError("cannot bind " + host);
    return p;
  }
  if (!server_->bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::start() {
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void HttpServer::stop() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace ieqa::rating
