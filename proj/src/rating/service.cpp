#include "rating/service.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <random>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/log.hpp"
#include "common/text.hpp"

namespace ieqa::rating {

using nlohmann::json;

std::int64_t SystemClock::now_ms() const {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::string_view to_string(SessionState s) {
  switch (s) {
    case SessionState::rating: return "rating";
    case SessionState::on_break: return "on_break";
    case SessionState::done: return "done";
  }
  return "";
}

std::string_view to_string(RatingError::Code c) {
  switch (c) {
    case RatingError::Code::not_found: return "not_found";
    case RatingError::Code::conflict: return "conflict";
    case RatingError::Code::too_early: return "too_early";
    case RatingError::Code::invalid: return "invalid";
    case RatingError::Code::on_break: return "on_break";
    case RatingError::Code::done: return "done";
  }
  return "";
}

std::vector<std::string> assign_order(std::vector<std::string> case_ids, std::uint64_t seed,
                                      const std::string& rater_id) {
  std::sort(case_ids.begin(), case_ids.end());
  std::mt19937_64 rng(mix_seed(seed, "order/" + rater_id));
  std::shuffle(case_ids.begin(), case_ids.end(), rng);
  return case_ids;
}

namespace {

std::string url_escape(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      char buf[4];
      std::snprintf(buf, sizeof buf, "%%%02X", c);
      out += buf;
    }
  }
  return out;
}

}  // namespace

RatingService::RatingService(dataset::CaseSet cases, const Clock& clock, ServiceConfig cfg,
                             std::optional<std::filesystem::path> journal)
    : cases_(std::move(cases)), clock_(clock), cfg_(std::move(cfg)), journal_path_(std::move(journal)) {
  if (cfg_.min_dwell_ms < 0 || cfg_.work_ms <= 0 || cfg_.break_ms < 0 || cfg_.score_min > cfg_.score_max ||
      cfg_.dimensions.empty())
    throw ValidationError("invalid rating service configuration");
  for (const auto& c : cases_.cases) case_ids_.push_back(c.case_id);
  std::sort(case_ids_.begin(), case_ids_.end());
  if (std::adjacent_find(case_ids_.begin(), case_ids_.end()) != case_ids_.end())
    throw ValidationError("duplicate case_id in rating dataset");
  if (journal_path_) {
    if (std::filesystem::exists(*journal_path_)) replay(*journal_path_);
    journal_.open(*journal_path_, std::ios::app | std::ios::binary);
    if (!journal_) throw IoError("cannot open journal " + journal_path_->string());
  }
}

void RatingService::append(const json& event) {
  if (!journal_path_) return;
  journal_ << event.dump() << '\n';
  journal_.flush();
  if (!journal_) throw IoError("journal write failed");
}

void RatingService::replay(const std::filesystem::path& path) {
  const auto text = text::read_file(path.string());
  std::size_t line_no = 0;
  for (auto line : text::lines(text)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      apply(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError("journal line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  log::info("replayed ", line_no, " journal events");
}

void RatingService::apply(const json& ev) {
  const auto type = ev.at("type").get<std::string>();
  if (type == "session") {
    RaterSession s;
    s.session_id = ev.at("session_id").get<std::string>();
    s.rater_id = ev.at("rater_id").get<std::string>();
    s.seed = ev.at("seed").get<std::uint64_t>();
    if (ev.at("n_cases").get<std::size_t>() != case_ids_.size())
      throw ValidationError("journal was written for a different dataset (case count differs)");
    s.order = assign_order(case_ids_, s.seed, s.rater_id);
    if (s.order.empty()) s.state = SessionState::done;
    if (s.state != SessionState::done) open_by_rater_[s.rater_id] = s.session_id;
    if (unsigned long n = 0; std::sscanf(s.session_id.c_str(), "s%lu", &n) == 1)
      next_id_ = std::max<std::size_t>(next_id_, n + 1);
    sessions_[s.session_id] = std::move(s);
    return;
  }
  auto& s = find(ev.at("session_id").get<std::string>());
  if (type == "serve") {
    if (s.cursor >= s.order.size() || ev.at("case_id").get<std::string>() != s.order[s.cursor])
      throw ValidationError("journal serve event does not match the session order");
    s.served_at = ev.at("at").get<std::int64_t>();
  } else if (type == "break") {
    s.state = SessionState::on_break;
    s.break_until = ev.at("until").get<std::int64_t>();
    ++s.breaks;
  } else if (type == "resume") {
    s.state = SessionState::rating;
    s.active_since_break_ms = 0;
  } else if (type == "rating") {
    RatingRecord r;
    r.rater_id = s.rater_id;
    r.case_id = ev.at("case_id").get<std::string>();
    r.scores = ev.at("scores").get<std::map<std::string, int>>();
    r.dwell_ms = ev.at("dwell_ms").get<std::int64_t>();
    if (ev.contains("client_dwell_ms")) r.client_dwell_ms = ev.at("client_dwell_ms").get<std::int64_t>();
    r.submitted_at = ev.at("at").get<std::int64_t>();
    s.active_ms += r.dwell_ms;
    s.active_since_break_ms += r.dwell_ms;
    s.served_at.reset();
    ++s.cursor;
    if (s.cursor == s.order.size()) {
      s.state = SessionState::done;
      open_by_rater_.erase(s.rater_id);
    }
    rated_.insert({r.rater_id, r.case_id});
    records_.push_back(std::move(r));
  } else {
    throw ParseError("unknown journal event '" + type + "'");
  }
}

RaterSession& RatingService::find(const std::string& id) {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw RatingError(RatingError::Code::not_found, "no session '" + id + "'");
  return it->second;
}

const RaterSession& RatingService::find(const std::string& id) const {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw RatingError(RatingError::Code::not_found, "no session '" + id + "'");
  return it->second;
}

RaterSession RatingService::create_session(const std::string& rater_id, std::uint64_t seed) {
  std::lock_guard lock(mu_);
  if (rater_id.empty()) throw RatingError(RatingError::Code::invalid, "rater_id is empty");
  if (rater_id.find_first_of(",\n\r\"") != std::string::npos)
    throw RatingError(RatingError::Code::invalid, "rater_id contains a reserved character");
  if (!cfg_.raters.empty() && !cfg_.raters.count(rater_id))
    throw RatingError(RatingError::Code::not_found, "rater '" + rater_id + "' is not registered");
  if (open_by_rater_.count(rater_id))
    throw RatingError(RatingError::Code::conflict, "rater '" + rater_id + "' already has an open session");
  char id[32];
  std::snprintf(id, sizeof id, "s%06zu", next_id_);
  const json ev{{"type", "session"}, {"session_id", id},           {"rater_id", rater_id},
                {"seed", seed},      {"n_cases", case_ids_.size()}, {"at", clock_.now_ms()}};
  append(ev);
  apply(ev);
  return sessions_.at(id);
}

NextResult RatingService::next_sample(const std::string& session_id) {
  std::lock_guard lock(mu_);
  auto& s = find(session_id);
  const auto now = clock_.now_ms();
  NextResult out;
  if (s.state == SessionState::done) {
    out.kind = NextResult::Kind::done;
    return out;
  }
  if (s.state == SessionState::on_break) {
    if (now < s.break_until) {
      out.kind = NextResult::Kind::on_break;
      out.break_until = s.break_until;
      return out;
    }
    const json ev{{"type", "resume"}, {"session_id", s.session_id}, {"at", now}};
    append(ev);
    apply(ev);
  }
  if (!s.served_at && s.active_since_break_ms >= cfg_.work_ms) {
    const json ev{{"type", "break"}, {"session_id", s.session_id}, {"at", now}, {"until", now + cfg_.break_ms}};
    append(ev);
    apply(ev);
    out.kind = NextResult::Kind::on_break;
    out.break_until = s.break_until;
    return out;
  }
  if (!s.served_at) {
    const json ev{{"type", "serve"}, {"session_id", s.session_id}, {"case_id", s.order[s.cursor]}, {"at", now}};
    append(ev);
    apply(ev);
  }
  const auto& case_id = s.order[s.cursor];
  const auto* c = cases_.find(case_id);
  CasePayload p;
  p.case_id = case_id;
  p.source_url = "/images/" + url_escape(case_id) + "/source";
  p.edited_url = "/images/" + url_escape(case_id) + "/edited";
  p.prompt = c ? c->prompt : std::string();
  p.served_at = *s.served_at;
  p.position = s.cursor;
  p.total = s.order.size();
  p.dimensions = cfg_.dimensions;
  p.score_min = cfg_.score_min;
  p.score_max = cfg_.score_max;
  out.kind = NextResult::Kind::sample;
  out.payload = std::move(p);
  return out;
}

void RatingService::validate_scores(const std::map<std::string, int>& scores) const {
  for (const auto& dim : cfg_.dimensions)
    if (!scores.count(dim)) throw RatingError(RatingError::Code::invalid, "missing score for '" + dim + "'");
  for (const auto& [dim, v] : scores) {
    if (std::find(cfg_.dimensions.begin(), cfg_.dimensions.end(), dim) == cfg_.dimensions.end())
      throw RatingError(RatingError::Code::invalid, "unknown dimension '" + dim + "'");
    if (v < cfg_.score_min || v > cfg_.score_max)
      throw RatingError(RatingError::Code::invalid, "score " + std::to_string(v) + " for '" + dim +
                                                        "' outside [" + std::to_string(cfg_.score_min) + ", " +
                                                        std::to_string(cfg_.score_max) + "]");
  }
}

RaterSession RatingService::submit_rating(const std::string& session_id, const Submission& sub) {
  std::lock_guard lock(mu_);
  auto& s = find(session_id);
  const auto now = clock_.now_ms();
  if (s.state == SessionState::done) throw RatingError(RatingError::Code::done, "session is complete");
  if (s.state == SessionState::on_break) throw RatingError(RatingError::Code::on_break, "session is on break");
  if (!s.served_at) throw RatingError(RatingError::Code::conflict, "no case has been served");
  const auto& current = s.order[s.cursor];
  if (sub.case_id != current)
    throw RatingError(RatingError::Code::conflict,
                      "case mismatch: served '" + current + "', got '" + sub.case_id + "'");
  if (rated_.count({s.rater_id, sub.case_id}))
    throw RatingError(RatingError::Code::conflict, "case '" + sub.case_id + "' already rated by '" + s.rater_id + "'");
  const auto elapsed = now - *s.served_at;
  if (elapsed < cfg_.min_dwell_ms)
    throw RatingError(RatingError::Code::too_early,
                      "submitted after " + std::to_string(elapsed) + " ms; minimum is " +
                          std::to_string(cfg_.min_dwell_ms) + " ms",
                      cfg_.min_dwell_ms - elapsed);
  validate_scores(sub.scores);
  json ev{{"type", "rating"}, {"session_id", s.session_id}, {"case_id", sub.case_id},
          {"scores", sub.scores}, {"dwell_ms", elapsed},      {"at", now}};
  if (sub.client_dwell_ms) ev["client_dwell_ms"] = *sub.client_dwell_ms;
  append(ev);
  apply(ev);
  return s;
}

RaterSession RatingService::session(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  return find(session_id);
}

std::vector<RatingRecord> RatingService::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::vector<subjective::ScoreRow> RatingService::export_scores() const {
  std::lock_guard lock(mu_);
  std::vector<const RatingRecord*> sorted;
  for (const auto& r : records_) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](const RatingRecord* a, const RatingRecord* b) {
    return std::tie(a->rater_id, a->case_id) < std::tie(b->rater_id, b->case_id);
  });
  std::vector<subjective::ScoreRow> rows;
  for (const auto* r : sorted)
    for (const auto& dim : cfg_.dimensions) rows.push_back({r->rater_id, r->case_id, dim, r->scores.at(dim), r->submitted_at});
  return rows;
}

std::string RatingService::export_csv() const { return subjective::format_score_rows(export_scores()); }

json to_json(const RaterSession& s) {
  json j{{"session_id", s.session_id},
         {"rater_id", s.rater_id},
         {"seed", s.seed},
         {"cursor", s.cursor},
         {"total", s.order.size()},
         {"active_ms", s.active_ms},
         {"active_since_break_ms", s.active_since_break_ms},
         {"state", to_string(s.state)},
         {"breaks", s.breaks}};
  if (s.state == SessionState::on_break) j["break_until"] = s.break_until;
  return j;
}

json to_json(const NextResult& n, std::int64_t now_ms) {
  switch (n.kind) {
    case NextResult::Kind::done: return json{{"kind", "done"}};
    case NextResult::Kind::on_break:
      return json{{"kind", "break"},
                  {"break_until", n.break_until},
                  {"remaining_ms", std::max<std::int64_t>(0, n.break_until - now_ms)}};
    case NextResult::Kind::sample: break;
  }
  const auto& p = *n.payload;
  return json{{"kind", "sample"},
              {"case_id", p.case_id},
              {"source_url", p.source_url},
              {"edited_url", p.edited_url},
              {"prompt", p.prompt},
              {"served_at", p.served_at},
              {"position", p.position},
              {"total", p.total},
              {"options", {{"dimensions", p.dimensions}, {"min", p.score_min}, {"max", p.score_max}}}};
}

json to_json(const RatingRecord& r) {
  json j{{"rater_id", r.rater_id},
         {"case_id", r.case_id},
         {"scores", r.scores},
         {"dwell_ms", r.dwell_ms},
         {"submitted_at", r.submitted_at}};
  if (r.client_dwell_ms) j["client_dwell_ms"] = *r.client_dwell_ms;
  return j;
}

}  // namespace ieqa::rating
