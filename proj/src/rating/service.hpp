#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dataset/dataset.hpp"
#include "subjective/subjective.hpp"

namespace ieqa::rating {

/// Milliseconds on some monotone-enough timeline. All timing rules go through
/// this so tests can drive time by hand.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_ms() const = 0;
};

/// Wall clock in ms since the Unix epoch.
class SystemClock : public Clock {
 public:
  std::int64_t now_ms() const override;
};

class ManualClock : public Clock {
 public:
  explicit ManualClock(std::int64_t start = 0) : now_(start) {}
  std::int64_t now_ms() const override { return now_; }
  void advance(std::int64_t ms) { now_ += ms; }
  void set(std::int64_t ms) { now_ = ms; }

 private:
  std::int64_t now_;
};

struct ServiceConfig {
  std::int64_t min_dwell_ms = 5000;
  std::int64_t work_ms = 15 * 60 * 1000;
  std::int64_t break_ms = 5 * 60 * 1000;
  int score_min = 1;
  int score_max = 10;
  std::vector<std::string> dimensions = subjective::default_dimensions();
  /// Registered raters. Empty means any non-empty rater id may open a session.
  std::set<std::string> raters;
};

enum class SessionState { rating, on_break, done };
std::string_view to_string(SessionState s);

struct RaterSession {
  std::string session_id;
  std::string rater_id;
  std::uint64_t seed = 0;
  std::vector<std::string> order;  // case ids in presentation order
  std::size_t cursor = 0;
  std::int64_t active_ms = 0;              // total rating time
  std::int64_t active_since_break_ms = 0;  // rating time since the last completed break
  SessionState state = SessionState::rating;
  std::int64_t break_until = 0;
  std::optional<std::int64_t> served_at;  // serve time of order[cursor]
  int breaks = 0;
};

struct RatingRecord {
  std::string rater_id;
  std::string case_id;
  std::map<std::string, int> scores;
  std::int64_t dwell_ms = 0;  // server-measured serve-to-submit time
  std::optional<std::int64_t> client_dwell_ms;
  std::int64_t submitted_at = 0;
};

struct CasePayload {
  std::string case_id;
  std::string source_url;
  std::string edited_url;
  std::string prompt;
  std::int64_t served_at = 0;
  std::size_t position = 0;  // 0-based index in the session order
  std::size_t total = 0;
  std::vector<std::string> dimensions;  // rating options
  int score_min = 1;
  int score_max = 10;
};

struct NextResult {
  enum class Kind { sample, on_break, done } kind = Kind::done;
  std::optional<CasePayload> payload;
  std::int64_t break_until = 0;
};

struct Submission {
  std::string case_id;
  std::map<std::string, int> scores;
  std::optional<std::int64_t> client_dwell_ms;
};

/// Protocol violations. `code` doubles as the HTTP-facing error kind.
class RatingError : public std::runtime_error {
 public:
  enum class Code { not_found, conflict, too_early, invalid, on_break, done };
  RatingError(Code code, const std::string& msg, std::int64_t retry_after_ms = 0)
      : std::runtime_error(msg), code(code), retry_after_ms(retry_after_ms) {}
  Code code;
  std::int64_t retry_after_ms;
};
std::string_view to_string(RatingError::Code c);

/// Seeded per-rater permutation of the (sorted) case ids.
std::vector<std::string> assign_order(std::vector<std::string> case_ids, std::uint64_t seed,
                                      const std::string& rater_id);

/// Session bookkeeping for one study. Every state change is appended to the
/// journal before it becomes visible; constructing over an existing journal
/// replays it. One mutex serializes all operations.
class RatingService {
 public:
  RatingService(dataset::CaseSet cases, const Clock& clock, ServiceConfig cfg = {},
                std::optional<std::filesystem::path> journal = std::nullopt);

  RaterSession create_session(const std::string& rater_id, std::uint64_t seed);
  NextResult next_sample(const std::string& session_id);
  /// Returns the updated session.
  RaterSession submit_rating(const std::string& session_id, const Submission& sub);

  RaterSession session(const std::string& session_id) const;
  std::vector<RatingRecord> records() const;
  /// Rows sorted by (rater_id, case_id, dimension order).
  std::vector<subjective::ScoreRow> export_scores() const;
  std::string export_csv() const;

  const dataset::CaseSet& cases() const { return cases_; }
  const ServiceConfig& config() const { return cfg_; }
  std::int64_t now_ms() const { return clock_.now_ms(); }

 private:
  void append(const nlohmann::json& event);
  void replay(const std::filesystem::path& path);
  void apply(const nlohmann::json& event);
  RaterSession& find(const std::string& session_id);
  const RaterSession& find(const std::string& session_id) const;
  void validate_scores(const std::map<std::string, int>& scores) const;

  dataset::CaseSet cases_;
  const Clock& clock_;
  ServiceConfig cfg_;
  std::vector<std::string> case_ids_;
  std::map<std::string, RaterSession> sessions_;
  std::map<std::string, std::string> open_by_rater_;
  std::vector<RatingRecord> records_;
  std::set<std::pair<std::string, std::string>> rated_;
  std::size_t next_id_ = 1;
  std::optional<std::filesystem::path> journal_path_;
  std::ofstream journal_;
  mutable std::mutex mu_;
};

nlohmann::json to_json(const RaterSession& s);
nlohmann::json to_json(const NextResult& n, std::int64_t now_ms);
nlohmann::json to_json(const RatingRecord& r);

}  // namespace ieqa::rating
