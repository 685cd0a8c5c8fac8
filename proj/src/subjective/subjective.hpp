#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ieqa::subjective {

inline constexpr int kMinScore = 1;
inline constexpr int kMaxScore = 10;

/// The three rated aspects, in canonical order.
const std::vector<std::string>& default_dimensions();

/// Raw rater x case x dimension integer scores with a presence mask.
class ScoreMatrix {
 public:
  ScoreMatrix() = default;
  ScoreMatrix(std::vector<std::string> raters, std::vector<std::string> cases, std::vector<std::string> dims);

  const std::vector<std::string>& raters() const { return raters_; }
  const std::vector<std::string>& cases() const { return cases_; }
  const std::vector<std::string>& dims() const { return dims_; }

  std::size_t index(std::size_t rater, std::size_t c, std::size_t dim) const {
    return (rater * cases_.size() + c) * dims_.size() + dim;
  }

  /// Throws ValidationError when score is outside [1,10].
  void set(std::size_t rater, std::size_t c, std::size_t dim, int score, std::int64_t timestamp = 0);
  void clear(std::size_t rater, std::size_t c, std::size_t dim);

  bool present(std::size_t rater, std::size_t c, std::size_t dim) const { return mask_[index(rater, c, dim)] != 0; }
  int score(std::size_t rater, std::size_t c, std::size_t dim) const { return scores_[index(rater, c, dim)]; }
  std::int64_t timestamp(std::size_t rater, std::size_t c, std::size_t dim) const {
    return timestamps_[index(rater, c, dim)];
  }

  std::optional<std::size_t> rater_index(std::string_view id) const;
  std::optional<std::size_t> case_index(std::string_view id) const;
  std::optional<std::size_t> dim_index(std::string_view id) const;

  std::size_t present_count() const;

  bool operator==(const ScoreMatrix&) const = default;

 private:
  std::vector<std::string> raters_;
  std::vector<std::string> cases_;
  std::vector<std::string> dims_;
  std::vector<int> scores_;
  std::vector<std::uint8_t> mask_;
  std::vector<std::int64_t> timestamps_;
};

/// One row of the ratings exchange table.
struct ScoreRow {
  std::string rater_id;
  std::string case_id;
  std::string dim;
  int score = 0;
  std::int64_t timestamp = 0;

  bool operator==(const ScoreRow&) const = default;
};

inline constexpr std::string_view kScoreHeader = "rater_id,case_id,dim,score,timestamp";

/// CSV with header `rater_id,case_id,dim,score,timestamp`.
std::vector<ScoreRow> parse_score_rows(std::string_view csv);
std::string format_score_rows(const std::vector<ScoreRow>& rows);

/// Raters and cases sorted lexicographically; dimensions in canonical order
/// when they are a subset of the defaults, otherwise sorted. Duplicate
/// (rater, case, dim) rows are a ValidationError.
ScoreMatrix from_rows(const std::vector<ScoreRow>& rows);
std::vector<ScoreRow> to_rows(const ScoreMatrix& sm);

ScoreMatrix load_scores(const std::string& path);

struct RaterStats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
  std::size_t n = 0;
  bool degenerate = false;  // zero spread: values zeroed
};

struct ZScoreMatrix {
  std::vector<std::string> raters;
  std::vector<std::string> cases;
  std::vector<std::string> dims;
  std::vector<double> values;       // same layout as ScoreMatrix
  std::vector<std::uint8_t> mask;
  std::vector<RaterStats> stats;    // raters x dims

  std::size_t index(std::size_t rater, std::size_t c, std::size_t dim) const {
    return (rater * cases.size() + c) * dims.size() + dim;
  }
  bool present(std::size_t r, std::size_t c, std::size_t d) const { return mask[index(r, c, d)] != 0; }
  double value(std::size_t r, std::size_t c, std::size_t d) const { return values[index(r, c, d)]; }
  const RaterStats& stat(std::size_t r, std::size_t d) const { return stats[r * dims.size() + d]; }

  std::vector<std::string> degenerate_raters() const;
};

/// Per-rater, per-dimension standardization with the sample (n-1) standard
/// deviation. A rater/dimension with zero spread gets all-zero values and is
/// flagged rather than divided by zero. Fewer than two present scores in a
/// rater/dimension is a ValidationError.
ZScoreMatrix zscore_normalize(const ScoreMatrix& sm);

struct ScreeningEntry {
  std::string rater_id;
  std::size_t p = 0;  // scores above the upper bound
  std::size_t q = 0;  // scores below the lower bound
  std::size_t n = 0;  // presentations scored by this rater
  bool rejected = false;
  std::string reason;

  bool operator==(const ScreeningEntry&) const = default;
};

struct ScreeningResult {
  std::vector<std::string> kept;
  std::vector<std::string> rejected;
  std::vector<ScreeningEntry> report;  // one entry per rater, in matrix order
};

struct ScreeningOptions {
  double reject_ratio = 0.05;    // (P+Q)/N must exceed this
  double symmetry_ratio = 0.3;   // and |P-Q|/(P+Q) must be below this
  /// Dimensions treated as presentations; empty means all.
  std::vector<std::string> dims;
};

/// ITU-R BT.500 observer rejection. Every (case, dimension) pair is one
/// presentation; its panel mean, sample standard deviation and kurtosis
/// pick 2 sigma (2 <= beta2 <= 4) or sqrt(20) sigma bounds.
ScreeningResult bt500_screen(const ZScoreMatrix& zm, const ScreeningOptions& opts = {});

struct MosEntry {
  std::string case_id;
  std::string dim;
  std::optional<double> mos;
  std::size_t n_raters_used = 0;

  bool operator==(const MosEntry&) const = default;
};

class MosTable {
 public:
  MosTable() = default;
  MosTable(std::vector<std::string> cases, std::vector<std::string> dims);

  const std::vector<std::string>& cases() const { return cases_; }
  const std::vector<std::string>& dims() const { return dims_; }

  std::optional<double> mos(std::string_view case_id, std::string_view dim) const;
  std::size_t n_raters_used(std::string_view case_id) const;

  void set(std::size_t c, std::size_t d, std::optional<double> value, std::size_t n_used);
  std::optional<double> at(std::size_t c, std::size_t d) const { return values_[c * dims_.size() + d]; }
  std::size_t used_at(std::size_t c, std::size_t d) const { return used_[c * dims_.size() + d]; }

  std::optional<std::size_t> case_index(std::string_view id) const;
  std::optional<std::size_t> dim_index(std::string_view id) const;

  std::vector<MosEntry> entries() const;

  // screening bookkeeping carried along with the table
  std::vector<ScreeningEntry> screening;
  std::vector<std::string> rejected_raters;
  std::vector<std::string> undefined_cases;

  bool operator==(const MosTable&) const = default;

 private:
  std::vector<std::string> cases_;
  std::vector<std::string> dims_;
  std::vector<std::optional<double>> values_;
  std::vector<std::size_t> used_;
};

/// Mean over kept raters' present z-scores per case and dimension.
MosTable aggregate_mos(const ZScoreMatrix& zm, const std::vector<std::string>& kept);

/// Affine per-dimension map so the column minimum lands on lo and the
/// maximum on hi. Constant columns are a DegenerateError.
MosTable rescale_mos(const MosTable& mt, double lo, double hi);

inline constexpr std::string_view kMosHeader = "case_id,dim,mos,n_raters_used";

/// CSV `case_id,dim,mos,n_raters_used`; undefined MOS is written as an empty field.
std::string format_mos(const MosTable& mt);
MosTable parse_mos(std::string_view csv);
MosTable load_mos(const std::string& path);

struct PipelineResult {
  ZScoreMatrix zscores;
  ScreeningResult screening;
  MosTable mos;
  std::vector<std::string> warnings;
};

/// z-score, then screen (skipped with a warning for a single rater), then
/// aggregate over the kept raters.
PipelineResult run_pipeline(const ScoreMatrix& sm, const ScreeningOptions& opts = {});

}  // namespace ieqa::subjective
