#include "subjective/subjective.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "common/error.hpp"
#include "common/log.hpp"
#include "common/text.hpp"

namespace ieqa::subjective {

const std::vector<std::string>& default_dimensions() {
  static const std::vector<std::string> dims{"text_image_consistency", "source_target_fidelity", "overall_quality"};
  return dims;
}

namespace {

template <typename T>
std::optional<std::size_t> find_index(const std::vector<T>& v, std::string_view id) {
  auto it = std::find(v.begin(), v.end(), id);
  if (it == v.end()) return std::nullopt;
  return static_cast<std::size_t>(it - v.begin());
}

void require_unique(const std::vector<std::string>& ids, const char* what) {
  std::set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw ValidationError(std::string("duplicate ") + what + " id '" + id + "'");
  }
}

}  // namespace

ScoreMatrix::ScoreMatrix(std::vector<std::string> raters, std::vector<std::string> cases, std::vector<std::string> dims)
    : raters_(std::move(raters)), cases_(std::move(cases)), dims_(std::move(dims)) {
  require_unique(raters_, "rater");
  require_unique(cases_, "case");
  require_unique(dims_, "dimension");
  const auto n = raters_.size() * cases_.size() * dims_.size();
  scores_.assign(n, 0);
  mask_.assign(n, 0);
  timestamps_.assign(n, 0);
}

void ScoreMatrix::set(std::size_t rater, std::size_t c, std::size_t dim, int score, std::int64_t timestamp) {
  if (score < kMinScore || score > kMaxScore)
    throw ValidationError("score " + std::to_string(score) + " outside [1,10] for rater '" + raters_.at(rater) +
                          "', case '" + cases_.at(c) + "'");
  const auto i = index(rater, c, dim);
  scores_.at(i) = score;
  mask_[i] = 1;
  timestamps_[i] = timestamp;
}

void ScoreMatrix::clear(std::size_t rater, std::size_t c, std::size_t dim) {
  const auto i = index(rater, c, dim);
  scores_.at(i) = 0;
  mask_[i] = 0;
  timestamps_[i] = 0;
}

std::optional<std::size_t> ScoreMatrix::rater_index(std::string_view id) const { return find_index(raters_, id); }
std::optional<std::size_t> ScoreMatrix::case_index(std::string_view id) const { return find_index(cases_, id); }
std::optional<std::size_t> ScoreMatrix::dim_index(std::string_view id) const { return find_index(dims_, id); }

std::size_t ScoreMatrix::present_count() const {
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

std::vector<ScoreRow> parse_score_rows(std::string_view csv) {
  auto ls = text::lines(csv);
  if (ls.empty() || ls.front() != kScoreHeader)
    throw ParseError("ratings table must start with header '" + std::string(kScoreHeader) + "'");
  std::vector<ScoreRow> rows;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    if (ls[i].empty()) continue;
    auto f = text::split(ls[i], ',');
    const auto where = "ratings line " + std::to_string(i + 1);
    if (f.size() != 5) throw ParseError(where + ": expected 5 fields");
    ScoreRow r;
    r.rater_id = f[0];
    r.case_id = f[1];
    r.dim = f[2];
    if (r.rater_id.empty() || r.case_id.empty() || r.dim.empty()) throw ParseError(where + ": empty identifier");
    auto score = text::parse_int<int>(f[3]);
    if (!score) throw ParseError(where + ": score is not an integer");
    r.score = *score;
    auto ts = f[4].empty() ? std::optional<std::int64_t>(0) : text::parse_int<std::int64_t>(f[4]);
    if (!ts) throw ParseError(where + ": timestamp is not an integer");
    r.timestamp = *ts;
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string format_score_rows(const std::vector<ScoreRow>& rows) {
  std::string out(kScoreHeader);
  out += '\n';
  for (const auto& r : rows) {
    text::require_csv_safe(r.rater_id);
    text::require_csv_safe(r.case_id);
    text::require_csv_safe(r.dim);
    out += r.rater_id + ',' + r.case_id + ',' + r.dim + ',' + std::to_string(r.score) + ',' +
           std::to_string(r.timestamp) + '\n';
  }
  return out;
}

ScoreMatrix from_rows(const std::vector<ScoreRow>& rows) {
  std::set<std::string> raters, cases, dims;
  for (const auto& r : rows) {
    raters.insert(r.rater_id);
    cases.insert(r.case_id);
    dims.insert(r.dim);
  }
  std::vector<std::string> dim_order;
  const bool canonical = std::all_of(dims.begin(), dims.end(), [](const std::string& d) {
    const auto& def = default_dimensions();
    return std::find(def.begin(), def.end(), d) != def.end();
  });
  if (canonical) {
    for (const auto& d : default_dimensions())
      if (dims.count(d)) dim_order.push_back(d);
  } else {
    dim_order.assign(dims.begin(), dims.end());
  }

  ScoreMatrix sm({raters.begin(), raters.end()}, {cases.begin(), cases.end()}, std::move(dim_order));
  for (const auto& r : rows) {
    const auto ri = *sm.rater_index(r.rater_id);
    const auto ci = *sm.case_index(r.case_id);
    const auto di = *sm.dim_index(r.dim);
    if (sm.present(ri, ci, di))
      throw ValidationError("duplicate rating for rater '" + r.rater_id + "', case '" + r.case_id + "', dim '" +
                            r.dim + "'");
    sm.set(ri, ci, di, r.score, r.timestamp);
  }
  return sm;
}

std::vector<ScoreRow> to_rows(const ScoreMatrix& sm) {
  std::vector<ScoreRow> rows;
  for (std::size_t r = 0; r < sm.raters().size(); ++r)
    for (std::size_t c = 0; c < sm.cases().size(); ++c)
      for (std::size_t d = 0; d < sm.dims().size(); ++d)
        if (sm.present(r, c, d))
          rows.push_back({sm.raters()[r], sm.cases()[c], sm.dims()[d], sm.score(r, c, d), sm.timestamp(r, c, d)});
  return rows;
}

ScoreMatrix load_scores(const std::string& path) { return from_rows(parse_score_rows(text::read_file(path))); }

std::vector<std::string> ZScoreMatrix::degenerate_raters() const {
  std::vector<std::string> out;
  for (std::size_t r = 0; r < raters.size(); ++r) {
    for (std::size_t d = 0; d < dims.size(); ++d) {
      if (stat(r, d).degenerate) {
        out.push_back(raters[r]);
        break;
      }
    }
  }
  return out;
}

ZScoreMatrix zscore_normalize(const ScoreMatrix& sm) {
  ZScoreMatrix zm;
  zm.raters = sm.raters();
  zm.cases = sm.cases();
  zm.dims = sm.dims();
  const auto n_total = zm.raters.size() * zm.cases.size() * zm.dims.size();
  zm.values.assign(n_total, 0.0);
  zm.mask.assign(n_total, 0);
  zm.stats.resize(zm.raters.size() * zm.dims.size());

  for (std::size_t r = 0; r < zm.raters.size(); ++r) {
    for (std::size_t d = 0; d < zm.dims.size(); ++d) {
      RaterStats st;
      double sum = 0.0;
      for (std::size_t c = 0; c < zm.cases.size(); ++c) {
        if (!sm.present(r, c, d)) continue;
        sum += sm.score(r, c, d);
        ++st.n;
      }
      if (st.n < 2)
        throw ValidationError("rater '" + zm.raters[r] + "' has fewer than two scores in dimension '" + zm.dims[d] +
                              "'");
      st.mean = sum / static_cast<double>(st.n);
      double ss = 0.0;
      for (std::size_t c = 0; c < zm.cases.size(); ++c) {
        if (!sm.present(r, c, d)) continue;
        const double dev = sm.score(r, c, d) - st.mean;
        ss += dev * dev;
      }
      st.std = std::sqrt(ss / static_cast<double>(st.n - 1));
      st.degenerate = st.std == 0.0;
      if (st.degenerate)
        log::warn("rater '", zm.raters[r], "' gave constant scores in '", zm.dims[d], "'; z-scores set to 0");
      for (std::size_t c = 0; c < zm.cases.size(); ++c) {
        if (!sm.present(r, c, d)) continue;
        const auto i = zm.index(r, c, d);
        zm.mask[i] = 1;
        zm.values[i] = st.degenerate ? 0.0 : (sm.score(r, c, d) - st.mean) / st.std;
      }
      zm.stats[r * zm.dims.size() + d] = st;
    }
  }
  return zm;
}

ScreeningResult bt500_screen(const ZScoreMatrix& zm, const ScreeningOptions& opts) {
  if (zm.raters.size() < 2) throw ValidationError("observer screening needs at least two raters");

  std::vector<std::size_t> dims;
  if (opts.dims.empty()) {
    for (std::size_t d = 0; d < zm.dims.size(); ++d) dims.push_back(d);
  } else {
    for (const auto& name : opts.dims) {
      auto it = std::find(zm.dims.begin(), zm.dims.end(), name);
      if (it == zm.dims.end()) throw ValidationError("unknown dimension '" + name + "'");
      dims.push_back(static_cast<std::size_t>(it - zm.dims.begin()));
    }
  }

  const auto n_raters = zm.raters.size();
  std::vector<std::size_t> P(n_raters, 0), Q(n_raters, 0), N(n_raters, 0);

  for (std::size_t c = 0; c < zm.cases.size(); ++c) {
    for (auto d : dims) {
      std::size_t n = 0;
      double sum = 0.0;
      for (std::size_t r = 0; r < n_raters; ++r) {
        if (!zm.present(r, c, d)) continue;
        sum += zm.value(r, c, d);
        ++n;
      }
      if (n < 2) continue;
      const double mean = sum / static_cast<double>(n);
      double m2 = 0.0, m4 = 0.0;
      for (std::size_t r = 0; r < n_raters; ++r) {
        if (!zm.present(r, c, d)) continue;
        const double dev = zm.value(r, c, d) - mean;
        m2 += dev * dev;
        m4 += dev * dev * dev * dev;
      }
      const double sample_std = std::sqrt(m2 / static_cast<double>(n - 1));
      m2 /= static_cast<double>(n);
      m4 /= static_cast<double>(n);
      // no spread: nobody can be outside the interval
      const bool spread = sample_std > 1e-12 * std::max(1.0, std::abs(mean));
      const double kurtosis = spread ? m4 / (m2 * m2) : 0.0;
      const double k = (kurtosis >= 2.0 && kurtosis <= 4.0) ? 2.0 : std::sqrt(20.0);
      const double upper = mean + k * sample_std;
      const double lower = mean - k * sample_std;
      for (std::size_t r = 0; r < n_raters; ++r) {
        if (!zm.present(r, c, d)) continue;
        ++N[r];
        if (!spread) continue;
        const double u = zm.value(r, c, d);
        if (u >= upper) ++P[r];
        if (u <= lower) ++Q[r];
      }
    }
  }

  ScreeningResult res;
  for (std::size_t r = 0; r < n_raters; ++r) {
    ScreeningEntry e;
    e.rater_id = zm.raters[r];
    e.p = P[r];
    e.q = Q[r];
    e.n = N[r];
    const double pq = static_cast<double>(P[r] + Q[r]);
    if (N[r] > 0 && pq > 0) {
      const double outside = pq / static_cast<double>(N[r]);
      const double asym = std::abs(static_cast<double>(P[r]) - static_cast<double>(Q[r])) / pq;
      if (outside > opts.reject_ratio && asym < opts.symmetry_ratio) {
        e.rejected = true;
        e.reason = "(P+Q)/N = " + text::format_double(outside) + " > " + text::format_double(opts.reject_ratio) +
                   " and |P-Q|/(P+Q) = " + text::format_double(asym) + " < " +
                   text::format_double(opts.symmetry_ratio);
      }
    }
    (e.rejected ? res.rejected : res.kept).push_back(e.rater_id);
    res.report.push_back(std::move(e));
  }
  return res;
}

MosTable::MosTable(std::vector<std::string> cases, std::vector<std::string> dims)
    : cases_(std::move(cases)), dims_(std::move(dims)) {
  values_.assign(cases_.size() * dims_.size(), std::nullopt);
  used_.assign(cases_.size() * dims_.size(), 0);
}

std::optional<std::size_t> MosTable::case_index(std::string_view id) const {
  auto it = std::lower_bound(cases_.begin(), cases_.end(), id);
  if (it != cases_.end() && *it == id) return static_cast<std::size_t>(it - cases_.begin());
  return find_index(cases_, id);
}

std::optional<std::size_t> MosTable::dim_index(std::string_view id) const { return find_index(dims_, id); }

std::optional<double> MosTable::mos(std::string_view case_id, std::string_view dim) const {
  auto c = case_index(case_id);
  auto d = dim_index(dim);
  if (!c || !d) return std::nullopt;
  return at(*c, *d);
}

std::size_t MosTable::n_raters_used(std::string_view case_id) const {
  auto c = case_index(case_id);
  if (!c) return 0;
  std::size_t n = 0;
  for (std::size_t d = 0; d < dims_.size(); ++d) n = std::max(n, used_at(*c, d));
  return n;
}

void MosTable::set(std::size_t c, std::size_t d, std::optional<double> value, std::size_t n_used) {
  values_.at(c * dims_.size() + d) = value;
  used_.at(c * dims_.size() + d) = n_used;
}

std::vector<MosEntry> MosTable::entries() const {
  std::vector<MosEntry> out;
  for (std::size_t c = 0; c < cases_.size(); ++c)
    for (std::size_t d = 0; d < dims_.size(); ++d) out.push_back({cases_[c], dims_[d], at(c, d), used_at(c, d)});
  return out;
}

MosTable aggregate_mos(const ZScoreMatrix& zm, const std::vector<std::string>& kept) {
  if (kept.empty()) throw ValidationError("no raters kept; MOS is undefined");
  std::vector<std::size_t> rows;
  for (const auto& id : kept) {
    auto it = std::find(zm.raters.begin(), zm.raters.end(), id);
    if (it == zm.raters.end()) throw ValidationError("kept rater '" + id + "' is not in the matrix");
    rows.push_back(static_cast<std::size_t>(it - zm.raters.begin()));
  }
  // matrix order, so the result does not depend on the order of `kept`
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());

  MosTable mt(zm.cases, zm.dims);
  for (std::size_t c = 0; c < zm.cases.size(); ++c) {
    bool undefined = false;
    for (std::size_t d = 0; d < zm.dims.size(); ++d) {
      double sum = 0.0;
      std::size_t n = 0;
      for (auto r : rows) {
        if (!zm.present(r, c, d)) continue;
        sum += zm.value(r, c, d);
        ++n;
      }
      if (n == 0) {
        undefined = true;
        mt.set(c, d, std::nullopt, 0);
      } else {
        mt.set(c, d, sum / static_cast<double>(n), n);
      }
    }
    if (undefined) mt.undefined_cases.push_back(zm.cases[c]);
  }
  return mt;
}

MosTable rescale_mos(const MosTable& mt, double lo, double hi) {
  if (!(hi > lo)) throw ValidationError("rescale needs hi > lo");
  MosTable out = mt;
  for (std::size_t d = 0; d < mt.dims().size(); ++d) {
    double mn = std::numeric_limits<double>::infinity();
    double mx = -mn;
    for (std::size_t c = 0; c < mt.cases().size(); ++c) {
      if (auto v = mt.at(c, d)) {
        mn = std::min(mn, *v);
        mx = std::max(mx, *v);
      }
    }
    if (!(mx > mn)) throw DegenerateError("MOS column '" + mt.dims()[d] + "' is constant; cannot rescale");
    for (std::size_t c = 0; c < mt.cases().size(); ++c) {
      if (auto v = mt.at(c, d)) {
        double mapped = lo + (*v - mn) / (mx - mn) * (hi - lo);
        if (*v == mx) mapped = hi;
        out.set(c, d, mapped, mt.used_at(c, d));
      }
    }
  }
  return out;
}

std::string format_mos(const MosTable& mt) {
  std::string out(kMosHeader);
  out += '\n';
  for (const auto& e : mt.entries()) {
    text::require_csv_safe(e.case_id);
    text::require_csv_safe(e.dim);
    out += e.case_id + ',' + e.dim + ',' + (e.mos ? text::format_double(*e.mos) : std::string()) + ',' +
           std::to_string(e.n_raters_used) + '\n';
  }
  return out;
}

MosTable parse_mos(std::string_view csv) {
  auto ls = text::lines(csv);
  if (ls.empty() || ls.front() != kMosHeader)
    throw ParseError("MOS table must start with header '" + std::string(kMosHeader) + "'");
  std::set<std::string> cases;
  std::vector<std::string> dims;
  struct Raw {
    std::string c, d;
    std::optional<double> v;
    std::size_t n;
  };
  std::vector<Raw> raw;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    if (ls[i].empty()) continue;
    auto f = text::split(ls[i], ',');
    const auto where = "MOS line " + std::to_string(i + 1);
    if (f.size() != 4) throw ParseError(where + ": expected 4 fields");
    Raw r{std::string(f[0]), std::string(f[1]), std::nullopt, 0};
    if (!f[2].empty()) {
      r.v = text::parse_double(f[2]);
      if (!r.v || !std::isfinite(*r.v)) throw ParseError(where + ": mos is not a finite number");
    }
    auto n = text::parse_int<std::size_t>(f[3]);
    if (!n) throw ParseError(where + ": n_raters_used is not an integer");
    r.n = *n;
    cases.insert(r.c);
    if (std::find(dims.begin(), dims.end(), r.d) == dims.end()) dims.push_back(r.d);
    raw.push_back(std::move(r));
  }
  MosTable mt({cases.begin(), cases.end()}, dims);
  std::vector<std::uint8_t> seen(cases.size() * dims.size(), 0);
  for (const auto& r : raw) {
    const auto c = *mt.case_index(r.c);
    const auto d = *mt.dim_index(r.d);
    if (seen[c * dims.size() + d]++) throw ParseError("duplicate MOS row for " + r.c + "/" + r.d);
    mt.set(c, d, r.v, r.n);
  }
  return mt;
}

MosTable load_mos(const std::string& path) { return parse_mos(text::read_file(path)); }

PipelineResult run_pipeline(const ScoreMatrix& sm, const ScreeningOptions& opts) {
  if (sm.raters().empty()) throw ValidationError("ratings contain no raters");
  PipelineResult res;
  res.zscores = zscore_normalize(sm);
  if (sm.raters().size() < 2) {
    res.warnings.push_back("only one rater: observer screening skipped");
    log::warn(res.warnings.back());
    res.screening.kept = sm.raters();
    res.screening.report.push_back({sm.raters().front(), 0, 0, 0, false, "screening skipped"});
  } else {
    res.screening = bt500_screen(res.zscores, opts);
  }
  for (const auto& id : res.zscores.degenerate_raters())
    res.warnings.push_back("rater '" + id + "' has zero-variance scores in at least one dimension");
  res.mos = aggregate_mos(res.zscores, res.screening.kept);
  res.mos.screening = res.screening.report;
  res.mos.rejected_raters = res.screening.rejected;
  if (!res.mos.undefined_cases.empty())
    res.warnings.push_back(std::to_string(res.mos.undefined_cases.size()) + " cases have no kept rater");
  return res;
}

}  // namespace ieqa::subjective
