#include "metrics/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "common/error.hpp"
#include "common/log.hpp"
#include "common/text.hpp"
#include "metrics/correlation.hpp"

namespace ieqa::metrics {

ImageLoader default_loader() {
  return [](const std::filesystem::path& p) { return image_io::read(p); };
}

BaselineReport run_baselines(const dataset::CaseSet& cs, const subjective::MosTable& mt,
                             const ScorerRegistry& registry, const BaselineOptions& opts,
                             const ImageLoader& loader) {
  BaselineReport report;
  report.dimension = opts.dimension;
  if (!mt.dim_index(opts.dimension)) throw ValidationError("MOS table has no dimension '" + opts.dimension + "'");

  std::vector<const dataset::EditCase*> cases;
  for (const auto& c : cs.cases) cases.push_back(&c);
  std::sort(cases.begin(), cases.end(), [](auto* a, auto* b) { return a->case_id < b->case_id; });

  std::vector<std::string> missing;
  for (auto* c : cases)
    if (!mt.mos(c->case_id, opts.dimension)) missing.push_back(c->case_id);
  if (!missing.empty()) throw ValidationError("cases without MOS: " + std::to_string(missing.size()), missing);

  // RMSE on the [lo, hi] scale uses the selected column's own min/max
  const auto dim = *mt.dim_index(opts.dimension);
  double col_min = std::numeric_limits<double>::infinity(), col_max = -col_min;
  for (std::size_t c = 0; c < mt.cases().size(); ++c)
    if (auto v = mt.at(c, dim)) {
      col_min = std::min(col_min, *v);
      col_max = std::max(col_max, *v);
    }
  auto to_scale = [&](double v) {
    if (!(col_max > col_min)) return std::numeric_limits<double>::quiet_NaN();
    return opts.rescale_lo + (v - col_min) / (col_max - col_min) * (opts.rescale_hi - opts.rescale_lo);
  };

  const auto& handles = registry.handles();
  std::vector<std::vector<std::pair<const dataset::EditCase*, double>>> per_scorer(handles.size());

  for (auto* c : cases) {
    std::optional<Image> source, edited;
    std::string load_error;
    try {
      source = loader(cs.resolve(c->source_image));
      edited = loader(cs.resolve(c->edited_image));
    } catch (const std::exception& e) {
      load_error = e.what();
    }
    for (std::size_t s = 0; s < handles.size(); ++s) {
      const auto& h = handles[s];
      if (!load_error.empty()) {
        report.failures.push_back({h.name, c->case_id, load_error});
        continue;
      }
      try {
        if (!h.scorer) throw BackendUnavailable("scorer '" + h.name + "' has no backend");
        const double v = h.scorer->score({*c, *source, *edited});
        if (!std::isfinite(v)) throw DegenerateError("non-finite score");
        per_scorer[s].emplace_back(c, v);
      } catch (const std::exception& e) {
        log::warn("scorer '", h.name, "' failed on case '", c->case_id, "': ", e.what());
        report.failures.push_back({h.name, c->case_id, e.what()});
      }
    }
  }

  for (std::size_t s = 0; s < handles.size(); ++s) {
    BaselineRow row;
    row.scorer = handles[s].name;
    std::vector<double> pred, target, target10;
    for (const auto& [c, v] : per_scorer[s]) {
      report.scores.push_back({row.scorer, c->case_id, v});
      pred.push_back(v);
      target.push_back(*mt.mos(c->case_id, opts.dimension));
      target10.push_back(to_scale(target.back()));
    }
    row.n_cases = pred.size();
    try {
      const PairedSeries ps(pred, target);
      const auto sum = summarize(ps);
      row.srocc = sum.srocc;
      row.plcc = sum.plcc;
      row.krcc = sum.krcc;
      row.rmse = sum.rmse;
      row.rmse_rescaled = std::isfinite(target10.front()) ? rmse(PairedSeries(pred, target10))
                                                          : std::numeric_limits<double>::quiet_NaN();
    } catch (const std::exception& e) {
      row.degenerate = true;
      row.error = e.what();
      log::warn("scorer '", row.scorer, "' is degenerate: ", e.what());
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string format_report(const BaselineReport& r) {
  std::string out(kReportHeader);
  out += '\n';
  for (const auto& row : r.rows) {
    text::require_csv_safe(row.scorer);
    if (row.degenerate) {
      out += row.scorer + ",,,,,," + std::to_string(row.n_cases) + ",degenerate\n";
      continue;
    }
    out += row.scorer + ',' + text::format_double(row.srocc) + ',' + text::format_double(row.plcc) + ',' +
           text::format_double(row.krcc) + ',' + text::format_double(row.rmse) + ',' +
           (std::isfinite(row.rmse_rescaled) ? text::format_double(row.rmse_rescaled) : std::string()) + ',' + std::to_string(row.n_cases) + ",ok\n";
  }
  return out;
}

std::string format_score_dump(const BaselineReport& r) {
  std::string out(kScoreDumpHeader);
  out += '\n';
  for (const auto& s : r.scores) out += s.scorer + ',' + s.case_id + ',' + text::format_double(s.score) + '\n';
  return out;
}

}  // namespace ieqa::metrics
