#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "common/image.hpp"
#include "dataset/dataset.hpp"
#include "metrics/scorers.hpp"
#include "subjective/subjective.hpp"

namespace ieqa::metrics {

struct CaseScore {
  std::string scorer;
  std::string case_id;
  double score = 0.0;
};

struct ScorerFailure {
  std::string scorer;
  std::string case_id;
  std::string message;
};

/// One row of the baseline comparison. RMSE is reported against the z-scored
/// MOS and against the MOS rescaled to [0, 10].
struct BaselineRow {
  std::string scorer;
  double srocc = 0.0;
  double plcc = 0.0;
  double krcc = 0.0;
  double rmse = 0.0;
  double rmse_rescaled = 0.0;
  std::size_t n_cases = 0;
  bool degenerate = false;
  std::string error;
};

struct BaselineReport {
  std::string dimension;
  std::vector<BaselineRow> rows;
  std::vector<CaseScore> scores;  // scorer-major, cases ascending
  std::vector<ScorerFailure> failures;
};

using ImageLoader = std::function<Image(const std::filesystem::path&)>;

ImageLoader default_loader();

struct BaselineOptions {
  std::string dimension = "overall_quality";
  double rescale_lo = 0.0;
  double rescale_hi = 10.0;
};

/// Scores every case with every registered scorer and correlates against MOS.
/// A scorer that throws (or returns a non-finite value) on a case has that case
/// excluded and the failure logged; a scorer whose scores are constant is
/// marked degenerate. Every case must have a defined MOS.
BaselineReport run_baselines(const dataset::CaseSet& cs, const subjective::MosTable& mt,
                             const ScorerRegistry& registry, const BaselineOptions& opts = {},
                             const ImageLoader& loader = default_loader());

inline constexpr std::string_view kReportHeader = "scorer,srocc,plcc,krcc,rmse,rmse_rescaled,n_cases,status";
inline constexpr std::string_view kScoreDumpHeader = "scorer,case_id,score";

std::string format_report(const BaselineReport& r);
std::string format_score_dump(const BaselineReport& r);

}  // namespace ieqa::metrics
