#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "app/synthetic.hpp"
#include "metrics/scorers.hpp"

namespace ieqa::app {

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2 };

struct CommandResult {
  int exit_code = kOk;
  std::vector<std::string> artifacts_written;  // relative to the run directory
  std::string summary;
};

/// Validates the manifest and writes a resized case store (shorter side
/// `target`) under out/: images/ plus manifest.jsonl.
CommandResult cmd_ingest(const std::filesystem::path& manifest, const std::filesystem::path& out, int target = 512);

struct MosOptions {
  std::filesystem::path ratings;
  std::filesystem::path out;
  /// Dimensions kept from the ratings file; empty keeps all.
  std::vector<std::string> dims;
};

/// z-score, screen, aggregate. Writes mos.csv and screening.json.
CommandResult cmd_mos(const MosOptions& opts);

struct BaselineOptions {
  std::filesystem::path manifest;
  std::filesystem::path mos;
  std::filesystem::path out;
  std::vector<std::string> scorers;  // empty runs every registered scorer
  std::string dimension = "overall_quality";
};

/// `registry` defaults to the built-ins. Writes baselines.csv and scores.csv.
CommandResult cmd_baselines(const BaselineOptions& opts, const metrics::ScorerRegistry* registry = nullptr);

struct TrainOptions {
  std::filesystem::path manifest;
  std::filesystem::path mos;
  std::optional<std::filesystem::path> config;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;  // overrides train.seed
  std::optional<int> k;               // overrides k
  std::vector<std::string> variants;  // cmd_ablate only; "all" expands
};

/// k-fold cross-validation of the configured model. Writes report.json,
/// folds.csv, predictions.csv, history/ and checkpoints/.
CommandResult cmd_train(const TrainOptions& opts);
/// The same per ablation variant, each under out/<variant>/, plus ablation.csv.
CommandResult cmd_ablate(const TrainOptions& opts);

/// Comparison table over stored report.json files; the first report is the
/// reference for the delta columns.
CommandResult cmd_report(const std::vector<std::filesystem::path>& reports, const std::filesystem::path& out);

CommandResult cmd_synth(const std::filesystem::path& out, const SyntheticOptions& opts);

inline constexpr std::string_view kComparisonHeader =
    "variant,srocc,plcc,krcc,rmse,rmse_rescaled,d_srocc,d_plcc,d_krcc,d_rmse,parameter_count,partial,fingerprint";

}  // namespace ieqa::app
