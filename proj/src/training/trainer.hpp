#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dataset/dataset.hpp"
#include "metrics/correlation.hpp"
#include "model/ieqa_model.hpp"
#include "training/losses.hpp"

namespace ieqa::training {

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 8;
  int stage1_epochs = 40;  // heads only, backbone frozen
  int stage2_epochs = 20;  // everything trainable
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;

  int total_epochs() const { return stage1_epochs + stage2_epochs; }
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const LossConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
LossConfig loss_config_from_json(const nlohmann::json& j);

/// One training/evaluation sample: prepared model inputs plus its target.
struct Sample {
  std::string case_id;
  model::CaseInputs inputs;
  double target = 0.0;
};

/// Decodes images and tokenizes prompts for every case that has a target.
/// Throws ValidationError when a case has no target.
std::vector<Sample> prepare_samples(const model::ModelConfig& cfg, const dataset::CaseSet& cs,
                                    const std::vector<std::pair<std::string, double>>& targets);

struct FoldSplit {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::string>> folds;

  bool operator==(const FoldSplit&) const = default;
};

/// Seeded shuffle of the ids (sorted first), then contiguous chunks whose
/// sizes differ by at most one; the first n % k folds are the larger ones.
FoldSplit make_folds(std::vector<std::string> case_ids, int k, std::uint64_t seed);
FoldSplit make_folds(const dataset::CaseSet& cs, int k, std::uint64_t seed);

/// Adam moments for one training stage.
class Adam {
 public:
  Adam(const model::IEQAModel& m, double beta1, double beta2, double eps);
  /// Updates the parameters whose `trainable` flag is set.
  void step(model::IEQAModel& m, const nn::Gradients& grads, double lr, const std::vector<bool>& trainable);

 private:
  double beta1_, beta2_, eps_;
  std::vector<nn::Matrix> m_, v_;
  std::vector<long> t_;
};

/// Cosine decay from lr at step 0 towards 0 at step `total`.
double cosine_lr(double lr, std::size_t step, std::size_t total);

struct EpochLog {
  int stage = 1;
  int epoch = 0;
  double loss = 0.0;  // mean batch loss
  double lr = 0.0;    // learning rate of the last step
};

struct TrainHistory {
  std::vector<EpochLog> epochs;
  std::uint64_t backbone_checksum_start = 0;
  std::uint64_t backbone_checksum_after_stage1 = 0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Batch index lists for one epoch: shuffled, chunked by batch_size, with a
/// trailing single-sample batch merged into the previous one.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size, std::uint64_t seed);

/// Two-stage schedule: stage 1 updates only non-backbone parameters, stage 2
/// updates everything. Each stage has its own optimizer state and cosine
/// schedule. Non-finite losses raise TrainingError.
TrainHistory train(model::IEQAModel& m, const std::vector<Sample>& samples, const TrainConfig& tc,
                   const LossConfig& lc);

/// Mean total loss over a batch and gradients of every parameter.
double batch_loss_and_gradients(const model::IEQAModel& m, const std::vector<const Sample*>& batch,
                                const LossConfig& lc, nn::Gradients& grads);

struct PredictionRow {
  std::string case_id;
  double pred = 0.0;
  double target = 0.0;
};

struct EvalResult {
  metrics::CorrelationSummary metrics;
  double rmse_rescaled = 0.0;
  bool degenerate = false;
  std::string error;
  std::vector<PredictionRow> predictions;
};

/// Affine map used to report RMSE on a [0, 10] scale: (lo, hi) of the target.
struct TargetScale {
  double lo = 0.0;
  double hi = 1.0;
  double to_ten(double v) const { return (v - lo) / (hi - lo) * 10.0; }
};

EvalResult evaluate(const model::IEQAModel& m, const std::vector<Sample>& samples,
                    std::optional<TargetScale> scale = std::nullopt);

struct FoldReport {
  int fold = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  EvalResult eval;
  bool failed = false;
  std::string error;
  TrainHistory history;
};

struct EvalReport {
  std::string variant = "default";
  std::string fingerprint;
  nlohmann::json config;
  FoldSplit split;
  std::vector<FoldReport> folds;
  metrics::CorrelationSummary mean;
  double mean_rmse_rescaled = 0.0;
  bool partial = false;
  std::size_t parameter_count = 0;
  std::optional<std::size_t> reference_parameter_count;  // param-matched control only
};

struct CrossValidationOptions {
  int k = 10;
  std::string variant = "default";
  /// When set, one checkpoint per fold is written here.
  std::optional<std::filesystem::path> checkpoint_dir;
};

/// k rounds of fresh-seeded training (seed + fold index) and evaluation on the
/// held-out fold. Mean metrics average the successful folds.
EvalReport run_cross_validation(const std::vector<Sample>& samples, const model::ModelConfig& mc,
                                const TrainConfig& tc, const LossConfig& lc, const CrossValidationOptions& opts);

enum class Variant { no_text, no_source, fusion_identity, fusion_attention, fusion_concat, param_matched_control };

std::string_view to_string(Variant v);
std::optional<Variant> parse_variant(std::string_view s);
const std::vector<Variant>& all_variants();

struct VariantConfig {
  model::ModelConfig config;
  std::optional<model::ControlResult> control;
};

/// Model configuration of an ablation variant derived from `base`.
VariantConfig configure_variant(Variant v, const model::ModelConfig& base);

/// Configures the variant and runs cross-validation under its label.
EvalReport run_ablation(Variant v, const std::vector<Sample>& samples, const model::ModelConfig& base,
                        const TrainConfig& tc, const LossConfig& lc, CrossValidationOptions opts);

std::string config_fingerprint(const nlohmann::json& config);

nlohmann::json report_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);

inline constexpr std::string_view kFoldTableHeader = "fold,srocc,plcc,krcc,rmse,rmse_rescaled,n_cases,status";
std::string format_fold_table(const EvalReport& r);
std::string format_predictions(const EvalReport& r);
std::string format_history(const TrainHistory& h);

}  // namespace ieqa::training
