#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "common/image.hpp"
#include "dataset/dataset.hpp"
#include "model/autograd.hpp"

namespace ieqa::model {

/// How the source and edited features are combined in the source-target branch.
enum class FusionMode { identity, attention, concatenation };

std::string_view to_string(FusionMode m);
std::optional<FusionMode> parse_fusion(std::string_view s);

struct ModelConfig {
  int grid = 4;                 // image tokens per side
  int embed_dim = 32;           // visual and text embedding width
  int vocab = 512;
  int max_tokens = 32;          // prompts are tail-truncated past this
  int align_dim = 32;           // projected alignment feature width
  int st_hidden = 128;          // hidden width of the source-target feed-forward
  int st_out = 128;             // width of the relevance vector o_s
  int attn_heads = 4;           // heads of the attention fusion variant
  int quality_hidden = 64;
  int quality_dim = 32;
  int head_hidden = 64;         // final regression head hidden width
  bool use_text_branch = true;
  bool use_source_branch = true;
  FusionMode fusion = FusionMode::concatenation;
  bool share_source_encoder = true;  // F and F* share weights
  /// > 0 replaces the (disabled) source branch with an edited-image-only
  /// feed-forward of this hidden width; used by the parameter-matched control.
  int control_hidden = 0;

  bool operator==(const ModelConfig&) const = default;

  /// Small preset used by tests and smoke runs (backbone under 2k parameters).
  static ModelConfig stub();

  void validate() const;
  /// Width of the source-target slot entering the final head (0 when absent).
  int source_slot_width() const;
  /// Input width of the final regression head.
  int fusion_width() const;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Model-ready view of one case: token descriptors for both images plus the
/// hashed prompt.
struct CaseInputs {
  nn::Matrix source_tokens;
  nn::Matrix edited_tokens;
  std::vector<int> prompt_ids;
};

CaseInputs prepare_inputs(const ModelConfig& cfg, const Image& source, const Image& edited, std::string_view prompt);

struct AlignmentFeatures {
  nn::Matrix e_bv;  // 1 x embed_dim
  nn::Matrix e_bt;  // 1 x embed_dim
};

struct SourceTargetFeatures {
  nn::Matrix f;       // source embedding
  nn::Matrix f_star;  // edited embedding
  nn::Matrix o_s;     // relevance vector
};

struct QualityFeatures {
  nn::Matrix q;
};

struct BranchDiagnostics {
  std::optional<double> alignment_cosine;      // cos(e_bv, e_bt)
  std::optional<double> source_target_cosine;  // cos(f, f*)
  double quality_norm = 0.0;                   // |q|
};

struct Prediction {
  std::string case_id;
  double score = 0.0;
  BranchDiagnostics branches;
};

/// Symbolic graph for one case on a tape. Unused branches stay invalid.
struct ForwardTrace {
  nn::Var e_bv, e_bt, align;
  nn::Var f, f_star, o_s;
  nn::Var q;
  nn::Var fused;
  nn::Var score;
};

/// Text-image alignment, source-target relation and visual quality branches
/// feeding a two-layer regression head.
class IEQAModel {
 public:
  IEQAModel(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }

  const std::vector<nn::Parameter>& parameters() const { return params_; }
  std::vector<nn::Parameter>& parameters() { return params_; }
  const nn::Parameter& param(std::string_view name) const;
  nn::Parameter& param(std::string_view name);
  bool has_param(std::string_view name) const;

  std::size_t parameter_count() const;
  std::size_t backbone_parameter_count() const;
  /// FNV-1a over the bytes of every backbone tensor.
  std::uint64_t backbone_checksum() const;

  nn::Gradients zero_gradients() const;

  ForwardTrace build(nn::Tape& tape, const CaseInputs& in) const;

  double predict(const CaseInputs& in) const;
  Prediction predict_case(const std::string& case_id, const CaseInputs& in) const;

  AlignmentFeatures encode_alignment(const Image& edited, std::string_view prompt) const;
  SourceTargetFeatures encode_source_target(const Image& source, const Image& edited) const;
  QualityFeatures encode_quality(const Image& edited) const;

  /// Decodes the case's images (resolved against `cs`) and scores it.
  Prediction forward(const dataset::CaseSet& cs, const dataset::EditCase& c) const;

 private:
  nn::Parameter& add_param(const std::string& name, int rows, int cols, double stddev, bool backbone);

  nn::Var visual_tokens(nn::Tape& t, std::string_view prefix, const nn::Matrix& patches) const;
  nn::Var cross_attention(nn::Tape& t, std::string_view prefix, nn::Var queries, nn::Var memory, int heads) const;
  nn::Var feed_forward(nn::Tape& t, std::string_view prefix, nn::Var x) const;

  ModelConfig cfg_;
  std::uint64_t seed_;
  std::vector<nn::Parameter> params_;
};

/// Parameter-matched control: the source branch removed and an edited-only
/// feed-forward widened until the trainable parameter count is within
/// `tolerance` of the original.
struct ControlResult {
  ModelConfig config;
  std::size_t original_params = 0;
  std::size_t control_params = 0;
  double relative_delta = 0.0;
  bool within_tolerance = false;
};

/// Throws ValidationError when the source branch is already disabled.
ControlResult parameter_matched_control(const ModelConfig& cfg, double tolerance = 0.01);
IEQAModel parameter_matched_control(const IEQAModel& m, double tolerance = 0.01);

/// Parameter count of a configuration without allocating weights.
std::size_t count_parameters(const ModelConfig& cfg);

inline constexpr std::string_view kCheckpointFormat = "ieqa-checkpoint";
inline constexpr int kCheckpointVersion = 1;

nlohmann::json checkpoint_json(const IEQAModel& m);
IEQAModel model_from_checkpoint(const nlohmann::json& j);
void save_checkpoint(const IEQAModel& m, const std::filesystem::path& path);
IEQAModel load_checkpoint(const std::filesystem::path& path);

}  // namespace ieqa::model
