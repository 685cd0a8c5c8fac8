#include "model/ieqa_model.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/log.hpp"
#include "model/frontend.hpp"

namespace ieqa::model {

using nn::Matrix;
using nn::Tape;
using nn::Var;
using nlohmann::json;

std::string_view to_string(FusionMode m) {
  switch (m) {
    case FusionMode::identity: return "identity";
    case FusionMode::attention: return "attention";
    case FusionMode::concatenation: return "concatenation";
  }
  return "";
}

std::optional<FusionMode> parse_fusion(std::string_view s) {
  if (s == "identity") return FusionMode::identity;
  if (s == "attention") return FusionMode::attention;
  if (s == "concatenation" || s == "concat") return FusionMode::concatenation;
  return std::nullopt;
}

ModelConfig ModelConfig::stub() {
  ModelConfig c;
  c.grid = 2;
  c.embed_dim = 8;
  c.vocab = 32;
  c.max_tokens = 8;
  c.align_dim = 4;
  c.st_hidden = 8;
  c.st_out = 4;
  c.attn_heads = 2;
  c.quality_hidden = 8;
  c.quality_dim = 4;
  c.head_hidden = 8;
  return c;
}

void ModelConfig::validate() const {
  auto positive = [](int v, const char* what) {
    if (v <= 0) throw ValidationError(std::string("model config: ") + what + " must be positive");
  };
  positive(grid, "grid");
  positive(embed_dim, "embed_dim");
  positive(vocab, "vocab");
  positive(max_tokens, "max_tokens");
  positive(align_dim, "align_dim");
  positive(st_hidden, "st_hidden");
  positive(st_out, "st_out");
  positive(attn_heads, "attn_heads");
  positive(quality_hidden, "quality_hidden");
  positive(quality_dim, "quality_dim");
  positive(head_hidden, "head_hidden");
  if (embed_dim % attn_heads != 0) throw ValidationError("model config: embed_dim must be divisible by attn_heads");
  if (control_hidden < 0) throw ValidationError("model config: control_hidden must be >= 0");
  if (use_source_branch && control_hidden > 0)
    throw ValidationError("model config: control branch requires the source branch to be disabled");
}

int ModelConfig::source_slot_width() const {
  if (!use_source_branch) return control_hidden > 0 ? st_out : 0;
  switch (fusion) {
    case FusionMode::identity: return embed_dim;
    case FusionMode::attention: return embed_dim;
    case FusionMode::concatenation: return st_out;
  }
  return 0;
}

int ModelConfig::fusion_width() const {
  return (use_text_branch ? align_dim : 0) + source_slot_width() + quality_dim;
}

json to_json(const ModelConfig& c) {
  return json{{"grid", c.grid},
              {"embed_dim", c.embed_dim},
              {"vocab", c.vocab},
              {"max_tokens", c.max_tokens},
              {"align_dim", c.align_dim},
              {"st_hidden", c.st_hidden},
              {"st_out", c.st_out},
              {"attn_heads", c.attn_heads},
              {"quality_hidden", c.quality_hidden},
              {"quality_dim", c.quality_dim},
              {"head_hidden", c.head_hidden},
              {"use_text_branch", c.use_text_branch},
              {"use_source_branch", c.use_source_branch},
              {"fusion", std::string(to_string(c.fusion))},
              {"share_source_encoder", c.share_source_encoder},
              {"control_hidden", c.control_hidden}};
}

ModelConfig model_config_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("model config must be an object");
  ModelConfig c;
  if (j.value("preset", std::string()) == "stub") c = ModelConfig::stub();
  try {
    c.grid = j.value("grid", c.grid);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.vocab = j.value("vocab", c.vocab);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.align_dim = j.value("align_dim", c.align_dim);
    c.st_hidden = j.value("st_hidden", c.st_hidden);
    c.st_out = j.value("st_out", c.st_out);
    c.attn_heads = j.value("attn_heads", c.attn_heads);
    c.quality_hidden = j.value("quality_hidden", c.quality_hidden);
    c.quality_dim = j.value("quality_dim", c.quality_dim);
    c.head_hidden = j.value("head_hidden", c.head_hidden);
    c.use_text_branch = j.value("use_text_branch", c.use_text_branch);
    c.use_source_branch = j.value("use_source_branch", c.use_source_branch);
    c.share_source_encoder = j.value("share_source_encoder", c.share_source_encoder);
    c.control_hidden = j.value("control_hidden", c.control_hidden);
    if (j.contains("fusion")) {
      auto f = parse_fusion(j.at("fusion").get<std::string>());
      if (!f) throw ParseError("unknown fusion mode " + j.at("fusion").dump());
      c.fusion = *f;
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

CaseInputs prepare_inputs(const ModelConfig& cfg, const Image& source, const Image& edited, std::string_view prompt) {
  if (prompt.empty()) throw ValidationError("empty prompt");
  CaseInputs in;
  in.source_tokens = patch_features(source, cfg.grid);
  in.edited_tokens = patch_features(edited, cfg.grid);
  auto tok = tokenize(prompt, cfg.vocab, cfg.max_tokens);
  if (tok.truncated) log::debug("prompt truncated to ", cfg.max_tokens, " tokens");
  in.prompt_ids = std::move(tok.ids);
  return in;
}

IEQAModel::IEQAModel(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), seed_(seed) {
  cfg_.validate();
  const int d = cfg_.embed_dim;
  const int tokens = cfg_.grid * cfg_.grid;
  const double w_patch = 1.0 / std::sqrt(static_cast<double>(kPatchFeatures));
  const double w_d = 1.0 / std::sqrt(static_cast<double>(d));
  params_.reserve(48);

  auto visual = [&](const std::string& p) {
    add_param(p + ".proj_w", kPatchFeatures, d, w_patch, true);
    add_param(p + ".proj_b", 1, d, 0.0, true);
    add_param(p + ".pos", tokens, d, 0.1, true);
  };
  auto ffn = [&](const std::string& p, int in, int hidden, int out, bool backbone) {
    add_param(p + ".w1", in, hidden, 1.0 / std::sqrt(static_cast<double>(in)), backbone);
    add_param(p + ".b1", 1, hidden, 0.0, backbone);
    add_param(p + ".w2", hidden, out, 1.0 / std::sqrt(static_cast<double>(hidden)), backbone);
    add_param(p + ".b2", 1, out, 0.0, backbone);
  };
  auto attention = [&](const std::string& p) {
    for (const char* m : {".wq", ".wk", ".wv", ".wo"}) add_param(p + m, d, d, w_d, false);
  };

  visual("visual");
  if (cfg_.use_source_branch && !cfg_.share_source_encoder) visual("source_visual");
  visual("quality_visual");
  if (cfg_.use_text_branch) {
    add_param("text.embed", cfg_.vocab, d, 0.5, true);
    add_param("text.pos", cfg_.max_tokens, d, 0.1, true);
    ffn("text.ffn", d, d, d, true);
    attention("cross_attn");
    add_param("align.w", d + 1, cfg_.align_dim, 1.0 / std::sqrt(static_cast<double>(d + 1)), false);
    add_param("align.b", 1, cfg_.align_dim, 0.0, false);
  }
  if (cfg_.use_source_branch) {
    if (cfg_.fusion == FusionMode::concatenation) ffn("source_head", 2 * d, cfg_.st_hidden, cfg_.st_out, false);
    if (cfg_.fusion == FusionMode::attention) attention("fusion_attn");
  } else if (cfg_.control_hidden > 0) {
    ffn("dest_head", d, cfg_.control_hidden, cfg_.st_out, false);
  }
  ffn("quality_head", d, cfg_.quality_hidden, cfg_.quality_dim, false);
  ffn("regressor", cfg_.fusion_width(), cfg_.head_hidden, 1, false);
}

nn::Parameter& IEQAModel::add_param(const std::string& name, int rows, int cols, double stddev, bool backbone) {
  if (has_param(name)) throw std::logic_error("duplicate parameter " + name);
  nn::Parameter p;
  p.name = name;
  p.backbone = backbone;
  p.index = params_.size();
  p.value = Matrix::Zero(rows, cols);
  if (stddev > 0) {
    // per-tensor stream: values do not depend on which other tensors exist
    std::mt19937_64 rng(mix_seed(seed_, name));
    std::normal_distribution<double> dist(0.0, stddev);
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value(i) = dist(rng);
  }
  params_.push_back(std::move(p));
  return params_.back();
}

bool IEQAModel::has_param(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const nn::Parameter& p) { return p.name == name; });
}

const nn::Parameter& IEQAModel::param(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return p;
  throw std::out_of_range("no parameter named " + std::string(name));
}

nn::Parameter& IEQAModel::param(std::string_view name) {
  return const_cast<nn::Parameter&>(std::as_const(*this).param(name));
}

std::size_t IEQAModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

std::size_t IEQAModel::backbone_parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p.backbone) n += static_cast<std::size_t>(p.value.size());
  return n;
}

std::uint64_t IEQAModel::backbone_checksum() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& p : params_) {
    if (!p.backbone) continue;
    h = fnv1a(p.name, h);
    h = fnv1a(std::as_bytes(std::span(p.value.data(), static_cast<std::size_t>(p.value.size()))), h);
  }
  return h;
}

nn::Gradients IEQAModel::zero_gradients() const {
  nn::Gradients g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  return g;
}

Var IEQAModel::visual_tokens(Tape& t, std::string_view prefix, const Matrix& patches) const {
  const std::string p(prefix);
  Var x = t.constant(patches);
  Var h = nn::add_row(nn::matmul(x, t.param(param(p + ".proj_w"))), t.param(param(p + ".proj_b")));
  return nn::gelu(nn::add(h, t.param(param(p + ".pos"))));
}

Var IEQAModel::cross_attention(Tape& t, std::string_view prefix, Var queries, Var memory, int heads) const {
  const std::string p(prefix);
  Var q = nn::matmul(queries, t.param(param(p + ".wq")));
  Var k = nn::matmul(memory, t.param(param(p + ".wk")));
  Var v = nn::matmul(memory, t.param(param(p + ".wv")));
  const Eigen::Index head_dim = q.cols() / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<Var> outs;
  for (int h = 0; h < heads; ++h) {
    Var qh = nn::slice_cols(q, h * head_dim, head_dim);
    Var kh = nn::slice_cols(k, h * head_dim, head_dim);
    Var vh = nn::slice_cols(v, h * head_dim, head_dim);
    Var att = nn::softmax_rows(nn::scale(nn::matmul(qh, nn::transpose(kh)), inv_sqrt));
    outs.push_back(nn::matmul(att, vh));
  }
  Var merged = heads == 1 ? outs.front() : nn::concat_cols(outs);
  return nn::matmul(merged, t.param(param(p + ".wo")));
}

Var IEQAModel::feed_forward(Tape& t, std::string_view prefix, Var x) const {
  const std::string p(prefix);
  Var h = nn::gelu(nn::add_row(nn::matmul(x, t.param(param(p + ".w1"))), t.param(param(p + ".b1"))));
  return nn::add_row(nn::matmul(h, t.param(param(p + ".w2"))), t.param(param(p + ".b2")));
}

ForwardTrace IEQAModel::build(Tape& t, const CaseInputs& in) const {
  const int tokens = cfg_.grid * cfg_.grid;
  if (in.edited_tokens.rows() != tokens || in.source_tokens.rows() != tokens)
    throw ValidationError("case inputs were prepared for a different token grid");

  ForwardTrace tr;
  std::vector<Var> parts;

  // F_bv and F* are the same visual encoder applied to the edited image
  Var edited_tokens = visual_tokens(t, "visual", in.edited_tokens);
  tr.f_star = nn::mean_rows(edited_tokens);
  tr.e_bv = tr.f_star;

  if (cfg_.use_text_branch) {
    if (in.prompt_ids.empty() || static_cast<int>(in.prompt_ids.size()) > cfg_.max_tokens)
      throw ValidationError("prompt token count outside [1, max_tokens]");
    const auto n = static_cast<Eigen::Index>(in.prompt_ids.size());
    Var text = nn::add(nn::gather_rows(t.param(param("text.embed")), in.prompt_ids),
                       nn::slice_rows(t.param(param("text.pos")), 0, n));
    // text tokens attend over the pooled visual embedding and the visual tokens
    Var memory = nn::concat_rows(tr.e_bv, edited_tokens);
    Var z = nn::add(text, cross_attention(t, "cross_attn", text, memory, 1));
    Var y = nn::add(z, feed_forward(t, "text.ffn", z));
    tr.e_bt = nn::mean_rows(y);
    const Var align_in[] = {nn::hadamard(tr.e_bv, tr.e_bt), nn::row_cosine(tr.e_bv, tr.e_bt)};
    tr.align = nn::add_row(nn::matmul(nn::concat_cols(align_in), t.param(param("align.w"))),
                           t.param(param("align.b")));
    parts.push_back(tr.align);
  }

  if (cfg_.use_source_branch) {
    Var source_tokens =
        visual_tokens(t, cfg_.share_source_encoder ? "visual" : "source_visual", in.source_tokens);
    tr.f = nn::mean_rows(source_tokens);
    switch (cfg_.fusion) {
      case FusionMode::identity:
        tr.o_s = tr.f_star;
        break;
      case FusionMode::attention:
        tr.o_s = nn::mean_rows(cross_attention(t, "fusion_attn", edited_tokens, source_tokens, cfg_.attn_heads));
        break;
      case FusionMode::concatenation: {
        const Var both[] = {tr.f, tr.f_star};
        tr.o_s = feed_forward(t, "source_head", nn::concat_cols(both));
        break;
      }
    }
    parts.push_back(tr.o_s);
  } else if (cfg_.control_hidden > 0) {
    tr.o_s = feed_forward(t, "dest_head", tr.f_star);
    parts.push_back(tr.o_s);
  }

  Var quality_tokens = visual_tokens(t, "quality_visual", in.edited_tokens);
  tr.q = feed_forward(t, "quality_head", nn::mean_rows(quality_tokens));
  parts.push_back(tr.q);

  tr.fused = nn::concat_cols(parts);
  tr.score = feed_forward(t, "regressor", tr.fused);
  return tr;
}

double IEQAModel::predict(const CaseInputs& in) const {
  Tape t;
  return build(t, in).score.scalar();
}

Prediction IEQAModel::predict_case(const std::string& case_id, const CaseInputs& in) const {
  Tape t;
  auto tr = build(t, in);
  Prediction p;
  p.case_id = case_id;
  p.score = tr.score.scalar();
  if (!std::isfinite(p.score)) throw std::runtime_error("non-finite prediction for case " + case_id);
  auto cos = [](const Matrix& a, const Matrix& b) { return a.row(0).dot(b.row(0)) / (a.norm() * b.norm()); };
  if (tr.e_bt.valid()) p.branches.alignment_cosine = cos(tr.e_bv.value(), tr.e_bt.value());
  if (tr.f.valid()) p.branches.source_target_cosine = cos(tr.f.value(), tr.f_star.value());
  p.branches.quality_norm = tr.q.value().norm();
  return p;
}

AlignmentFeatures IEQAModel::encode_alignment(const Image& edited, std::string_view prompt) const {
  if (!cfg_.use_text_branch) throw ValidationError("text branch is disabled in this model");
  Tape t;
  auto tr = build(t, prepare_inputs(cfg_, edited, edited, prompt));
  return {tr.e_bv.value(), tr.e_bt.value()};
}

SourceTargetFeatures IEQAModel::encode_source_target(const Image& source, const Image& edited) const {
  if (!cfg_.use_source_branch) throw ValidationError("source branch is disabled in this model");
  Tape t;
  auto tr = build(t, prepare_inputs(cfg_, source, edited, "x"));
  return {tr.f.value(), tr.f_star.value(), tr.o_s.value()};
}

QualityFeatures IEQAModel::encode_quality(const Image& edited) const {
  Tape t;
  auto tr = build(t, prepare_inputs(cfg_, edited, edited, "x"));
  return {tr.q.value()};
}

Prediction IEQAModel::forward(const dataset::CaseSet& cs, const dataset::EditCase& c) const {
  const auto source = image_io::read(cs.resolve(c.source_image));
  const auto edited = image_io::read(cs.resolve(c.edited_image));
  return predict_case(c.case_id, prepare_inputs(cfg_, source, edited, c.prompt));
}

std::size_t count_parameters(const ModelConfig& cfg) { return IEQAModel(cfg, 0).parameter_count(); }

ControlResult parameter_matched_control(const ModelConfig& cfg, double tolerance) {
  if (!cfg.use_source_branch) throw ValidationError("parameter-matched control needs a model with the source branch");
  ControlResult res;
  res.original_params = count_parameters(cfg);

  ModelConfig control = cfg;
  control.use_source_branch = false;
  // parameter count is affine in the control hidden width: A + B * h
  control.control_hidden = 1;
  const auto at1 = static_cast<double>(count_parameters(control));
  control.control_hidden = 2;
  const auto at2 = static_cast<double>(count_parameters(control));
  const double slope = at2 - at1;
  const double intercept = at1 - slope;
  const double ideal = (static_cast<double>(res.original_params) - intercept) / slope;
  control.control_hidden = std::max(1, static_cast<int>(std::lround(ideal)));

  res.config = control;
  res.control_params = count_parameters(control);
  res.relative_delta = std::abs(static_cast<double>(res.control_params) - static_cast<double>(res.original_params)) /
                       static_cast<double>(res.original_params);
  res.within_tolerance = res.relative_delta <= tolerance;
  return res;
}

IEQAModel parameter_matched_control(const IEQAModel& m, double tolerance) {
  auto res = parameter_matched_control(m.config(), tolerance);
  if (!res.within_tolerance)
    throw ValidationError("cannot match parameter count within tolerance; achievable relative delta " +
                          std::to_string(res.relative_delta));
  return IEQAModel(res.config, m.seed());
}

json checkpoint_json(const IEQAModel& m) {
  json params = json::array();
  for (const auto& p : m.parameters()) {
    std::vector<double> data(p.value.data(), p.value.data() + p.value.size());
    params.push_back({{"name", p.name},
                      {"rows", p.value.rows()},
                      {"cols", p.value.cols()},
                      {"backbone", p.backbone},
                      {"data", std::move(data)}});
  }
  return json{{"format", kCheckpointFormat},
              {"version", kCheckpointVersion},
              {"seed", m.seed()},
              {"config", to_json(m.config())},
              {"params", std::move(params)}};
}

IEQAModel model_from_checkpoint(const json& j) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) throw ParseError("not an IE-QA checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw ParseError("unsupported checkpoint version " + j.at("version").dump());
    IEQAModel m(model_config_from_json(j.at("config")), j.at("seed").get<std::uint64_t>());
    const auto& params = j.at("params");
    if (params.size() != m.parameters().size()) throw ParseError("checkpoint parameter list does not match config");
    for (const auto& jp : params) {
      auto& p = m.param(jp.at("name").get<std::string>());
      const auto rows = jp.at("rows").get<Eigen::Index>();
      const auto cols = jp.at("cols").get<Eigen::Index>();
      const auto data = jp.at("data").get<std::vector<double>>();
      if (rows != p.value.rows() || cols != p.value.cols() || static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw ParseError("checkpoint shape mismatch for " + p.name);
      std::copy(data.begin(), data.end(), p.value.data());
    }
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::out_of_range& e) {
    throw ParseError(std::string("checkpoint names an unknown parameter: ") + e.what());
  }
}

void save_checkpoint(const IEQAModel& m, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << checkpoint_json(m).dump() << '\n';
}

IEQAModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
  return model_from_checkpoint(j);
}

}  // namespace ieqa::model
