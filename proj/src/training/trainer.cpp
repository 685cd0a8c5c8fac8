#include "training/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/log.hpp"
#include "common/text.hpp"

namespace ieqa::training {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ValidationError("learning rate must be positive");
  if (batch_size < 2) throw ValidationError("batch size must be at least 2 (PLCC needs pairs)");
  if (stage1_epochs < 0 || stage2_epochs < 0) throw ValidationError("epoch counts must be >= 0");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && eps > 0)) throw ValidationError("bad Adam constants");
}

json to_json(const TrainConfig& c) {
  return json{{"lr", c.lr},
              {"batch_size", c.batch_size},
              {"stage1_epochs", c.stage1_epochs},
              {"stage2_epochs", c.stage2_epochs},
              {"optimizer", "adam"},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"eps", c.eps},
              {"schedule", "cosine_per_stage"},
              {"seed", c.seed}};
}

json to_json(const LossConfig& c) {
  return json{{"alpha", c.alpha},
              {"rank_margin", c.rank_margin},
              {"tie_epsilon", c.tie_epsilon},
              {"plcc_loss", "(1 - plcc) / 2"},
              {"rank_loss", "mean hinge over ordered non-tied target pairs"}};
}

TrainConfig train_config_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("train config must be an object");
  TrainConfig c;
  try {
    c.lr = j.value("lr", c.lr);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.stage1_epochs = j.value("stage1_epochs", c.stage1_epochs);
    c.stage2_epochs = j.value("stage2_epochs", c.stage2_epochs);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.seed = j.value("seed", c.seed);
    if (j.value("optimizer", std::string("adam")) != "adam") throw ParseError("only the adam optimizer is supported");
  } catch (const json::exception& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

LossConfig loss_config_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("loss config must be an object");
  LossConfig c;
  try {
    c.alpha = j.value("alpha", c.alpha);
    c.rank_margin = j.value("rank_margin", c.rank_margin);
    c.tie_epsilon = j.value("tie_epsilon", c.tie_epsilon);
  } catch (const json::exception& e) {
    throw ParseError(std::string("loss config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<Sample> prepare_samples(const model::ModelConfig& cfg, const dataset::CaseSet& cs,
                                    const std::vector<std::pair<std::string, double>>& targets) {
  std::vector<Sample> out;
  out.reserve(targets.size());
  for (const auto& [id, target] : targets) {
    const auto* c = cs.find(id);
    if (!c) throw ValidationError("target for unknown case '" + id + "'");
    if (!std::isfinite(target)) throw ValidationError("non-finite target for case '" + id + "'");
    const auto source = image_io::read(cs.resolve(c->source_image));
    const auto edited = image_io::read(cs.resolve(c->edited_image));
    out.push_back({c->case_id, model::prepare_inputs(cfg, source, edited, c->prompt), target});
  }
  std::sort(out.begin(), out.end(), [](const Sample& a, const Sample& b) { return a.case_id < b.case_id; });
  return out;
}

FoldSplit make_folds(std::vector<std::string> case_ids, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("cross-validation needs k >= 2");
  std::sort(case_ids.begin(), case_ids.end());
  if (std::adjacent_find(case_ids.begin(), case_ids.end()) != case_ids.end())
    throw ValidationError("duplicate case ids in fold input");
  if (static_cast<std::size_t>(k) > case_ids.size())
    throw ValidationError("k = " + std::to_string(k) + " exceeds the number of cases (" +
                          std::to_string(case_ids.size()) + ")");
  std::mt19937_64 rng(mix_seed(seed, "folds"));
  std::shuffle(case_ids.begin(), case_ids.end(), rng);

  FoldSplit split;
  split.k = k;
  split.seed = seed;
  const auto n = case_ids.size();
  const auto base = n / static_cast<std::size_t>(k);
  const auto extra = n % static_cast<std::size_t>(k);
  std::size_t at = 0;
  for (std::size_t f = 0; f < static_cast<std::size_t>(k); ++f) {
    const auto len = base + (f < extra ? 1 : 0);
    std::vector<std::string> fold(case_ids.begin() + static_cast<std::ptrdiff_t>(at),
                                  case_ids.begin() + static_cast<std::ptrdiff_t>(at + len));
    std::sort(fold.begin(), fold.end());
    split.folds.push_back(std::move(fold));
    at += len;
  }
  return split;
}

FoldSplit make_folds(const dataset::CaseSet& cs, int k, std::uint64_t seed) {
  std::vector<std::string> ids;
  for (const auto& c : cs.cases) ids.push_back(c.case_id);
  return make_folds(std::move(ids), k, seed);
}

Adam::Adam(const model::IEQAModel& m, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : m.parameters()) {
    m_.push_back(nn::Matrix::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(nn::Matrix::Zero(p.value.rows(), p.value.cols()));
  }
  t_.assign(m.parameters().size(), 0);
}

void Adam::step(model::IEQAModel& m, const nn::Gradients& grads, double lr, const std::vector<bool>& trainable) {
  auto& params = m.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!trainable[i] || grads[i].size() == 0) continue;
    const auto& g = grads[i];
    ++t_[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_[i]));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_[i]));
    params[i].value.array() -=
        lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
  }
}

double cosine_lr(double lr, std::size_t step, std::size_t total) {
  if (total == 0) return lr;
  return lr * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total)));
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size, std::uint64_t seed) {
  if (n < 2) throw ValidationError("training needs at least two samples");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  const auto bs = static_cast<std::size_t>(batch_size);
  for (std::size_t at = 0; at < n; at += bs)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, at + bs)));
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

double batch_loss_and_gradients(const model::IEQAModel& m, const std::vector<const Sample*>& batch,
                                const LossConfig& lc, nn::Gradients& grads) {
  std::vector<nn::Tape> tapes(batch.size());
  std::vector<nn::Var> scores;
  std::vector<double> pred, target;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    scores.push_back(m.build(tapes[i], batch[i]->inputs).score);
    pred.push_back(scores.back().scalar());
    target.push_back(batch[i]->target);
  }
  const auto loss = total_loss(pred, target, lc);
  if (!std::isfinite(loss.value)) return loss.value;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (loss.grad[i] != 0.0) tapes[i].backward(scores[i], loss.grad[i], grads);
  }
  return loss.value;
}

TrainHistory train(model::IEQAModel& m, const std::vector<Sample>& samples, const TrainConfig& tc,
                   const LossConfig& lc) {
  tc.validate();
  lc.validate();
  if (samples.size() < 2) throw ValidationError("training needs at least two samples");
  for (const auto& s : samples)
    if (!std::isfinite(s.target)) throw ValidationError("case '" + s.case_id + "' has no finite MOS");

  TrainHistory hist;
  hist.backbone_checksum_start = m.backbone_checksum();
  hist.backbone_checksum_after_stage1 = hist.backbone_checksum_start;

  const auto n_params = m.parameters().size();
  for (int stage = 1; stage <= 2; ++stage) {
    const int epochs = stage == 1 ? tc.stage1_epochs : tc.stage2_epochs;
    std::vector<bool> trainable(n_params, true);
    if (stage == 1)
      for (std::size_t i = 0; i < n_params; ++i) trainable[i] = !m.parameters()[i].backbone;

    Adam opt(m, tc.beta1, tc.beta2, tc.eps);
    const auto per_epoch = make_batches(samples.size(), tc.batch_size, 0).size();
    const auto total_steps = per_epoch * static_cast<std::size_t>(epochs);
    std::size_t step = 0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
      const auto batches = make_batches(
          samples.size(), tc.batch_size,
          mix_seed(tc.seed, "stage" + std::to_string(stage) + "/epoch" + std::to_string(epoch)));
      double loss_sum = 0.0;
      double lr = tc.lr;
      for (const auto& idx : batches) {
        std::vector<const Sample*> batch;
        for (auto i : idx) batch.push_back(&samples[i]);
        auto grads = m.zero_gradients();
        const double loss = batch_loss_and_gradients(m, batch, lc, grads);
        if (!std::isfinite(loss))
          throw TrainingError("non-finite loss at stage " + std::to_string(stage) + ", epoch " +
                              std::to_string(epoch) + ", step " + std::to_string(step));
        lr = cosine_lr(tc.lr, step, total_steps);
        opt.step(m, grads, lr, trainable);
        loss_sum += loss;
        ++step;
      }
      hist.epochs.push_back({stage, epoch, loss_sum / static_cast<double>(batches.size()), lr});
      log::debug("stage ", stage, " epoch ", epoch, " loss ", hist.epochs.back().loss);
    }
    if (stage == 1) hist.backbone_checksum_after_stage1 = m.backbone_checksum();
  }
  return hist;
}

EvalResult evaluate(const model::IEQAModel& m, const std::vector<Sample>& samples, std::optional<TargetScale> scale) {
  EvalResult res;
  std::vector<double> pred, target;
  for (const auto& s : samples) {
    const double p = m.predict(s.inputs);
    res.predictions.push_back({s.case_id, p, s.target});
    pred.push_back(p);
    target.push_back(s.target);
  }
  try {
    const metrics::PairedSeries ps(pred, target);
    res.metrics = metrics::summarize(ps);
    if (scale) {
      std::vector<double> p10, t10;
      for (std::size_t i = 0; i < pred.size(); ++i) {
        p10.push_back(scale->to_ten(pred[i]));
        t10.push_back(scale->to_ten(target[i]));
      }
      res.rmse_rescaled = metrics::rmse(metrics::PairedSeries(p10, t10));
    }
  } catch (const std::exception& e) {
    res.degenerate = true;
    res.error = e.what();
  }
  return res;
}

namespace {

json cv_config_json(const model::ModelConfig& mc, const TrainConfig& tc, const LossConfig& lc, int k) {
  return json{{"model", model::to_json(mc)}, {"train", to_json(tc)}, {"loss", to_json(lc)}, {"k", k}};
}

}  // namespace

std::string config_fingerprint(const json& config) { return hex64(fnv1a(config.dump())); }

EvalReport run_cross_validation(const std::vector<Sample>& samples, const model::ModelConfig& mc,
                                const TrainConfig& tc, const LossConfig& lc, const CrossValidationOptions& opts) {
  tc.validate();
  lc.validate();
  mc.validate();
  EvalReport report;
  report.variant = opts.variant;
  report.config = cv_config_json(mc, tc, lc, opts.k);
  report.fingerprint = config_fingerprint(report.config);
  report.parameter_count = model::count_parameters(mc);

  std::vector<std::string> ids;
  for (const auto& s : samples) ids.push_back(s.case_id);
  report.split = make_folds(ids, opts.k, tc.seed);

  std::optional<TargetScale> scale;
  {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : samples) {
      lo = std::min(lo, s.target);
      hi = std::max(hi, s.target);
    }
    if (hi > lo) scale = TargetScale{lo, hi};
  }

  std::map<std::string, const Sample*> by_id;
  for (const auto& s : samples) by_id[s.case_id] = &s;

  for (int f = 0; f < opts.k; ++f) {
    FoldReport fr;
    fr.fold = f;
    const std::set<std::string> test_ids(report.split.folds[f].begin(), report.split.folds[f].end());
    std::vector<Sample> train_set, test_set;
    for (const auto& s : samples) (test_ids.count(s.case_id) ? test_set : train_set).push_back(s);
    fr.n_train = train_set.size();
    fr.n_test = test_set.size();

    TrainConfig fold_tc = tc;
    fold_tc.seed = tc.seed + static_cast<std::uint64_t>(f);
    try {
      model::IEQAModel m(mc, fold_tc.seed);
      fr.history = train(m, train_set, fold_tc, lc);
      fr.eval = evaluate(m, test_set, scale);
      if (opts.checkpoint_dir) {
        char name[32];
        std::snprintf(name, sizeof name, "fold_%02d.ckpt.json", f);
        model::save_checkpoint(m, *opts.checkpoint_dir / name);
      }
    } catch (const std::exception& e) {
      fr.failed = true;
      fr.error = e.what();
      log::error("fold ", f, " failed: ", e.what());
    }
    report.folds.push_back(std::move(fr));
  }

  std::size_t ok = 0;
  for (const auto& fr : report.folds) {
    if (fr.failed || fr.eval.degenerate) {
      report.partial = true;
      continue;
    }
    report.mean.srocc += fr.eval.metrics.srocc;
    report.mean.plcc += fr.eval.metrics.plcc;
    report.mean.krcc += fr.eval.metrics.krcc;
    report.mean.rmse += fr.eval.metrics.rmse;
    report.mean_rmse_rescaled += fr.eval.rmse_rescaled;
    ++ok;
  }
  if (ok > 0) {
    const double n = static_cast<double>(ok);
    report.mean.srocc /= n;
    report.mean.plcc /= n;
    report.mean.krcc /= n;
    report.mean.rmse /= n;
    report.mean_rmse_rescaled /= n;
  }
  return report;
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::no_text: return "no_text";
    case Variant::no_source: return "no_source";
    case Variant::fusion_identity: return "fusion_identity";
    case Variant::fusion_attention: return "fusion_attention";
    case Variant::fusion_concat: return "fusion_concat";
    case Variant::param_matched_control: return "param_matched_control";
  }
  return "";
}

std::optional<Variant> parse_variant(std::string_view s) {
  for (auto v : all_variants())
    if (to_string(v) == s) return v;
  return std::nullopt;
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v{Variant::no_text,         Variant::no_source,     Variant::fusion_identity,
                                      Variant::fusion_attention, Variant::fusion_concat, Variant::param_matched_control};
  return v;
}

VariantConfig configure_variant(Variant v, const model::ModelConfig& base) {
  VariantConfig out{base, std::nullopt};
  switch (v) {
    case Variant::no_text: out.config.use_text_branch = false; break;
    case Variant::no_source:
      out.config.use_source_branch = false;
      out.config.control_hidden = 0;
      break;
    case Variant::fusion_identity: out.config.fusion = model::FusionMode::identity; break;
    case Variant::fusion_attention: out.config.fusion = model::FusionMode::attention; break;
    case Variant::fusion_concat: out.config.fusion = model::FusionMode::concatenation; break;
    case Variant::param_matched_control: {
      model::ModelConfig with_source = base;
      with_source.use_source_branch = true;
      with_source.control_hidden = 0;
      with_source.fusion = model::FusionMode::concatenation;
      auto ctl = model::parameter_matched_control(with_source);
      out.config = ctl.config;
      out.control = ctl;
      break;
    }
  }
  out.config.validate();
  return out;
}

EvalReport run_ablation(Variant v, const std::vector<Sample>& samples, const model::ModelConfig& base,
                        const TrainConfig& tc, const LossConfig& lc, CrossValidationOptions opts) {
  const auto vc = configure_variant(v, base);
  if (vc.control && !vc.control->within_tolerance)
    log::warn("parameter-matched control misses the 1% target: relative delta ", vc.control->relative_delta);
  opts.variant = std::string(to_string(v));
  auto report = run_cross_validation(samples, vc.config, tc, lc, opts);
  if (vc.control) report.reference_parameter_count = vc.control->original_params;
  return report;
}

namespace {

json metrics_json(const metrics::CorrelationSummary& m, double rmse10) {
  return json{{"srocc", m.srocc}, {"plcc", m.plcc}, {"krcc", m.krcc}, {"rmse", m.rmse}, {"rmse_rescaled", rmse10}};
}

}  // namespace

json report_json(const EvalReport& r) {
  json folds = json::array();
  json predictions = json::array();
  for (const auto& fr : r.folds) {
    json jf{{"fold", fr.fold},
            {"n_train", fr.n_train},
            {"n_test", fr.n_test},
            {"case_ids", r.split.folds.at(static_cast<std::size_t>(fr.fold))}};
    if (fr.failed) {
      jf["status"] = "failed";
      jf["error"] = fr.error;
    } else if (fr.eval.degenerate) {
      jf["status"] = "degenerate";
      jf["error"] = fr.eval.error;
    } else {
      jf["status"] = "ok";
      jf["metrics"] = metrics_json(fr.eval.metrics, fr.eval.rmse_rescaled);
    }
    json hist = json::array();
    for (const auto& e : fr.history.epochs) hist.push_back({e.stage, e.epoch, e.loss, e.lr});
    jf["history"] = std::move(hist);
    jf["backbone_checksum_start"] = hex64(fr.history.backbone_checksum_start);
    jf["backbone_checksum_after_stage1"] = hex64(fr.history.backbone_checksum_after_stage1);
    folds.push_back(std::move(jf));
    for (const auto& p : fr.eval.predictions)
      predictions.push_back({{"case_id", p.case_id}, {"fold", fr.fold}, {"pred", p.pred}, {"target", p.target}});
  }
  json j{{"format", "ieqa-eval-report"},
         {"version", 1},
         {"variant", r.variant},
         {"fingerprint", r.fingerprint},
         {"config", r.config},
         {"split_seed", r.split.seed},
         {"k", r.split.k},
         {"folds", std::move(folds)},
         {"mean", metrics_json(r.mean, r.mean_rmse_rescaled)},
         {"partial", r.partial},
         {"parameter_count", r.parameter_count},
         {"predictions", std::move(predictions)}};
  if (r.reference_parameter_count) j["reference_parameter_count"] = *r.reference_parameter_count;
  return j;
}

EvalReport report_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "ieqa-eval-report") throw ParseError("not an evaluation report");
    EvalReport r;
    r.variant = j.at("variant").get<std::string>();
    r.fingerprint = j.at("fingerprint").get<std::string>();
    r.config = j.at("config");
    r.split.k = j.at("k").get<int>();
    r.split.seed = j.at("split_seed").get<std::uint64_t>();
    r.partial = j.at("partial").get<bool>();
    r.parameter_count = j.at("parameter_count").get<std::size_t>();
    if (j.contains("reference_parameter_count"))
      r.reference_parameter_count = j.at("reference_parameter_count").get<std::size_t>();
    const auto& mean = j.at("mean");
    r.mean = {mean.at("srocc").get<double>(), mean.at("plcc").get<double>(), mean.at("krcc").get<double>(),
              mean.at("rmse").get<double>()};
    r.mean_rmse_rescaled = mean.at("rmse_rescaled").get<double>();
    for (const auto& jf : j.at("folds")) {
      FoldReport fr;
      fr.fold = jf.at("fold").get<int>();
      fr.n_train = jf.at("n_train").get<std::size_t>();
      fr.n_test = jf.at("n_test").get<std::size_t>();
      r.split.folds.push_back(jf.at("case_ids").get<std::vector<std::string>>());
      const auto status = jf.at("status").get<std::string>();
      fr.failed = status == "failed";
      fr.eval.degenerate = status == "degenerate";
      if (jf.contains("error")) (fr.failed ? fr.error : fr.eval.error) = jf.at("error").get<std::string>();
      if (status == "ok") {
        const auto& m = jf.at("metrics");
        fr.eval.metrics = {m.at("srocc").get<double>(), m.at("plcc").get<double>(), m.at("krcc").get<double>(),
                           m.at("rmse").get<double>()};
        fr.eval.rmse_rescaled = m.at("rmse_rescaled").get<double>();
      }
      for (const auto& e : jf.at("history"))
        fr.history.epochs.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>(), e.at(3).get<double>()});
      auto parse_hex = [&](const char* key) {
        const auto text = jf.at(key).get<std::string>();
        std::uint64_t v = 0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), v, 16);
        if (res.ec != std::errc() || res.ptr != text.data() + text.size()) throw ParseError(std::string("bad ") + key);
        return v;
      };
      fr.history.backbone_checksum_start = parse_hex("backbone_checksum_start");
      fr.history.backbone_checksum_after_stage1 = parse_hex("backbone_checksum_after_stage1");
      r.folds.push_back(std::move(fr));
    }
    for (const auto& p : j.at("predictions")) {
      const auto fold = p.at("fold").get<std::size_t>();
      if (fold >= r.folds.size()) throw ParseError("prediction references an unknown fold");
      r.folds[fold].eval.predictions.push_back(
          {p.at("case_id").get<std::string>(), p.at("pred").get<double>(), p.at("target").get<double>()});
    }
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed evaluation report: ") + e.what());
  }
}

std::string format_fold_table(const EvalReport& r) {
  std::string out(kFoldTableHeader);
  out += '\n';
  auto row = [&](const std::string& label, const metrics::CorrelationSummary& m, double r10, std::size_t n,
                 const std::string& status) {
    out += label + ',' + text::format_double(m.srocc) + ',' + text::format_double(m.plcc) + ',' +
           text::format_double(m.krcc) + ',' + text::format_double(m.rmse) + ',' + text::format_double(r10) + ',' +
           std::to_string(n) + ',' + status + '\n';
  };
  std::size_t total = 0;
  for (const auto& fr : r.folds) {
    total += fr.n_test;
    if (fr.failed || fr.eval.degenerate) {
      out += std::to_string(fr.fold) + ",,,,,," + std::to_string(fr.n_test) + ',' +
             (fr.failed ? "failed" : "degenerate") + '\n';
      continue;
    }
    row(std::to_string(fr.fold), fr.eval.metrics, fr.eval.rmse_rescaled, fr.n_test, "ok");
  }
  row("mean", r.mean, r.mean_rmse_rescaled, total, r.partial ? "partial" : "ok");
  return out;
}

std::string format_predictions(const EvalReport& r) {
  std::string out = "case_id,fold,pred,target\n";
  for (const auto& fr : r.folds)
    for (const auto& p : fr.eval.predictions)
      out += p.case_id + ',' + std::to_string(fr.fold) + ',' + text::format_double(p.pred) + ',' +
             text::format_double(p.target) + '\n';
  return out;
}

std::string format_history(const TrainHistory& h) {
  std::string out = "stage,epoch,loss,lr\n";
  for (const auto& e : h.epochs)
    out += std::to_string(e.stage) + ',' + std::to_string(e.epoch) + ',' + text::format_double(e.loss) + ',' +
           text::format_double(e.lr) + '\n';
  return out;
}

}  // namespace ieqa::training
