#include "app/commands.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include <json.hpp>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/image.hpp"
#include "common/log.hpp"
#include "common/text.hpp"
#include "dataset/dataset.hpp"
#include "metrics/baselines.hpp"
#include "subjective/subjective.hpp"
#include "training/trainer.hpp"

namespace ieqa::app {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

// Collects everything a command writes so run.json can list it with hashes.
class RunDir {
 public:
  explicit RunDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

  void write(const std::string& rel, std::string_view contents) {
    const auto path = root_ / rel;
    fs::create_directories(path.parent_path());
    text::write_file(path.string(), contents);
    hashes_[rel] = hex64(fnv1a(contents));
  }

  void record(const std::string& rel) { hashes_[rel] = hex64(fnv1a(text::read_file((root_ / rel).string()))); }

  const fs::path& root() const { return root_; }

  std::vector<std::string> finish(const std::string& command, const std::string& fingerprint) {
    ordered_json j;
    j["command"] = command;
    j["fingerprint"] = fingerprint;
    j["artifacts"] = ordered_json::array();
    for (const auto& [rel, h] : hashes_) j["artifacts"].push_back({{"path", rel}, {"fnv1a", h}});
    std::vector<std::string> out;
    for (const auto& [rel, h] : hashes_) out.push_back(rel);
    text::write_file((root_ / "run.json").string(), j.dump(2) + "\n");
    out.push_back("run.json");
    return out;
  }

 private:
  fs::path root_;
  std::map<std::string, std::string> hashes_;
};

template <class F>
CommandResult guarded(const char* name, F&& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    CommandResult r{kValidation, {}, std::string(name) + ": " + e.what()};
    for (const auto& d : e.details()) r.summary += "\n  " + d;
    return r;
  } catch (const DegenerateError& e) {
    return {kValidation, {}, std::string(name) + ": " + e.what()};
  } catch (const std::exception& e) {
    return {kRuntime, {}, std::string(name) + ": " + e.what()};
  }
}

std::string file_name_for(const std::string& case_id) {
  std::string s;
  bool changed = false;
  for (unsigned char c : case_id) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.') {
      s += static_cast<char>(c);
    } else {
      s += '_';
      changed = true;
    }
  }
  if (changed || s.empty() || s[0] == '.') s += "-" + hex64(fnv1a(case_id)).substr(0, 8);
  return s;
}

std::string inputs_fingerprint(std::initializer_list<std::string> parts) {
  std::uint64_t h = kFnvOffset;
  for (const auto& p : parts) {
    h = fnv1a(p, h);
    h = fnv1a(std::string_view("\x1f", 1), h);
  }
  return hex64(h);
}

struct RunConfig {
  model::ModelConfig model;
  training::TrainConfig train;
  training::LossConfig loss;
  int k = 10;
  std::string dimension = "overall_quality";
};

RunConfig load_run_config(const TrainOptions& opts) {
  RunConfig rc;
  if (opts.config) {
    json j;
    try {
      j = json::parse(text::read_file(opts.config->string()));
    } catch (const json::exception& e) {
      throw ParseError("config " + opts.config->string() + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError("config must be a JSON object");
    static const std::set<std::string> known{"model", "train", "loss", "k", "target_dimension"};
    for (const auto& [key, v] : j.items())
      if (!known.count(key)) throw ParseError("unknown config key '" + key + "'");
    if (j.contains("model")) rc.model = model::model_config_from_json(j["model"]);
    if (j.contains("train")) rc.train = training::train_config_from_json(j["train"]);
    if (j.contains("loss")) rc.loss = training::loss_config_from_json(j["loss"]);
    try {
      rc.k = j.value("k", rc.k);
      rc.dimension = j.value("target_dimension", rc.dimension);
    } catch (const json::exception& e) {
      throw ParseError(std::string("config: ") + e.what());
    }
  }
  if (opts.seed) rc.train.seed = *opts.seed;
  if (opts.k) rc.k = *opts.k;
  rc.model.validate();
  rc.train.validate();
  rc.loss.validate();
  if (rc.k < 2) throw ValidationError("k must be at least 2");
  return rc;
}

std::vector<training::Sample> load_samples(const TrainOptions& opts, const RunConfig& rc, std::string& notes) {
  const auto cs = dataset::load_manifest(opts.manifest);
  const auto mt = subjective::load_mos(opts.mos.string());
  if (!mt.dim_index(rc.dimension)) throw ValidationError("MOS table has no dimension '" + rc.dimension + "'");
  std::vector<std::pair<std::string, double>> targets;
  std::size_t skipped = 0;
  for (const auto& c : cs.cases) {
    const auto v = mt.mos(c.case_id, rc.dimension);
    if (!v) {
      ++skipped;
      log::warn("case ", c.case_id, " has no MOS for ", rc.dimension, "; excluded");
      continue;
    }
    targets.emplace_back(c.case_id, *v);
  }
  if (skipped) notes += "warning: " + std::to_string(skipped) + " case(s) without MOS excluded\n";
  return training::prepare_samples(rc.model, cs, targets);
}

void write_eval(RunDir& dir, const std::string& prefix, const training::EvalReport& r) {
  dir.write(prefix + "report.json", training::report_json(r).dump(2) + "\n");
  dir.write(prefix + "folds.csv", training::format_fold_table(r));
  dir.write(prefix + "predictions.csv", training::format_predictions(r));
  for (const auto& fr : r.folds) {
    char name[40];
    std::snprintf(name, sizeof name, "history/fold_%02d.csv", fr.fold);
    dir.write(prefix + name, training::format_history(fr.history));
    std::snprintf(name, sizeof name, "checkpoints/fold_%02d.ckpt.json", fr.fold);
    if (fs::exists(dir.root() / (prefix + name))) dir.record(prefix + name);
  }
}

std::string comparison_table(const std::vector<training::EvalReport>& reports) {
  std::string out(kComparisonHeader);
  out += '\n';
  if (reports.empty()) return out;
  const auto& ref = reports.front();
  auto f = text::format_double;
  for (const auto& r : reports) {
    out += r.variant + ',' + f(r.mean.srocc) + ',' + f(r.mean.plcc) + ',' + f(r.mean.krcc) + ',' + f(r.mean.rmse) +
           ',' + f(r.mean_rmse_rescaled) + ',' + f(r.mean.srocc - ref.mean.srocc) + ',' +
           f(r.mean.plcc - ref.mean.plcc) + ',' + f(r.mean.krcc - ref.mean.krcc) + ',' +
           f(r.mean.rmse - ref.mean.rmse) + ',' + std::to_string(r.parameter_count) + ',' +
           (r.partial ? "true" : "false") + ',' + r.fingerprint + '\n';
  }
  return out;
}

std::string render_comparison(const std::vector<training::EvalReport>& reports) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %8s %8s %8s %8s %10s\n", "variant", "SROCC", "PLCC", "KRCC", "RMSE",
                "params");
  out += line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-24s %8.4f %8.4f %8.4f %8.4f %10zu%s\n", r.variant.c_str(), r.mean.srocc,
                  r.mean.plcc, r.mean.krcc, r.mean.rmse, r.parameter_count, r.partial ? "  (partial)" : "");
    out += line;
  }
  return out;
}

training::CrossValidationOptions cv_options(const RunConfig& rc, const RunDir& dir, const std::string& prefix) {
  training::CrossValidationOptions o;
  o.k = rc.k;
  o.checkpoint_dir = dir.root() / (prefix + "checkpoints");
  fs::create_directories(*o.checkpoint_dir);
  return o;
}

}  // namespace

CommandResult cmd_ingest(const fs::path& manifest, const fs::path& out, int target) {
  return guarded("ingest", [&]() -> CommandResult {
    if (!fs::exists(manifest)) throw IoError("manifest not found: " + manifest.string());
    if (target < 1) throw ValidationError("resize target must be positive");
    const auto cs = dataset::load_manifest(manifest);
    RunDir dir(out);
    dataset::CaseSet store = cs;
    store.base_dir = out;
    for (auto& c : store.cases) {
      const auto stem = file_name_for(c.case_id);
      const auto src = resize_shorter_side(image_io::read(cs.resolve(c.source_image)), target);
      const auto edt = resize_shorter_side(image_io::read(cs.resolve(c.edited_image)), target);
      c.source_image = "images/" + stem + "_source.png";
      c.edited_image = "images/" + stem + "_edited.png";
      fs::create_directories(out / "images");
      image_io::write(src, out / c.source_image);
      image_io::write(edt, out / c.edited_image);
      dir.record(c.source_image);
      dir.record(c.edited_image);
    }
    const auto text = dataset::serialize_manifest(store);
    dir.write("manifest.jsonl", text);
    CommandResult r;
    r.summary = "ingested " + std::to_string(store.cases.size()) + " case(s) into " + out.string();
    if (store.cases.empty()) {
      r.summary += "\nwarning: manifest has no cases";
      log::warn("manifest ", manifest.string(), " has no cases");
    }
    r.artifacts_written = dir.finish("ingest", inputs_fingerprint({text, std::to_string(target)}));
    return r;
  });
}

CommandResult cmd_mos(const MosOptions& opts) {
  return guarded("mos", [&]() -> CommandResult {
    const auto raw = text::read_file(opts.ratings.string());
    auto rows = subjective::parse_score_rows(raw);
    if (!opts.dims.empty()) {
      const std::set<std::string> keep(opts.dims.begin(), opts.dims.end());
      std::erase_if(rows, [&](const subjective::ScoreRow& r) { return !keep.count(r.dim); });
      if (rows.empty()) throw ValidationError("no ratings for the selected dimensions");
    }
    const auto res = subjective::run_pipeline(subjective::from_rows(rows));

    RunDir dir(opts.out);
    dir.write("mos.csv", subjective::format_mos(res.mos));
    ordered_json scr;
    scr["kept"] = res.screening.kept;
    scr["rejected"] = res.screening.rejected;
    scr["raters"] = ordered_json::array();
    for (const auto& e : res.screening.report)
      scr["raters"].push_back({{"rater_id", e.rater_id},
                               {"p", e.p},
                               {"q", e.q},
                               {"n", e.n},
                               {"rejected", e.rejected},
                               {"reason", e.reason}});
    scr["undefined_cases"] = res.mos.undefined_cases;
    scr["warnings"] = res.warnings;
    dir.write("screening.json", scr.dump(2) + "\n");

    CommandResult r;
    r.summary = "MOS for " + std::to_string(res.mos.cases().size()) + " case(s) x " +
                std::to_string(res.mos.dims().size()) + " dimension(s); " + std::to_string(res.screening.kept.size()) +
                " rater(s) kept, " + std::to_string(res.screening.rejected.size()) + " rejected";
    for (const auto& e : res.screening.report)
      if (e.rejected)
        r.summary += "\nrejected " + e.rater_id + ": P=" + std::to_string(e.p) + " Q=" + std::to_string(e.q) +
                     " N=" + std::to_string(e.n);
    for (const auto& w : res.warnings) r.summary += "\nwarning: " + w;
    std::string dims;
    for (const auto& d : opts.dims) dims += d + ",";
    r.artifacts_written = dir.finish("mos", inputs_fingerprint({raw, dims}));
    return r;
  });
}

CommandResult cmd_baselines(const BaselineOptions& opts, const metrics::ScorerRegistry* registry) {
  return guarded("baselines", [&]() -> CommandResult {
    const auto cs = dataset::load_manifest(opts.manifest);
    const auto mt = subjective::load_mos(opts.mos.string());
    const auto builtin = metrics::builtin_registry();
    const auto& all = registry ? *registry : builtin;
    metrics::ScorerRegistry selected;
    if (opts.scorers.empty()) {
      selected = all;
    } else {
      for (const auto& name : opts.scorers) {
        if (!all.contains(name)) {
          std::string known;
          for (const auto& h : all.handles()) known += (known.empty() ? "" : ", ") + h.name;
          throw ValidationError("unknown scorer '" + name + "' (available: " + known + ")");
        }
        selected.add(all.get(name));
      }
    }
    metrics::BaselineOptions bo;
    bo.dimension = opts.dimension;
    const auto report = metrics::run_baselines(cs, mt, selected, bo);

    RunDir dir(opts.out);
    const auto table = metrics::format_report(report);
    dir.write("baselines.csv", table);
    dir.write("scores.csv", metrics::format_score_dump(report));
    CommandResult r;
    r.summary = table;
    for (const auto& f : report.failures) r.summary += "warning: " + f.scorer + " failed on " + f.case_id + ": " + f.message + "\n";
    std::string names;
    for (const auto& h : selected.handles()) names += h.name + ",";
    r.artifacts_written = dir.finish(
        "baselines", inputs_fingerprint({dataset::serialize_manifest(cs), subjective::format_mos(mt), names, opts.dimension}));
    return r;
  });
}

CommandResult cmd_train(const TrainOptions& opts) {
  return guarded("train", [&]() -> CommandResult {
    const auto rc = load_run_config(opts);
    std::string notes;
    const auto samples = load_samples(opts, rc, notes);
    RunDir dir(opts.out);
    const auto report = training::run_cross_validation(samples, rc.model, rc.train, rc.loss, cv_options(rc, dir, ""));
    write_eval(dir, "", report);
    CommandResult r;
    r.summary = notes + training::format_fold_table(report);
    if (report.partial) {
      r.exit_code = kRuntime;
      for (const auto& fr : report.folds)
        if (fr.failed) r.summary += "fold " + std::to_string(fr.fold) + " failed: " + fr.error + "\n";
    }
    r.artifacts_written = dir.finish("train", report.fingerprint);
    return r;
  });
}

CommandResult cmd_ablate(const TrainOptions& opts) {
  return guarded("ablate", [&]() -> CommandResult {
    const auto rc = load_run_config(opts);
    std::vector<training::Variant> variants;
    for (const auto& name : opts.variants) {
      if (name == "all") {
        for (auto v : training::all_variants()) variants.push_back(v);
        continue;
      }
      const auto v = training::parse_variant(name);
      if (!v) throw ValidationError("unknown variant '" + name + "'");
      variants.push_back(*v);
    }
    if (variants.empty()) throw ValidationError("no ablation variant given");
    std::string notes;
    const auto samples = load_samples(opts, rc, notes);
    RunDir dir(opts.out);
    std::vector<training::EvalReport> reports;
    std::string fp;
    for (auto v : variants) {
      const std::string prefix = std::string(training::to_string(v)) + "/";
      auto report = training::run_ablation(v, samples, rc.model, rc.train, rc.loss, cv_options(rc, dir, prefix));
      write_eval(dir, prefix, report);
      fp += report.fingerprint;
      reports.push_back(std::move(report));
    }
    dir.write("ablation.csv", comparison_table(reports));
    CommandResult r;
    r.summary = notes + render_comparison(reports);
    for (const auto& rep : reports)
      if (rep.partial) r.exit_code = kRuntime;
    r.artifacts_written = dir.finish("ablate", hex64(fnv1a(fp)));
    return r;
  });
}

CommandResult cmd_report(const std::vector<fs::path>& paths, const fs::path& out) {
  return guarded("report", [&]() -> CommandResult {
    if (paths.empty()) throw ValidationError("no reports given");
    std::vector<training::EvalReport> reports;
    std::string fp;
    for (const auto& p : paths) {
      json j;
      try {
        j = json::parse(text::read_file(p.string()));
      } catch (const json::exception& e) {
        throw ParseError(p.string() + ": " + e.what());
      }
      reports.push_back(training::report_from_json(j));
      fp += reports.back().fingerprint;
    }
    RunDir dir(out);
    const auto table = comparison_table(reports);
    dir.write("comparison.csv", table);
    CommandResult r;
    r.summary = render_comparison(reports);
    r.artifacts_written = dir.finish("report", hex64(fnv1a(table)));
    return r;
  });
}

CommandResult cmd_synth(const fs::path& out, const SyntheticOptions& opts) {
  return guarded("synth", [&]() -> CommandResult {
    const auto study = write_synthetic_study(out, opts);
    RunDir dir(out);
    for (const auto& c : study.cases.cases) {
      dir.record(c.source_image);
      dir.record(c.edited_image);
    }
    dir.record("manifest.jsonl");
    dir.record("ratings.csv");
    CommandResult r;
    r.summary = "wrote " + std::to_string(study.cases.cases.size()) + " case(s) and " +
                std::to_string(study.ratings.size()) + " rating row(s) to " + out.string();
    r.artifacts_written = dir.finish(
        "synth", inputs_fingerprint({std::to_string(opts.n_cases), std::to_string(opts.n_raters),
                                     std::to_string(opts.n_adversarial), std::to_string(opts.seed)}));
    return r;
  });
}

}  // namespace ieqa::app
