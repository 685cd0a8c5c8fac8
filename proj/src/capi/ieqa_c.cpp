#include "ieqa/ieqa.h"

#include <cmath>
#include <cstring>
#include <memory>
#include <string>

#include <json.hpp>

#include "app/commands.hpp"
#include "common/error.hpp"
#include "common/image.hpp"
#include "common/log.hpp"
#include "common/text.hpp"
#include "dataset/dataset.hpp"
#include "metrics/correlation.hpp"
#include "metrics/image_metrics.hpp"
#include "metrics/scorers.hpp"
#include "model/ieqa_model.hpp"
#include "rating/http_server.hpp"
#include "rating/service.hpp"
#include "subjective/subjective.hpp"

using namespace ieqa;

struct ieqa_caseset {
  dataset::CaseSet cs;
};

struct ieqa_model {
  model::IEQAModel m;
};

struct ieqa_scorer_registry {
  metrics::ScorerRegistry reg;
};

struct ieqa_result {
  app::CommandResult r;
};

struct ieqa_rating_server {
  rating::SystemClock clock;
  std::unique_ptr<rating::RatingService> service;
  std::unique_ptr<rating::HttpServer> http;
};

namespace {

thread_local std::string g_last_error;

ieqa_status fail(ieqa_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <class F>
ieqa_status guarded(F&& f) {
  try {
    g_last_error.clear();
    return f();
  } catch (const ParseError& e) {
    return fail(IEQA_ERR_PARSE, e.what());
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    for (const auto& d : e.details()) msg += "\n  " + d;
    return fail(IEQA_ERR_VALIDATION, msg);
  } catch (const DegenerateError& e) {
    return fail(IEQA_ERR_DEGENERATE, e.what());
  } catch (const IoError& e) {
    return fail(IEQA_ERR_IO, e.what());
  } catch (const rating::RatingError& e) {
    switch (e.code) {
      case rating::RatingError::Code::not_found: return fail(IEQA_ERR_NOT_FOUND, e.what());
      case rating::RatingError::Code::too_early: return fail(IEQA_ERR_TOO_EARLY, e.what());
      case rating::RatingError::Code::invalid: return fail(IEQA_ERR_VALIDATION, e.what());
      default: return fail(IEQA_ERR_CONFLICT, e.what());
    }
  } catch (const std::exception& e) {
    return fail(IEQA_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(IEQA_ERR_RUNTIME, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  auto* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.data(), s.size() + 1);
  return p;
}

std::vector<std::string> split_list(const char* s) {
  std::vector<std::string> out;
  if (!s) return out;
  for (auto part : text::split(s, ',')) {
    while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
    while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
    if (!part.empty()) out.emplace_back(part);
  }
  return out;
}

ieqa_status correlation(const double* p, const double* t, size_t n, double* out, double (*fn)(const metrics::PairedSeries&)) {
  if (!p || !t || !out) return fail(IEQA_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = fn(metrics::PairedSeries({p, n}, {t, n}));
    return IEQA_OK;
  });
}

Image wrap_rgb(const uint8_t* px, int w, int h) {
  if (!px || w <= 0 || h <= 0) throw ValidationError("image must be non-null with positive dimensions");
  Image img(w, h);
  std::memcpy(img.pixels.data(), px, img.pixels.size());
  return img;
}

ieqa_status image_metric(const uint8_t* a, const uint8_t* b, int w, int h, double* out,
                         double (*fn)(const Image&, const Image&)) {
  if (!out) return fail(IEQA_ERR_INVALID_ARGUMENT, "null output");
  return guarded([&] {
    *out = fn(wrap_rgb(a, w, h), wrap_rgb(b, w, h));
    return IEQA_OK;
  });
}

ieqa_status finish(app::CommandResult r, ieqa_result** result) {
  const int code = r.exit_code;
  if (code != app::kOk) g_last_error = r.summary;
  if (result) *result = new ieqa_result{std::move(r)};
  if (code == app::kOk) return IEQA_OK;
  return code == app::kValidation ? IEQA_ERR_VALIDATION : IEQA_ERR_RUNTIME;
}

app::TrainOptions train_options(const ieqa_train_options* o) {
  if (!o || !o->manifest || !o->mos || !o->out_dir) throw ValidationError("manifest, mos and out_dir are required");
  app::TrainOptions t;
  t.manifest = o->manifest;
  t.mos = o->mos;
  if (o->config) t.config = std::filesystem::path(o->config);
  t.out = o->out_dir;
  if (o->has_seed) t.seed = o->seed;
  if (o->k) t.k = o->k;
  t.variants = split_list(o->variants);
  return t;
}

}  // namespace

extern "C" {

const char* ieqa_version(void) { return "1.0.0"; }

const char* ieqa_status_string(ieqa_status s) {
  switch (s) {
    case IEQA_OK: return "ok";
    case IEQA_ERR_INVALID_ARGUMENT: return "invalid argument";
    case IEQA_ERR_VALIDATION: return "validation error";
    case IEQA_ERR_PARSE: return "parse error";
    case IEQA_ERR_DEGENERATE: return "degenerate input";
    case IEQA_ERR_IO: return "i/o error";
    case IEQA_ERR_NOT_FOUND: return "not found";
    case IEQA_ERR_CONFLICT: return "conflict";
    case IEQA_ERR_TOO_EARLY: return "too early";
    case IEQA_ERR_RUNTIME: return "runtime error";
  }
  return "unknown status";
}

const char* ieqa_last_error(void) { return g_last_error.c_str(); }

void ieqa_set_log_level(ieqa_log_level level) { log::set_level(static_cast<log::Level>(level)); }

void ieqa_string_free(char* s) { std::free(s); }

ieqa_status ieqa_srocc(const double* p, const double* t, size_t n, double* out) {
  return correlation(p, t, n, out, metrics::srocc);
}
ieqa_status ieqa_plcc(const double* p, const double* t, size_t n, double* out) {
  return correlation(p, t, n, out, metrics::plcc);
}
ieqa_status ieqa_krcc(const double* p, const double* t, size_t n, double* out) {
  return correlation(p, t, n, out, metrics::krcc);
}
ieqa_status ieqa_rmse(const double* p, const double* t, size_t n, double* out) {
  return correlation(p, t, n, out, metrics::rmse);
}

ieqa_status ieqa_mse(const uint8_t* a, const uint8_t* b, int w, int h, double* out) {
  return image_metric(a, b, w, h, out, metrics::mse_image);
}
ieqa_status ieqa_psnr(const uint8_t* a, const uint8_t* b, int w, int h, double* out) {
  return image_metric(a, b, w, h, out, metrics::psnr);
}
ieqa_status ieqa_ssim(const uint8_t* a, const uint8_t* b, int w, int h, double* out) {
  return image_metric(a, b, w, h, out, metrics::ssim);
}

ieqa_status ieqa_caseset_load(const char* path, ieqa_caseset** out) {
  if (!path || !out) return fail(IEQA_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = new ieqa_caseset{dataset::load_manifest(path)};
    return IEQA_OK;
  });
}

size_t ieqa_caseset_size(const ieqa_caseset* cs) { return cs ? cs->cs.cases.size() : 0; }

const char* ieqa_caseset_case_id(const ieqa_caseset* cs, size_t i) {
  return cs && i < cs->cs.cases.size() ? cs->cs.cases[i].case_id.c_str() : nullptr;
}

const char* ieqa_caseset_prompt(const ieqa_caseset* cs, size_t i) {
  return cs && i < cs->cs.cases.size() ? cs->cs.cases[i].prompt.c_str() : nullptr;
}

void ieqa_caseset_free(ieqa_caseset* cs) { delete cs; }

ieqa_status ieqa_mos_from_ratings(const char* ratings_csv, char** mos_csv) {
  if (!ratings_csv || !mos_csv) return fail(IEQA_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const auto res = subjective::run_pipeline(subjective::from_rows(subjective::parse_score_rows(ratings_csv)));
    for (const auto& w : res.warnings) log::warn(w);
    *mos_csv = dup_string(subjective::format_mos(res.mos));
    return IEQA_OK;
  });
}

ieqa_status ieqa_model_create(const char* config_json, uint64_t seed, ieqa_model** out) {
  if (!out) return fail(IEQA_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    model::ModelConfig cfg;
    if (config_json && *config_json) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(config_json);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model config: ") + e.what());
      }
      cfg = model::model_config_from_json(j);
    }
    *out = new ieqa_model{model::IEQAModel(cfg, seed)};
    return IEQA_OK;
  });
}

ieqa_status ieqa_model_load(const char* path, ieqa_model** out) {
  if (!path || !out) return fail(IEQA_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = new ieqa_model{model::load_checkpoint(path)};
    return IEQA_OK;
  });
}

ieqa_status ieqa_model_save(const ieqa_model* m, const char* path) {
  if (!m || !path) return fail(IEQA_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    model::save_checkpoint(m->m, path);
    return IEQA_OK;
  });
}

size_t ieqa_model_parameter_count(const ieqa_model* m) { return m ? m->m.parameter_count() : 0; }

ieqa_status ieqa_model_predict(const ieqa_model* m, const char* source_path, const char* edited_path,
                               const char* prompt, double* out) {
  if (!m || !source_path || !edited_path || !prompt || !out) return fail(IEQA_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const auto in = model::prepare_inputs(m->m.config(), image_io::read(source_path), image_io::read(edited_path), prompt);
    *out = m->m.predict(in);
    return IEQA_OK;
  });
}

void ieqa_model_free(ieqa_model* m) { delete m; }

ieqa_status ieqa_scorer_registry_builtin(ieqa_scorer_registry** out) {
  if (!out) return fail(IEQA_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = new ieqa_scorer_registry{metrics::builtin_registry()};
    return IEQA_OK;
  });
}

ieqa_status ieqa_scorer_registry_add(ieqa_scorer_registry* reg, const char* name, ieqa_scorer_kind kind,
                                     ieqa_scorer_fn fn, void* user_data) {
  if (!reg || !name || !fn) return fail(IEQA_ERR_INVALID_ARGUMENT, "null argument");
  if (kind < IEQA_SCORER_FULL_REFERENCE || kind > IEQA_SCORER_TEXT_IMAGE)
    return fail(IEQA_ERR_INVALID_ARGUMENT, "unknown scorer kind");
  return guarded([&] {
    metrics::ScorerHandle h;
    h.name = name;
    h.kind = static_cast<metrics::ScorerKind>(kind);
    h.backend = "c-callback";
    const std::string scorer_name = name;
    h.scorer = metrics::make_scorer([fn, user_data, scorer_name](const metrics::ScoringInput& in) {
      ieqa_scoring_input ci{in.edit.case_id.c_str(), in.edit.prompt.c_str(), in.source.pixels.data(),
                            in.source.width,         in.source.height,      in.edited.pixels.data(),
                            in.edited.width,         in.edited.height};
      double v = 0.0;
      if (fn(&ci, user_data, &v) != 0) throw metrics::BackendUnavailable("scorer '" + scorer_name + "' reported failure");
      return v;
    });
    reg->reg.add(std::move(h));
    return IEQA_OK;
  });
}

size_t ieqa_scorer_registry_size(const ieqa_scorer_registry* reg) { return reg ? reg->reg.size() : 0; }

void ieqa_scorer_registry_free(ieqa_scorer_registry* reg) { delete reg; }

int ieqa_result_exit_code(const ieqa_result* r) { return r ? r->r.exit_code : app::kRuntime; }
const char* ieqa_result_summary(const ieqa_result* r) { return r ? r->r.summary.c_str() : ""; }
size_t ieqa_result_artifact_count(const ieqa_result* r) { return r ? r->r.artifacts_written.size() : 0; }
const char* ieqa_result_artifact(const ieqa_result* r, size_t i) {
  return r && i < r->r.artifacts_written.size() ? r->r.artifacts_written[i].c_str() : nullptr;
}
void ieqa_result_free(ieqa_result* r) { delete r; }

ieqa_status ieqa_cmd_ingest(const char* manifest, const char* out_dir, ieqa_result** result) {
  if (!manifest || !out_dir) return fail(IEQA_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] { return finish(app::cmd_ingest(manifest, out_dir), result); });
}

ieqa_status ieqa_cmd_mos(const char* ratings, const char* out_dir, const char* dims, ieqa_result** result) {
  if (!ratings || !out_dir) return fail(IEQA_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    app::MosOptions o;
    o.ratings = ratings;
    o.out = out_dir;
    o.dims = split_list(dims);
    return finish(app::cmd_mos(o), result);
  });
}

ieqa_status ieqa_cmd_baselines(const char* manifest, const char* mos, const char* out_dir, const char* scorers,
                               const char* dimension, const ieqa_scorer_registry* registry, ieqa_result** result) {
  if (!manifest || !mos || !out_dir) return fail(IEQA_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    app::BaselineOptions o;
    o.manifest = manifest;
    o.mos = mos;
    o.out = out_dir;
    o.scorers = split_list(scorers);
    if (dimension && *dimension) o.dimension = dimension;
    return finish(app::cmd_baselines(o, registry ? &registry->reg : nullptr), result);
  });
}

ieqa_status ieqa_cmd_train(const ieqa_train_options* opts, ieqa_result** result) {
  return guarded([&] { return finish(app::cmd_train(train_options(opts)), result); });
}

ieqa_status ieqa_cmd_ablate(const ieqa_train_options* opts, ieqa_result** result) {
  return guarded([&] { return finish(app::cmd_ablate(train_options(opts)), result); });
}

ieqa_status ieqa_cmd_report(const char* const* report_paths, size_t n, const char* out_dir, ieqa_result** result) {
  if ((!report_paths && n) || !out_dir) return fail(IEQA_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    std::vector<std::filesystem::path> paths;
    for (size_t i = 0; i < n; ++i) {
      if (!report_paths[i]) throw ValidationError("null report path");
      paths.emplace_back(report_paths[i]);
    }
    return finish(app::cmd_report(paths, out_dir), result);
  });
}

ieqa_status ieqa_cmd_synth(const char* out_dir, int n_cases, int n_raters, int n_adversarial, uint64_t seed,
                           ieqa_result** result) {
  if (!out_dir) return fail(IEQA_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    app::SyntheticOptions o;
    o.n_cases = n_cases;
    o.n_raters = n_raters;
    o.n_adversarial = n_adversarial;
    o.seed = seed;
    return finish(app::cmd_synth(out_dir, o), result);
  });
}

ieqa_status ieqa_rating_server_start(const ieqa_rating_server_options* opts, int* bound_port,
                                     ieqa_rating_server** out) {
  if (!opts || !opts->manifest || !out) return fail(IEQA_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    auto s = std::make_unique<ieqa_rating_server>();
    rating::ServiceConfig cfg;
    for (auto& r : split_list(opts->raters)) cfg.raters.insert(r);
    std::optional<std::filesystem::path> journal;
    if (opts->journal && *opts->journal) journal = opts->journal;
    s->service = std::make_unique<rating::RatingService>(dataset::load_manifest(opts->manifest), s->clock, cfg, journal);
    s->http = std::make_unique<rating::HttpServer>(*s->service, opts->seed);
    const int port = s->http->bind(opts->host ? opts->host : "127.0.0.1", opts->port);
    s->http->start();
    if (bound_port) *bound_port = port;
    *out = s.release();
    return IEQA_OK;
  });
}

void ieqa_rating_server_stop(ieqa_rating_server* s) {
  if (s && s->http) s->http->stop();
}

void ieqa_rating_server_free(ieqa_rating_server* s) {
  if (!s) return;
  ieqa_rating_server_stop(s);
  delete s;
}

}  // extern "C"
