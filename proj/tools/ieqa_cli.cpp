// Command-line front end. Talks to the library only through the C API.
#include <csignal>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ieqa/ieqa.h"

namespace {

int exit_code_for(ieqa_status s) {
  switch (s) {
    case IEQA_OK: return 0;
    case IEQA_ERR_INVALID_ARGUMENT:
    case IEQA_ERR_VALIDATION:
    case IEQA_ERR_PARSE:
    case IEQA_ERR_DEGENERATE: return 1;
    default: return 2;
  }
}

// Prints the command summary and maps the status to the process exit code.
int report(ieqa_status s, ieqa_result* r) {
  const char* summary = r ? ieqa_result_summary(r) : "";
  if (s == IEQA_OK) {
    std::cout << summary;
    if (*summary && summary[std::char_traits<char>::length(summary) - 1] != '\n') std::cout << '\n';
  } else {
    std::cerr << "error: " << (r ? summary : ieqa_last_error()) << '\n';
  }
  const int code = r ? ieqa_result_exit_code(r) : exit_code_for(s);
  ieqa_result_free(r);
  return code;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edited-image quality assessment toolkit"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "debug, info, warn, error or off")
      ->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}));

  std::string manifest, ratings, mos, config, out, dimension = "overall_quality", journal, host = "127.0.0.1";
  std::vector<std::string> scorers, variants, dims, reports, raters;
  std::uint64_t seed = 0;
  int k = 0, port = 8080, n_cases = 20, n_raters = 25, n_adversarial = 0;

  auto* ingest = app.add_subcommand("ingest", "validate a manifest and write a resized case store");
  ingest->add_option("--manifest", manifest, "manifest (.jsonl)")->required();
  ingest->add_option("--out", out, "run directory")->required();

  auto* mos_cmd = app.add_subcommand("mos", "z-score, screen and aggregate ratings into MOS");
  mos_cmd->add_option("--ratings", ratings, "ratings CSV")->required();
  mos_cmd->add_option("--out", out, "run directory")->required();
  mos_cmd->add_option("--dims", dims, "dimensions to keep (default: all)")->delimiter(',');

  auto* base = app.add_subcommand("baselines", "correlate baseline scorers with MOS");
  base->add_option("--manifest", manifest, "case store manifest")->required();
  base->add_option("--mos", mos, "MOS CSV")->required();
  base->add_option("--out", out, "run directory")->required();
  base->add_option("--scorers", scorers, "scorer names (default: all)")->delimiter(',');
  base->add_option("--dimension", dimension, "MOS dimension to correlate against");

  auto add_train_flags = [&](CLI::App* c) {
    c->add_option("--manifest", manifest, "case store manifest")->required();
    c->add_option("--mos", mos, "MOS CSV")->required();
    c->add_option("--config", config, "run config (JSON)");
    c->add_option("--out", out, "run directory")->required();
    c->add_option("--seed", seed, "seed for every random stream");
    c->add_option("--k", k, "number of folds")->check(CLI::Range(2, 1000000));
  };
  auto* train = app.add_subcommand("train", "k-fold cross-validation of the model");
  add_train_flags(train);
  auto* ablate = app.add_subcommand("ablate", "cross-validate ablation variants");
  add_train_flags(ablate);
  ablate->add_option("--variant", variants, "variant names or 'all'")->delimiter(',')->required();

  auto* rep = app.add_subcommand("report", "compare stored evaluation reports");
  rep->add_option("reports", reports, "report.json files")->required();
  rep->add_option("--out", out, "run directory")->required();

  auto* serve = app.add_subcommand("serve", "run the rating service");
  serve->add_option("--manifest", manifest, "case store manifest")->required();
  serve->add_option("--journal", journal, "append-only journal (replayed on start)");
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "port (0 picks one)");
  serve->add_option("--seed", seed, "default session seed");
  serve->add_option("--raters", raters, "registered rater ids (default: open)")->delimiter(',');

  auto* synth = app.add_subcommand("synth", "write a small synthetic study");
  synth->add_option("--out", out, "output directory")->required();
  synth->add_option("--cases", n_cases, "number of cases")->check(CLI::NonNegativeNumber);
  synth->add_option("--raters", n_raters, "number of honest raters")->check(CLI::NonNegativeNumber);
  synth->add_option("--adversarial", n_adversarial, "number of adversarial raters")->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", seed, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  const ieqa_log_level levels[] = {IEQA_LOG_DEBUG, IEQA_LOG_INFO, IEQA_LOG_WARN, IEQA_LOG_ERROR, IEQA_LOG_OFF};
  const char* names[] = {"debug", "info", "warn", "error", "off"};
  for (int i = 0; i < 5; ++i)
    if (log_level == names[i]) ieqa_set_log_level(levels[i]);

  ieqa_result* r = nullptr;
  ieqa_status st = IEQA_OK;
  if (*ingest) {
    st = ieqa_cmd_ingest(manifest.c_str(), out.c_str(), &r);
    return report(st, r);
  }
  if (*mos_cmd) {
    st = ieqa_cmd_mos(ratings.c_str(), out.c_str(), join(dims).c_str(), &r);
    return report(st, r);
  }
  if (*base) {
    const auto s = join(scorers);
    st = ieqa_cmd_baselines(manifest.c_str(), mos.c_str(), out.c_str(), s.empty() ? nullptr : s.c_str(),
                            dimension.c_str(), nullptr, &r);
    return report(st, r);
  }
  if (*train || *ablate) {
    const auto v = join(variants);
    ieqa_train_options o{};
    o.manifest = manifest.c_str();
    o.mos = mos.c_str();
    o.config = config.empty() ? nullptr : config.c_str();
    o.out_dir = out.c_str();
    o.has_seed = (*train ? train : ablate)->count("--seed") > 0;
    o.seed = seed;
    o.k = k;
    o.variants = v.c_str();
    st = *train ? ieqa_cmd_train(&o, &r) : ieqa_cmd_ablate(&o, &r);
    return report(st, r);
  }
  if (*rep) {
    std::vector<const char*> paths;
    for (const auto& p : reports) paths.push_back(p.c_str());
    st = ieqa_cmd_report(paths.data(), paths.size(), out.c_str(), &r);
    return report(st, r);
  }
  if (*synth) {
    st = ieqa_cmd_synth(out.c_str(), n_cases, n_raters, n_adversarial, seed, &r);
    return report(st, r);
  }
  if (*serve) {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);  // inherited by the server threads

    const auto rater_list = join(raters);
    ieqa_rating_server_options o{};
    o.manifest = manifest.c_str();
    o.journal = journal.empty() ? nullptr : journal.c_str();
    o.host = host.c_str();
    o.port = port;
    o.seed = seed;
    o.raters = rater_list.c_str();
    ieqa_rating_server* srv = nullptr;
    int bound = 0;
    const auto s = ieqa_rating_server_start(&o, &bound, &srv);
    if (s != IEQA_OK) {
      std::cerr << "error: " << ieqa_last_error() << '\n';
      return exit_code_for(s);
    }
    std::cout << "listening on http://" << host << ':' << bound << std::endl;
    int sig = 0;
    sigwait(&set, &sig);
    ieqa_rating_server_free(srv);
    return 0;
  }
  return 1;
}
