// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "app/synthetic.hpp"
#include "common/text.hpp"
#include "metrics/baselines.hpp"
#include "metrics/correlation.hpp"
#include "metrics/image_metrics.hpp"
#include "model/frontend.hpp"
#include "model/ieqa_model.hpp"
#include "rating/service.hpp"
#include "subjective/subjective.hpp"
#include "support/fixtures.hpp"
#include "support/gradient_check.hpp"
#include "support/oracles.hpp"
#include "support/reference_model.hpp"
#include "training/losses.hpp"
#include "training/trainer.hpp"

using namespace ieqa;

namespace {

// Tolerances and limits.
constexpr double kCorrelationTol = 1e-9;
constexpr double kZScoreTol = 1e-9;
constexpr double kForwardTol = 1e-6;
constexpr double kAffineLossTol = 1e-12;
constexpr double kPsnrTol = 1e-3;
constexpr double kControlTol = 0.01;
constexpr double kOverfitSrocc = 0.95;
constexpr std::size_t kStubMaxParams = 2000;
constexpr double kCorrelationSeconds = 30;
constexpr double kSubjectiveSeconds = 10;
constexpr double kLossSeconds = 60;
constexpr double kCrossValidationSeconds = 300;

using Vec = std::vector<double>;

// Collects the first few failed checks of a criterion.
struct Checks {
  int failed = 0;
  std::string first;

  void operator()(bool ok, const std::string& what) {
    if (ok) return;
    if (failed++ < 3) first += (first.empty() ? "" : "; ") + what;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int failures = 0;

void criterion(const std::string& name, double limit_s, const std::function<std::string(Checks&)>& body) {
  Checks c;
  std::string note;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    note = body(c);
  } catch (const std::exception& e) {
    c(false, std::string("exception: ") + e.what());
  }
  const double s = seconds_since(t0);
  if (limit_s > 0) c(s < limit_s, "took " + std::to_string(s) + " s, limit " + std::to_string(limit_s));
  if (c.failed) ++failures;
  std::printf("%s  %-28s %6.2fs  %s\n", c.failed ? "FAIL" : "PASS", name.c_str(), s,
              c.failed ? c.first.c_str() : note.c_str());
  std::fflush(stdout);
}

bool constant(const Vec& v) { return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); }); }

Vec random_series(std::mt19937_64& rng, std::size_t n, int range) {
  std::uniform_int_distribution<int> d(0, range);
  Vec v(n);
  for (auto& x : v) x = d(rng) * 0.5;
  return v;
}

Image random_image(std::mt19937_64& rng, int w, int h) {
  Image img(w, h);
  std::uniform_int_distribution<int> d(0, 255);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(d(rng));
  return img;
}

std::string correlation(Checks& c) {
  using namespace metrics;
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<std::size_t> len(2, 50);
  double worst = 0;
  int pairs = 0, with_ties = 0;
  while (pairs < 1000) {
    const auto n = len(rng);
    // alternate tie-heavy and continuous series
    const bool ties = pairs % 2 == 0;
    auto draw = [&] {
      if (ties) return random_series(rng, n, 8);
      Vec v(n);
      std::normal_distribution<double> d;
      for (auto& x : v) x = d(rng);
      return v;
    };
    const auto a = draw(), b = draw();
    if (constant(a) || constant(b)) continue;
    ++pairs;
    with_ties += ties;
    const PairedSeries ps(a, b);
    for (const auto& [got, want] : {std::pair{srocc(ps), oracle::spearman(a, b)},
                                    {plcc(ps), oracle::pearson(a, b)},
                                    {krcc(ps), oracle::kendall_tau_b(a, b)},
                                    {rmse(ps), oracle::rmse(a, b)}})
      worst = std::max(worst, std::abs(got - want));
  }
  c(worst <= kCorrelationTol, "max deviation from brute force " + std::to_string(worst));

  std::uniform_real_distribution<double> coef(0.1, 3.0);
  int transforms = 0;
  while (transforms < 100) {
    const auto a = random_series(rng, 20, 10), b = random_series(rng, 20, 10);
    if (constant(a) || constant(b)) continue;
    ++transforms;
    const double k = coef(rng), s = coef(rng);
    Vec fa(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      switch (transforms % 3) {
        case 0: fa[i] = std::exp(k * a[i]); break;
        case 1: fa[i] = k * a[i] * a[i] * a[i] + s; break;
        default: fa[i] = std::atan(k * a[i]) + s * a[i]; break;
      }
    }
    c(srocc(PairedSeries(fa, b)) == srocc(PairedSeries(a, b)), "srocc changed under a monotone transform");
    c(krcc(PairedSeries(fa, b)) == krcc(PairedSeries(a, b)), "krcc changed under a monotone transform");
  }
  std::ostringstream os;
  os << pairs << " pairs (" << with_ties << " tie-heavy), max dev " << worst << ", " << transforms << " transforms exact";
  return os.str();
}

std::string subjective_pipeline(Checks& c) {
  using namespace subjective;
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> score(1, 10);
  int groups = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ScoreRow> rows;
    for (int r = 0; r < 5; ++r)
      for (int k = 0; k < 30; ++k)
        for (const auto& d : default_dimensions())
          rows.push_back({"r" + std::to_string(r), "c" + std::to_string(k), d, score(rng), 0});
    const auto zm = zscore_normalize(from_rows(rows));
    for (std::size_t r = 0; r < zm.raters.size(); ++r)
      for (std::size_t d = 0; d < zm.dims.size(); ++d) {
        if (zm.stat(r, d).degenerate) continue;
        Vec v;
        for (std::size_t k = 0; k < zm.cases.size(); ++k)
          if (zm.present(r, k, d)) v.push_back(zm.value(r, k, d));
        const double n = static_cast<double>(v.size()), mean = oracle::mean(v);
        double ss = 0;
        for (double x : v) ss += (x - mean) * (x - mean);
        c(std::abs(mean) < kZScoreTol * n, "z-score mean " + std::to_string(mean));
        c(std::abs(std::sqrt(ss / (n - 1)) - 1.0) < kZScoreTol, "z-score std off");
        ++groups;
      }
  }

  std::uniform_int_distribution<int> small(1, 4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ScoreRow> base, moved;
    const int a = 1 + trial % 2, b = (trial / 2) % 2;
    for (int k = 0; k < 12; ++k) {
      const int s = k == 0 ? 1 : k == 1 ? 4 : small(rng);
      base.push_back({"r", "c" + std::to_string(k), "overall_quality", s, 0});
      moved.push_back({"r", "c" + std::to_string(k), "overall_quality", a * s + b, 0});
    }
    const auto z1 = zscore_normalize(from_rows(base)), z2 = zscore_normalize(from_rows(moved));
    for (std::size_t k = 0; k < 12; ++k)
      c(std::abs(z1.value(0, k, 0) - z2.value(0, k, 0)) < kZScoreTol, "affine rescoring changed z-scores");
  }

  const std::string data = IEQA_TEST_DATA;
  const auto sm = load_scores(data + "/bt500_adversarial.csv");
  c(sm.raters().size() == 21 && sm.cases().size() == 100, "fixture is not 21 x 100");
  const auto res = bt500_screen(zscore_normalize(sm));
  c(res.rejected == std::vector<std::string>{"x_adv"}, "planted rater not the only rejection");
  c(res.kept.size() == 20, "consistent raters dropped");

  const auto expected = nlohmann::json::parse(text::read_file(data + "/bt500_expected.json"));
  int agreed = 0;
  for (const auto& [file, raters] : expected.items()) {
    const auto screened = bt500_screen(zscore_normalize(load_scores(data + "/" + file)));
    c(screened.report.size() == raters.size(), file + ": rater count");
    for (const auto& e : screened.report) {
      const auto& want = raters.at(e.rater_id);
      const bool same = e.p == want.at("p").get<std::size_t>() && e.q == want.at("q").get<std::size_t>() &&
                        e.n == want.at("n").get<std::size_t>() && e.rejected == want.at("rejected").get<bool>();
      c(same, file + ": " + e.rater_id + " differs from oracle script");
      agreed += same;
    }
  }
  return std::to_string(groups) + " rater/dim groups normalized, 100 affine checks, x_adv rejected, " +
         std::to_string(agreed) + " raters agree with oracle script";
}

std::string losses(Checks& c) {
  using namespace training;
  const LossConfig lc;
  c(total_loss(Vec{1, 2}, Vec{2, 1}, lc).value == 1.3, "anti-ordered pair is not exactly 1.3");
  std::mt19937_64 rng(2718);
  std::normal_distribution<double> d;
  for (int t = 0; t < 100; ++t) {
    Vec target(2 + t % 20), pred(target.size());
    for (auto& x : target) x = d(rng);
    const double a = std::exp(d(rng)), b = 3 * d(rng);
    for (std::size_t i = 0; i < target.size(); ++i) pred[i] = a * target[i] + b;
    c(std::abs(total_loss(pred, target, lc).value) < kAffineLossTol, "affine predictions have nonzero loss");
  }

  std::uniform_int_distribution<int> size(2, 6);
  const auto cfg = model::ModelConfig::stub();
  int batches = 0, skipped = 0;
  double worst = 0;
  while (batches < 100 && skipped < 100) {
    model::IEQAModel m(cfg, rng());
    const auto samples = gradcheck::random_samples(cfg, rng, size(rng));
    const auto res = gradcheck::check_batch(m, samples, lc, rng, 2);
    if (res.near_kink) {
      ++skipped;
      continue;
    }
    ++batches;
    worst = std::max(worst, res.worst);
  }
  c(batches == 100, "only " + std::to_string(batches) + " batches away from hinge kinks");
  c(worst < gradcheck::kRelTol, "worst relative gradient error " + std::to_string(worst));
  std::ostringstream os;
  os << "1.3 exact, affine loss 0, " << batches << " gradient batches worst rel err " << worst;
  return os.str();
}

std::vector<model::CaseInputs> random_inputs(const model::ModelConfig& cfg, std::mt19937_64& rng, int n) {
  const char* prompts[] = {"make the sky purple", "add a red hat to the dog", "replace the car with a horse"};
  std::vector<model::CaseInputs> out;
  for (int i = 0; i < n; ++i)
    out.push_back(model::prepare_inputs(cfg, random_image(rng, 12 + i, 10 + 2 * i),
                                        random_image(rng, 12 + i, 10 + 2 * i), prompts[i % 3]));
  return out;
}

std::string model_contracts(Checks& c) {
  using namespace model;
  const auto stub = ModelConfig::stub();
  const IEQAModel base(stub, 1);
  c(base.backbone_parameter_count() <= kStubMaxParams, "stub backbone too large");

  std::mt19937_64 rng(5);
  double worst = 0;
  const auto variants = training::all_variants();
  for (auto v : variants) {
    const auto cfg = training::configure_variant(v, stub).config;
    IEQAModel m(cfg, rng());
    const reference::Reference ref{m};
    for (const auto& in : random_inputs(cfg, rng, 4)) worst = std::max(worst, std::abs(m.predict(in) - ref(in)));

    int width = cfg.quality_dim;
    if (cfg.use_text_branch) width += cfg.align_dim;
    if (cfg.use_source_branch)
      width += cfg.fusion == FusionMode::concatenation ? cfg.st_out : cfg.embed_dim;
    else if (cfg.control_hidden > 0)
      width += cfg.st_out;
    nn::Tape t;
    const auto tr = m.build(t, random_inputs(cfg, rng, 1).front());
    c(cfg.fusion_width() == width && tr.fused.cols() == width, "fusion width mismatch");
  }
  c(worst <= kForwardTol, "forward deviates from reference by " + std::to_string(worst));

  IEQAModel m(stub, 21);
  std::vector<training::Sample> samples;
  std::normal_distribution<double> d;
  int i = 0;
  for (auto& in : random_inputs(stub, rng, 12)) samples.push_back({"c" + std::to_string(i++), in, d(rng)});
  training::TrainConfig tc;
  tc.stage1_epochs = 3;
  tc.stage2_epochs = 0;
  tc.batch_size = 4;
  tc.lr = 1e-2;
  std::vector<nn::Matrix> before;
  for (const auto& p : m.parameters()) before.push_back(p.value);
  const auto start = m.backbone_checksum();
  const auto hist = training::train(m, samples, tc, {});
  c(hist.backbone_checksum_after_stage1 == start && m.backbone_checksum() == start, "stage 1 changed the backbone");
  for (const auto& p : m.parameters())
    if (p.backbone) c(p.value == before[p.index], p.name + " moved in stage 1");

  const auto ctl = parameter_matched_control(stub);
  c(ctl.relative_delta <= kControlTol, "control parameter gap " + std::to_string(ctl.relative_delta));

  std::ostringstream os;
  os << base.backbone_parameter_count() << " backbone params, " << variants.size()
     << " variants, forward dev " << worst << ", control gap " << ctl.relative_delta * 100 << "%";
  return os.str();
}

std::vector<std::pair<std::string, double>> linear_targets(const app::SyntheticStudy& st, int grid) {
  const double w[model::kPatchFeatures] = {1.5, -0.8, 0.6, 2.0, 1.2, -1.0};
  std::vector<std::pair<std::string, double>> out;
  for (const auto& k : st.cases.cases) {
    const auto f = model::patch_features(image_io::read(st.cases.resolve(k.edited_image)), grid);
    double t = 0.0;
    for (int j = 0; j < model::kPatchFeatures; ++j) t += w[j] * f.col(j).mean();
    out.emplace_back(k.case_id, t);
  }
  return out;
}

std::string end_to_end(Checks& c) {
  testing::TempDir dir("accept");
  app::SyntheticOptions so;
  so.n_cases = 20;
  so.n_raters = 0;
  so.seed = 7;
  const auto st = app::write_synthetic_study(dir.path(), so);
  const auto mc = model::ModelConfig::stub();
  const auto samples = training::prepare_samples(mc, st.cases, linear_targets(st, mc.grid));

  training::TrainConfig tc;
  tc.seed = 7;
  c(tc.total_epochs() == 60, "default schedule is not 60 epochs");
  model::IEQAModel m(mc, tc.seed);
  training::train(m, samples, tc, {});
  const double train_srocc = training::evaluate(m, samples).metrics.srocc;
  c(train_srocc > kOverfitSrocc, "train SROCC " + std::to_string(train_srocc));

  training::CrossValidationOptions opts;
  opts.k = 2;
  const auto t0 = std::chrono::steady_clock::now();
  const auto r1 = training::run_cross_validation(samples, mc, tc, {}, opts);
  const double cv_s = seconds_since(t0);
  c(cv_s < kCrossValidationSeconds, "k=2 run took " + std::to_string(cv_s) + " s");
  c(!r1.partial && r1.folds.size() == 2, "cross-validation incomplete");
  const auto r2 = training::run_cross_validation(samples, mc, tc, {}, opts);
  c(training::report_json(r1).dump(2) == training::report_json(r2).dump(2), "report differs between runs");
  c(training::format_predictions(r1) == training::format_predictions(r2), "predictions differ between runs");
  c(training::format_fold_table(r1) == training::format_fold_table(r2), "fold table differs between runs");

  std::ostringstream os;
  os << "train SROCC " << train_srocc << ", k=2 in " << cv_s << " s, mean SROCC " << r1.mean.srocc
     << ", reruns identical";
  return os.str();
}

std::string baselines(Checks& c) {
  using namespace metrics;
  std::mt19937_64 rng(3);
  const auto img = random_image(rng, 32, 24);
  c(ssim(img, img) == 1.0, "ssim(a,a) = " + std::to_string(ssim(img, img)));
  const Image a(8, 8, 100), b(8, 8, 101);
  c(mse_image(a, b) == 1.0, "mse is not 1");
  c(std::abs(psnr(a, b) - 48.1308) <= kPsnrTol, "psnr at mse 1 = " + std::to_string(psnr(a, b)));
  for (int t = 0; t < 20; ++t) {
    const auto x = random_image(rng, 4, 4), y = random_image(rng, 4, 4);
    c(mse_image(x, y) == oracle::mse(x, y), "4x4 mse differs from double loop");
  }

  const int n = 12;
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back("c" + std::to_string(100 + i));
  subjective::MosTable mt(ids, {"overall_quality"});
  dataset::CaseSet cs;
  std::map<std::string, double> mos;
  std::normal_distribution<double> d;
  for (int i = 0; i < n; ++i) {
    dataset::EditCase k;
    k.case_id = ids[i];
    k.source_image = "src.png";
    k.edited_image = "edt.png";
    k.prompt = "make it brighter";
    cs.cases.push_back(k);
    mos[ids[i]] = d(rng);
    mt.set(i, 0, mos[ids[i]], 5);
  }
  ScorerRegistry reg;
  reg.add({"oracle", ScorerKind::full_reference, "mos lookup",
           make_scorer([mos](const ScoringInput& in) { return mos.at(in.edit.case_id); })});
  const ImageLoader loader = [](const std::filesystem::path&) { return Image(8, 8, 7); };
  const auto rep = run_baselines(cs, mt, reg, {}, loader);
  c(rep.rows.size() == 1, "one report row expected");
  const auto& r = rep.rows.front();
  const bool exact = r.srocc == 1.0 && r.plcc > 1.0 - 1e-12 && r.krcc == 1.0 && r.rmse == 0.0;
  c(exact, "oracle scorer gives (" + std::to_string(r.srocc) + "," + std::to_string(r.plcc) + "," +
               std::to_string(r.krcc) + "," + std::to_string(r.rmse) + ")");
  std::ostringstream os;
  os.precision(6);
  os << "ssim 1, psnr " << psnr(a, b) << " dB, 4x4 mse exact, oracle (" << r.srocc << "," << r.plcc << "," << r.krcc
     << "," << r.rmse << ")";
  return os.str();
}

std::string rating_protocol(Checks& c) {
  using namespace rating;
  constexpr std::int64_t sec = 1000, minute = 60 * sec;
  auto cases = [](int n) {
    dataset::CaseSet cs;
    for (int i = 0; i < n; ++i) {
      dataset::EditCase k;
      k.case_id = "case" + std::to_string(i);
      k.source_image = "s.png";
      k.edited_image = "e.png";
      k.prompt = "prompt";
      cs.cases.push_back(k);
    }
    return cs;
  };
  auto scores = [](const std::string& id) {
    Submission s;
    s.case_id = id;
    for (const auto& d : subjective::default_dimensions()) s.scores[d] = 6;
    return s;
  };

  {
    ManualClock clock(0);
    RatingService svc(cases(2), clock);
    const auto sid = svc.create_session("r", 0).session_id;
    const auto id = svc.next_sample(sid).payload->case_id;
    bool rejected = false;
    for (std::int64_t t : {0LL, 1000LL, 3000LL, 4999LL}) {
      clock.set(t);
      auto s = scores(id);
      s.client_dwell_ms = 60000;
      try {
        svc.submit_rating(sid, s);
        c(false, "submission accepted at " + std::to_string(t) + " ms");
      } catch (const RatingError& e) {
        rejected = e.code == RatingError::Code::too_early;
        c(rejected, "wrong rejection code");
      }
    }
    c(rejected && svc.records().empty(), "early submission recorded");
    clock.set(5 * sec);
    svc.submit_rating(sid, scores(id));
    c(svc.records().size() == 1, "submission at 5 s not recorded");
  }

  int breaks = 0;
  {
    ManualClock clock(0);
    RatingService svc(cases(300), clock);
    const auto sid = svc.create_session("r", 1).session_id;
    while (svc.session(sid).active_ms < 40 * minute) {
      const auto next = svc.next_sample(sid);
      if (next.kind == NextResult::Kind::on_break) {
        ++breaks;
        c(next.break_until - clock.now_ms() == 5 * minute, "break gate is not 5 minutes");
        clock.advance(5 * minute - 1);
        c(svc.next_sample(sid).kind == NextResult::Kind::on_break, "gate opened early");
        clock.advance(1);
        continue;
      }
      c(next.kind == NextResult::Kind::sample, "session ended early");
      if (next.kind != NextResult::Kind::sample) break;
      clock.advance(20 * sec);
      svc.submit_rating(sid, scores(next.payload->case_id));
    }
    c(breaks >= 2, "only " + std::to_string(breaks) + " breaks in 40 minutes");
  }

  const int raters = 4, n = 5;
  ManualClock clock(0);
  RatingService svc(cases(n), clock);
  for (int r = 0; r < raters; ++r) {
    const auto sid = svc.create_session("rater" + std::to_string(r), r).session_id;
    for (;;) {
      const auto next = svc.next_sample(sid);
      if (next.kind == NextResult::Kind::done) break;
      if (next.kind == NextResult::Kind::on_break) {
        clock.set(next.break_until);
        continue;
      }
      clock.advance(6 * sec);
      auto s = scores(next.payload->case_id);
      int k = 0;
      for (auto& [dim, v] : s.scores) v = 1 + (r + next.payload->position * (1 + k++)) % 10;
      svc.submit_rating(sid, s);
    }
  }
  const auto csv = svc.export_csv();
  const auto rows = subjective::parse_score_rows(csv);
  const std::size_t want = static_cast<std::size_t>(raters) * n * 3;
  c(rows.size() == want, "exported " + std::to_string(rows.size()) + " rows, want " + std::to_string(want));
  c(rows == svc.export_scores(), "CSV does not round-trip");
  const auto result = subjective::run_pipeline(subjective::from_rows(rows));
  c(result.mos.cases().size() == static_cast<std::size_t>(n), "MOS table misses cases");

  return "early submits rejected until 5 s, " + std::to_string(breaks) + " breaks in 40 min, " +
         std::to_string(rows.size()) + " rows round-trip into MOS";
}

}  // namespace

int main() {
  criterion("correlation metrics", kCorrelationSeconds, correlation);
  criterion("subjective pipeline", kSubjectiveSeconds, subjective_pipeline);
  criterion("losses", kLossSeconds, losses);
  criterion("model contracts", 0, model_contracts);
  criterion("end-to-end overfit and cv", 0, end_to_end);
  criterion("baseline metrics", 0, baselines);
  criterion("rating service protocol", 0, rating_protocol);
  std::printf("%s\n", failures ? "ACCEPTANCE FAILED" : "ACCEPTANCE PASSED");
  return failures ? 1 : 0;
}
