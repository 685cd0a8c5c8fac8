#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "common/error.hpp"
#include "metrics/baselines.hpp"
#include "metrics/correlation.hpp"
#include "metrics/image_metrics.hpp"
#include "metrics/scorers.hpp"
#include "support/oracles.hpp"

using namespace ieqa;
using namespace ieqa::metrics;

namespace {

using Vec = std::vector<double>;

double sr(const Vec& p, const Vec& t) { return srocc(PairedSeries(p, t)); }
double pl(const Vec& p, const Vec& t) { return plcc(PairedSeries(p, t)); }
double kr(const Vec& p, const Vec& t) { return krcc(PairedSeries(p, t)); }
double rm(const Vec& p, const Vec& t) { return rmse(PairedSeries(p, t)); }

bool constant(const Vec& v) {
  for (double x : v)
    if (x != v.front()) return false;
  return true;
}

// Small integer range so ties are common.
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

}  // namespace

TEST_CASE("correlation examples") {
  CHECK(sr({1, 2, 3, 4}, {2, 5, 7, 9}) == doctest::Approx(1.0));
  CHECK(sr({4, 3, 2, 1}, {1, 2, 3, 4}) == doctest::Approx(-1.0));
  CHECK(sr({1, 2, 2, 3}, {1, 3, 2, 4}) == doctest::Approx(4.5 / std::sqrt(4.5 * 5)).epsilon(1e-12));
  CHECK(sr({1, 2, 2, 3}, {1, 3, 2, 4}) == doctest::Approx(0.9487).epsilon(1e-4));

  CHECK(pl({3, 5, 7}, {1, 2, 3}) == doctest::Approx(1.0));
  CHECK(pl({-1, -2, -3}, {1, 2, 3}) == doctest::Approx(-1.0));
  CHECK(pl({1, 2, 4}, {1, 2, 3}) == doctest::Approx(3.0 / std::sqrt(42.0 / 9.0 * 2.0)).epsilon(1e-12));
  CHECK(pl({1, 2, 4}, {1, 2, 3}) == doctest::Approx(0.9820).epsilon(1e-4));

  CHECK(kr({1, 2, 3}, {1, 2, 3}) == doctest::Approx(1.0));
  CHECK(kr({1, 2, 3}, {1, 3, 2}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  // one tied pair in pred: (2 - 0) / sqrt(2 * 3)
  CHECK(kr({1, 1, 2}, {1, 2, 3}) == doctest::Approx(2.0 / std::sqrt(6.0)).epsilon(1e-12));
  CHECK(kr({1, 1, 2}, {1, 2, 3}) == doctest::Approx(oracle::kendall_tau_b({1, 1, 2}, {1, 2, 3})).epsilon(1e-12));

  CHECK(rm({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(rm({1.5, 2.5, 3.5}, {1, 2, 3}) == doctest::Approx(0.5));
  CHECK(rm({0, 0}, {3, 4}) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-12));
}

TEST_CASE("paired series validation") {
  const Vec one{1.0}, two{1.0, 2.0}, three{1.0, 2.0, 3.0};
  CHECK_THROWS_AS(PairedSeries(one, one), ValidationError);
  CHECK_THROWS_AS(PairedSeries(two, three), ValidationError);
  const Vec nan{1.0, std::numeric_limits<double>::quiet_NaN()};
  CHECK_THROWS_AS(PairedSeries(nan, two), ValidationError);
  const Vec flat{2.0, 2.0, 2.0};
  CHECK_THROWS_AS(sr(flat, three), DegenerateError);
  CHECK_THROWS_AS(pl(three, flat), DegenerateError);
  CHECK_THROWS_AS(kr(flat, three), DegenerateError);
  CHECK(rm(flat, three) == doctest::Approx(std::sqrt(2.0 / 3.0)));
}

TEST_CASE("correlations agree with brute-force definitions on random series") {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<std::size_t> len(2, 50);
  int checked = 0;
  while (checked < 1000) {
    const auto n = len(rng);
    const auto a = random_series(rng, n, 12), b = random_series(rng, n, 12);
    if (constant(a) || constant(b)) continue;
    ++checked;
    CHECK(sr(a, b) == doctest::Approx(oracle::spearman(a, b)).epsilon(1e-9));
    CHECK(pl(a, b) == doctest::Approx(oracle::pearson(a, b)).epsilon(1e-9));
    CHECK(kr(a, b) == doctest::Approx(oracle::kendall_tau_b(a, b)).epsilon(1e-9));
    CHECK(rm(a, b) == doctest::Approx(oracle::rmse(a, b)).epsilon(1e-9));
    // symmetry
    CHECK(sr(a, b) == doctest::Approx(sr(b, a)).epsilon(1e-12));
    CHECK(kr(a, b) == doctest::Approx(kr(b, a)).epsilon(1e-12));
    CHECK(rm(a, b) == rm(b, a));
  }
}

TEST_CASE("average ranks match exhaustive enumeration for short series") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + trial % 6;  // 2..7
    const auto v = random_series(rng, n, 4);
    const auto got = average_ranks(v);
    const auto want = oracle::exhaustive_ranks(v);
    for (std::size_t i = 0; i < n; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));

    const auto w = random_series(rng, n, 4);
    if (constant(v) || constant(w)) continue;
    CHECK(sr(v, w) == doctest::Approx(oracle::pearson(want, oracle::exhaustive_ranks(w))).epsilon(1e-12));
    CHECK(kr(v, w) == doctest::Approx(oracle::kendall_tau_b(v, w)).epsilon(1e-12));
  }
}

TEST_CASE("rank metrics are invariant under strictly increasing transforms") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> coef(0.1, 3.0);
  int checked = 0;
  while (checked < 100) {
    const auto a = random_series(rng, 20, 10), b = random_series(rng, 20, 10);
    if (constant(a) || constant(b)) continue;
    ++checked;
    const double k = coef(rng), s = coef(rng);
    Vec fa(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      switch (checked % 3) {
        case 0: fa[i] = std::exp(k * a[i]); break;
        case 1: fa[i] = k * a[i] * a[i] * a[i] + s; break;
        default: fa[i] = std::atan(k * a[i]) + s * a[i]; break;
      }
    }
    CHECK(sr(fa, b) == sr(a, b));
    CHECK(kr(fa, b) == kr(a, b));
    // positive affine leaves plcc unchanged, negative scale flips the sign
    Vec aff(a.size()), neg(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      aff[i] = k * a[i] + s;
      neg[i] = -k * a[i] + s;
    }
    CHECK(pl(aff, b) == doctest::Approx(pl(a, b)).epsilon(1e-12));
    CHECK(pl(neg, b) == doctest::Approx(-pl(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("mse and psnr") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto a = random_image(rng, 4, 4), b = random_image(rng, 4, 4);
    CHECK(mse_image(a, b) == oracle::mse(a, b));
  }
  Image a(8, 8, 100), b(8, 8, 101);
  CHECK(mse_image(a, a) == 0.0);
  CHECK(mse_image(a, b) == 1.0);
  CHECK(psnr(a, b) == doctest::Approx(48.1308).epsilon(1e-3 / 48.1308));
  CHECK(std::abs(psnr_from_mse(1.0) - 10.0 * std::log10(65025.0)) < 1e-12);
  CHECK(psnr(a, a) == std::numeric_limits<double>::infinity());
  CHECK(psnr_from_mse(65025.0) == doctest::Approx(0.0));
  double prev = std::numeric_limits<double>::infinity();
  for (double m = 0.01; m < 1e5; m *= 1.7) {
    const double p = psnr_from_mse(m);
    CHECK(p < prev);
    prev = p;
  }
  CHECK_THROWS_AS(mse_image(Image(4, 4), Image(4, 5)), ValidationError);
  CHECK_THROWS_AS(psnr(Image(4, 4), Image(5, 4)), ValidationError);
}

TEST_CASE("ssim") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 5; ++t) {
    const auto a = random_image(rng, 11 + t * 3, 11 + t * 5);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  }
  // constant images: variances vanish, only the luminance term remains
  for (int c : {1, 10, 80}) {
    Image a(16, 16, 90), b(16, 16, static_cast<std::uint8_t>(90 + c));
    const double m1 = 90.0, m2 = 90.0 + c, C1 = (0.01 * 255) * (0.01 * 255);
    CHECK(ssim(a, b) == doctest::Approx((2 * m1 * m2 + C1) / (m1 * m1 + m2 * m2 + C1)).epsilon(1e-9));
  }
  for (int t = 0; t < 3; ++t) {
    const auto a = random_image(rng, 20 + t, 17 + 2 * t);
    auto b = a;
    std::normal_distribution<double> noise(0.0, 20.0);
    for (auto& p : b.pixels) p = static_cast<std::uint8_t>(std::clamp(p + noise(rng), 0.0, 255.0));
    CHECK(std::abs(ssim(a, b) - oracle::ssim(a, b)) < 1e-6);
    CHECK(std::abs(ssim(a, random_image(rng, a.width, a.height)) - 0.0) < 0.2);
  }
  CHECK_THROWS_AS(ssim(Image(10, 20), Image(10, 20)), ValidationError);
  CHECK_THROWS_AS(ssim(Image(20, 20), Image(20, 21)), ValidationError);
}

namespace {

// Maps any image to a fixed vector chosen by its first pixel; lets tests build
// orthogonal or scaled embeddings on demand.
class TableEncoder final : public TextImageEncoder {
 public:
  std::map<int, std::vector<double>> images;
  std::map<std::string, std::vector<double>, std::less<>> texts;
  std::vector<double> embed_image(const Image& img) const override { return images.at(img.pixels.at(0)); }
  std::vector<double> embed_text(std::string_view p) const override { return texts.find(p)->second; }
};

}  // namespace

TEST_CASE("embedding and text-image cosine with stub encoders") {
  auto enc = std::make_shared<TableEncoder>();
  enc->images = {{1, {1, 0, 0}}, {2, {0, 3, 0}}, {3, {2, 0, 0}}, {4, {0.5, 0.5, 0}}};
  enc->texts = {{"same", {1, 0, 0}}, {"other", {0, 0, 1}}};
  const auto fr = make_embedding_scorer("v", "stub", enc);
  const auto ti = make_text_image_scorer("t", "stub", enc);
  const Image i1(2, 2, 1), i2(2, 2, 2), i3(2, 2, 3), i4(2, 2, 4);

  CHECK(embedding_cosine(fr, i1, i1) == doctest::Approx(1.0));
  CHECK(embedding_cosine(fr, i1, i2) == 0.0);
  CHECK(embedding_cosine(fr, i3, i4) == doctest::Approx(embedding_cosine(fr, i1, i4)));
  CHECK(embedding_cosine(fr, i1, i4) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(text_image_cosine(ti, i1, "same") == doctest::Approx(1.0));
  CHECK(text_image_cosine(ti, i1, "other") == 0.0);
  CHECK(text_image_cosine(ti, i3, "same") == doctest::Approx(1.0));

  CHECK_THROWS_AS(text_image_cosine(ti, i1, ""), ValidationError);
  CHECK_THROWS_AS(embedding_cosine(ti, i1, i1), BackendUnavailable);
  CHECK_THROWS_AS(text_image_cosine(fr, i1, "same"), BackendUnavailable);
  ScorerHandle bare{"x", ScorerKind::full_reference, "none", nullptr, nullptr, nullptr};
  CHECK_THROWS_AS(embedding_cosine(bare, i1, i1), BackendUnavailable);

  const Vec z{0, 0}, u{1, 0};
  CHECK_THROWS_AS(cosine(z, u), DegenerateError);
  const Vec a{1, 2, 3}, b{2, 4, 6.5};
  for (double k : {0.01, 1.0, 250.0}) {
    Vec ka = a;
    for (auto& x : ka) x *= k;
    CHECK(cosine(ka, b) == doctest::Approx(cosine(a, b)).epsilon(1e-14));
  }
}

TEST_CASE("registry rejects duplicates and builtins are deterministic") {
  auto reg = builtin_registry();
  CHECK(reg.size() == builtin_scorer_names().size());
  for (const auto& n : builtin_scorer_names()) CHECK(reg.contains(n));
  CHECK_THROWS_AS(reg.add(ScorerHandle{"psnr", ScorerKind::full_reference, "dup", make_scorer([](auto&) { return 0.0; })}),
                  ValidationError);
  ColorHistogramEncoder enc;
  std::mt19937_64 rng(3);
  const auto img = random_image(rng, 16, 16);
  const auto e = enc.embed_image(img);
  CHECK(e.size() == 64);
  double n2 = 0;
  for (double x : e) n2 += x * x;
  CHECK(n2 == doctest::Approx(1.0));
  CHECK(enc.embed_image(img) == e);
}

namespace {

struct BaselineFixture {
  dataset::CaseSet cs;
  subjective::MosTable mt;
  std::map<std::string, double> mos;

  explicit BaselineFixture(int n) : mt(ids(n), {"overall_quality"}) {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> d(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
      const auto id = mt.cases()[i];
      dataset::EditCase c;
      c.case_id = id;
      // pixel value of the source identifies the case to the loader
      c.source_image = "src/" + std::to_string(i);
      c.edited_image = "edt/" + std::to_string(i);
      c.prompt = "make it brighter";
      cs.cases.push_back(c);
      mos[id] = d(rng);
      mt.set(i, 0, mos[id], 5);
    }
  }

  static std::vector<std::string> ids(int n) {
    std::vector<std::string> v;
    for (int i = 0; i < n; ++i) v.push_back("c" + std::string(i < 10 ? "0" : "") + std::to_string(i));
    return v;
  }

  ImageLoader loader() const {
    return [](const std::filesystem::path& p) {
      const int idx = std::stoi(p.filename().string());
      const bool edited = p.parent_path().filename() == "edt";
      Image img(12, 12, static_cast<std::uint8_t>(idx));
      img.pixels[1] = edited ? 1 : 0;
      return img;
    };
  }
};

double case_index(const ScoringInput& in) { return in.source.pixels[0]; }

}  // namespace

TEST_CASE("baselines: oracle, constant and failing scorers") {
  BaselineFixture fx(10);
  ScorerRegistry reg;
  auto mos = fx.mos;
  reg.add({"oracle", ScorerKind::full_reference, "test",
           make_scorer([mos](const ScoringInput& in) { return mos.at(in.edit.case_id); })});
  reg.add({"constant", ScorerKind::no_reference, "test", make_scorer([](const ScoringInput&) { return 0.5; })});
  reg.add({"flaky", ScorerKind::full_reference, "test", make_scorer([mos](const ScoringInput& in) {
             if (case_index(in) == 3) throw std::runtime_error("backend crashed");
             if (case_index(in) == 7) return std::numeric_limits<double>::quiet_NaN();
             return mos.at(in.edit.case_id);
           })});
  const auto rep = run_baselines(fx.cs, fx.mt, reg, {}, fx.loader());
  REQUIRE(rep.rows.size() == 3);

  const auto& o = rep.rows[0];
  CHECK_FALSE(o.degenerate);
  CHECK(o.srocc == doctest::Approx(1.0));
  CHECK(o.plcc == doctest::Approx(1.0));
  CHECK(o.krcc == doctest::Approx(1.0));
  CHECK(o.rmse == 0.0);
  CHECK(o.n_cases == 10);

  CHECK(rep.rows[1].degenerate);
  CHECK_FALSE(rep.rows[1].error.empty());

  CHECK_FALSE(rep.rows[2].degenerate);
  CHECK(rep.rows[2].n_cases == 8);
  REQUIRE(rep.failures.size() == 2);
  CHECK(rep.failures[0].case_id == "c03");
  CHECK(rep.failures[1].case_id == "c07");

  const auto text = format_report(rep);
  CHECK(text.find("constant,,,,,,10,degenerate\n") != std::string::npos);
  CHECK(text.rfind(std::string(kReportHeader) + "\n", 0) == 0);
}

TEST_CASE("baselines: report rows match recomputation from the score dump") {
  BaselineFixture fx(10);
  auto reg = builtin_registry();
  ScorerRegistry three;
  three.add(reg.get("psnr"));
  three.add(reg.get("mse"));
  auto mos = fx.mos;
  three.add({"noisy", ScorerKind::no_reference, "test", make_scorer([mos](const ScoringInput& in) {
               return mos.at(in.edit.case_id) + std::sin(7.0 * case_index(in));
             })});
  // vary the edited image so full-reference scorers are not constant
  auto loader = [](const std::filesystem::path& p) {
    const int idx = std::stoi(p.filename().string());
    Image img(12, 12, 128);
    if (p.parent_path().filename() == "edt")
      for (std::size_t i = 0; i < img.pixels.size(); i += 1 + (idx * 5) % 9) img.pixels[i] += 3 + idx;
    return img;
  };
  const auto rep = run_baselines(fx.cs, fx.mt, three, {}, loader);
  REQUIRE(rep.rows.size() == 3);
  REQUIRE(rep.scores.size() == 30);

  // rescaled target uses the column's own min/max mapped onto [0, 10]
  double lo = 1e300, hi = -1e300;
  for (auto& [_, v] : fx.mos) lo = std::min(lo, v), hi = std::max(hi, v);

  for (const auto& row : rep.rows) {
    REQUIRE_FALSE(row.degenerate);
    Vec pred, target, target10;
    for (const auto& s : rep.scores)
      if (s.scorer == row.scorer) {
        pred.push_back(s.score);
        target.push_back(fx.mos.at(s.case_id));
        target10.push_back((target.back() - lo) / (hi - lo) * 10.0);
      }
    REQUIRE(pred.size() == 10);
    CHECK(row.srocc == doctest::Approx(oracle::spearman(pred, target)).epsilon(1e-12));
    CHECK(row.plcc == doctest::Approx(oracle::pearson(pred, target)).epsilon(1e-12));
    CHECK(row.krcc == doctest::Approx(oracle::kendall_tau_b(pred, target)).epsilon(1e-12));
    CHECK(row.rmse == doctest::Approx(oracle::rmse(pred, target)).epsilon(1e-12));
    CHECK(row.rmse_rescaled == doctest::Approx(oracle::rmse(pred, target10)).epsilon(1e-12));
  }
  const auto dump = format_score_dump(rep);
  CHECK(std::count(dump.begin(), dump.end(), '\n') == 31);
}

TEST_CASE("baselines require MOS for every case") {
  BaselineFixture fx(4);
  fx.mt.set(2, 0, std::nullopt, 0);
  auto reg = builtin_registry();
  CHECK_THROWS_AS(run_baselines(fx.cs, fx.mt, reg, {}, fx.loader()), ValidationError);
  BaselineOptions bad;
  bad.dimension = "nope";
  CHECK_THROWS_AS(run_baselines(fx.cs, fx.mt, reg, bad, fx.loader()), ValidationError);
}
