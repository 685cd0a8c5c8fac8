#include <doctest.h>

#include <random>

#include <opencv2/imgcodecs.hpp>

#include "common/error.hpp"
#include "common/image.hpp"
#include "common/text.hpp"
#include "dataset/dataset.hpp"
#include "support/fixtures.hpp"

using namespace ieqa;
using namespace ieqa::dataset;

namespace {

Image pattern(int w, int h, int seed = 0) {
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<std::uint8_t>((x * 7 + y * 13 + c * 50 + seed) % 256);
  return img;
}

EditCase make_case(const std::string& id, const std::string& img = "img.png") {
  EditCase c;
  c.case_id = id;
  c.source_image = img;
  c.edited_image = img;
  c.prompt = "make the sky purple";
  c.prompt_type = PromptType::style;
  c.editing_method = "m0";
  c.content_tags = {"landscape"};
  return c;
}

CaseSet make_set(const testing::TempDir& dir, std::vector<EditCase> cases) {
  image_io::write(pattern(8, 6), dir / "img.png");
  CaseSet cs;
  cs.name = "demo";
  cs.version = "0.1";
  cs.created = "2024-01-01";
  cs.base_dir = dir.path();
  cs.cases = std::move(cases);
  return cs;
}

// Round-half-up of longer * target / shorter without floating point.
int oracle_long_side(long longer, long shorter, long target) {
  const long q = longer * target / shorter;
  const long r = longer * target % shorter;
  return static_cast<int>(2 * r >= shorter ? q + 1 : q);
}

}  // namespace

TEST_CASE("resize_shorter_side examples") {
  CHECK(shorter_side_dims(512, 512, 512) == std::pair{512, 512});
  CHECK(shorter_side_dims(2048, 1024, 512) == std::pair{1024, 512});
  CHECK(shorter_side_dims(1024, 768, 512) == std::pair{683, 512});
  CHECK(shorter_side_dims(768, 1024, 512) == std::pair{512, 683});
  const auto out = resize_shorter_side(pattern(1024, 768));
  CHECK(out.width == 683);
  CHECK(out.height == 512);
  const auto same = pattern(512, 512);
  CHECK(resize_shorter_side(same) == same);
  CHECK_THROWS_AS(resize_shorter_side(Image{}), ValidationError);
}

TEST_CASE("resize dimensions match the rational round-half-up oracle") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> side(1, 5000);
  for (int i = 0; i < 20000; ++i) {
    const int w = side(rng), h = side(rng);
    const auto [ow, oh] = shorter_side_dims(w, h, 512);
    if (w >= h) {
      CHECK(oh == 512);
      CHECK(ow == oracle_long_side(w, h, 512));
    } else {
      CHECK(ow == 512);
      CHECK(oh == oracle_long_side(h, w, 512));
    }
  }
}

TEST_CASE("resize is idempotent and keeps the aspect ratio within a pixel") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> side(16, 900);
  for (int i = 0; i < 12; ++i) {
    const int w = side(rng), h = side(rng);
    const auto once = resize_shorter_side(pattern(w, h, i));
    CHECK(resize_shorter_side(once) == once);
    const double exact_long = static_cast<double>(std::max(w, h)) * 512.0 / std::min(w, h);
    CHECK(std::abs(std::max(once.width, once.height) - exact_long) <= 1.0);
  }
}

TEST_CASE("image io: alpha dropped, gray expanded") {
  testing::TempDir dir("io");
  const auto rgb = pattern(5, 4);
  image_io::write(rgb, dir / "a.png");
  CHECK(image_io::read(dir / "a.png") == rgb);
  CHECK(image_io::is_decodable(dir / "a.png"));
  text::write_file((dir / "bad.png").string(), "not an image");
  CHECK_FALSE(image_io::is_decodable(dir / "bad.png"));
  CHECK_THROWS(image_io::read(dir / "bad.png"));
  CHECK_THROWS(image_io::read(dir / "missing.png"));

  cv::Mat bgra(4, 5, CV_8UC4, cv::Scalar(10, 20, 30, 128));
  cv::imwrite((dir / "alpha.png").string(), bgra);
  const auto dropped = image_io::read(dir / "alpha.png");
  CHECK(dropped.width == 5);
  CHECK(dropped.height == 4);
  CHECK(dropped.at(0, 0, 0) == 30);  // stored RGB
  CHECK(dropped.at(0, 0, 2) == 10);

  cv::Mat gray(3, 2, CV_8UC1, cv::Scalar(77));
  cv::imwrite((dir / "gray.png").string(), gray);
  const auto expanded = image_io::read(dir / "gray.png");
  CHECK(expanded.at(1, 2, 0) == 77);
  CHECK(expanded.at(1, 2, 1) == 77);
  CHECK(expanded.at(1, 2, 2) == 77);
}

TEST_CASE("validate_caseset examples") {
  testing::TempDir dir("val");
  auto cs = make_set(dir, {make_case("a"), make_case("b")});
  CHECK(validate_caseset(cs).empty());

  cs.cases[1].prompt.clear();
  CHECK(validate_caseset(cs) == std::vector<Violation>{{"b", "empty prompt"}});

  cs.cases[1] = make_case("b", "missing.png");
  CHECK(validate_caseset(cs) == std::vector<Violation>{{"b", "unresolvable image"}});

  cs.cases[1] = make_case("a");
  CHECK(validate_caseset(cs) == std::vector<Violation>{{"a", "duplicate case_id"}});
}

TEST_CASE("manifest: empty, duplicate ids, 301 x 5 cases") {
  testing::TempDir dir("man");
  SUBCASE("zero cases keeps metadata") {
    auto cs = make_set(dir, {});
    write_manifest(cs, dir / "m.jsonl");
    const auto back = load_manifest(dir / "m.jsonl");
    CHECK(back.cases.empty());
    CHECK(back.name == "demo");
    CHECK(back.version == "0.1");
    CHECK(back.created == "2024-01-01");
  }
  SUBCASE("duplicate c1 is named in the error") {
    auto cs = make_set(dir, {make_case("c1"), make_case("c1")});
    write_manifest(cs, dir / "m.jsonl");
    try {
      load_manifest(dir / "m.jsonl");
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("c1") != std::string::npos);
      REQUIRE(e.details().size() == 1);
      CHECK(e.details()[0].find("c1") != std::string::npos);
    }
  }
  SUBCASE("301 sources x 5 methods") {
    std::vector<EditCase> cases;
    for (int s = 0; s < 301; ++s)
      for (int m = 0; m < 5; ++m) {
        auto c = make_case("s" + std::to_string(s) + "_m" + std::to_string(m));
        c.editing_method = "m" + std::to_string(m);
        cases.push_back(c);
      }
    auto cs = make_set(dir, cases);
    for (int m = 0; m < 5; ++m) cs.methods.push_back({"m" + std::to_string(m), m % 2 == 0, Paradigm::instruction_based, "v1"});
    write_manifest(cs, dir / "m.jsonl");
    const auto back = load_manifest(dir / "m.jsonl");
    CHECK(back.cases.size() == 1505);
    CHECK(back.methods.size() == 5);
    CHECK(std::is_sorted(back.cases.begin(), back.cases.end(),
                         [](const EditCase& a, const EditCase& b) { return a.case_id < b.case_id; }));
  }
}

TEST_CASE("manifest round trip is field-by-field equal") {
  testing::TempDir dir("rt");
  auto a = make_case("zeta");
  a.prompt = "füge einen Hut hinzu, \"bitte\"";
  a.prompt_type = PromptType::semantic;
  a.content_tags = {"human", "action:add"};
  auto b = make_case("alpha");
  b.prompt_type = PromptType::structural;
  b.content_tags.clear();
  auto cs = make_set(dir, {a, b});
  cs.methods = {{"m0", true, Paradigm::description_based, "sd-1.5"}};
  cs.canonicalize();
  write_manifest(cs, dir / "m.jsonl");
  const auto back = load_manifest(dir / "m.jsonl");
  CHECK(back == cs);
  CHECK(serialize_manifest(back) == serialize_manifest(cs));
}

TEST_CASE("manifest parse errors") {
  testing::TempDir dir("pe");
  make_set(dir, {});
  const std::string header = R"({"name":"d","version":"1","created":"x"})";
  const std::string rec =
      R"({"case_id":"a","source_image":"img.png","edited_image":"img.png","prompt":"p","prompt_type":"style","editing_method":"m","content_tags":[]})";
  CHECK_NOTHROW(parse_manifest(header + "\n" + rec + "\n", dir.path()));
  CHECK_THROWS_AS(parse_manifest("", dir.path()), ParseError);
  CHECK_THROWS_AS(parse_manifest(header + "\n{not json}\n", dir.path()), ParseError);
  auto bad_type = rec;
  bad_type.replace(bad_type.find("\"style\""), 7, "\"color\"");
  CHECK_THROWS_AS(parse_manifest(header + "\n" + bad_type + "\n", dir.path()), ParseError);
  auto extra = rec;
  extra.insert(extra.size() - 1, R"(,"rating":5)");
  CHECK_THROWS_AS(parse_manifest(header + "\n" + extra + "\n", dir.path()), ParseError);
  auto missing = rec;
  missing.replace(missing.find(R"("prompt":"p",)"), 13, "");
  CHECK_THROWS_AS(parse_manifest(header + "\n" + missing + "\n", dir.path()), ParseError);
}
