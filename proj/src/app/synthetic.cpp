#include "app/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/image.hpp"
#include "common/text.hpp"

namespace ieqa::app {

namespace {

constexpr const char* kStyle[] = {"make it look like a watercolor painting", "turn the scene into winter",
                                  "apply a warm sunset tone", "render it in black and white"};
constexpr const char* kSemantic[] = {"replace the ball with an apple", "add a small red boat",
                                     "remove the car on the left", "put a hat on the person"};
constexpr const char* kStructural[] = {"make the building taller", "move the cat to the right",
                                       "enlarge the tree in the middle", "rotate the sign slightly"};

std::uint8_t clamp_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

Image make_source(int w, int h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double base[3] = {40 + 170 * u(rng), 40 + 170 * u(rng), 40 + 170 * u(rng)};
  const double grad[3] = {80 * u(rng) - 40, 80 * u(rng) - 40, 80 * u(rng) - 40};
  const int rx0 = static_cast<int>(u(rng) * w * 0.5), ry0 = static_cast<int>(u(rng) * h * 0.5);
  const int rx1 = rx0 + w / 4 + static_cast<int>(u(rng) * w * 0.25);
  const int ry1 = ry0 + h / 4 + static_cast<int>(u(rng) * h * 0.25);
  const double rect[3] = {255 * u(rng), 255 * u(rng), 255 * u(rng)};
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool in_rect = x >= rx0 && x < rx1 && y >= ry0 && y < ry1;
      for (int c = 0; c < 3; ++c) {
        const double v = in_rect ? rect[c] : base[c] + grad[c] * (static_cast<double>(x) / w - 0.5) +
                                                 grad[(c + 1) % 3] * (static_cast<double>(y) / h - 0.5);
        img.at(x, y, c) = clamp_u8(v);
      }
    }
  return img;
}

Image make_edit(const Image& src, double shift, double noise, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Image out(src.width, src.height);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = clamp_u8(src.at(x, y, c) + shift + noise * n(rng));
  return out;
}

}  // namespace

SyntheticStudy write_synthetic_study(const std::filesystem::path& dir, const SyntheticOptions& opts) {
  if (opts.n_cases < 0 || opts.n_raters < 0 || opts.n_adversarial < 0 || opts.n_methods < 1 || opts.width < 1 ||
      opts.height < 1)
    throw ValidationError("invalid synthetic study options");
  std::filesystem::create_directories(dir / "images");

  SyntheticStudy study;
  auto& cs = study.cases;
  cs.name = "synthetic";
  cs.version = "1";
  cs.created = "seed-" + std::to_string(opts.seed);
  cs.base_dir = dir;
  for (int m = 0; m < opts.n_methods; ++m) {
    dataset::MethodInfo mi;
    mi.name = "method_" + std::string(1, static_cast<char>('a' + m % 26)) + (m >= 26 ? std::to_string(m) : "");
    mi.zero_shot = m % 2 == 0;
    mi.paradigm = m % 3 == 2 ? dataset::Paradigm::description_based : dataset::Paradigm::instruction_based;
    mi.backbone_version = "synthetic";
    cs.methods.push_back(mi);
  }

  std::mt19937_64 rng(mix_seed(opts.seed, "synthetic/cases"));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const char* tags[] = {"landscape", "object", "animal", "human"};
  for (int i = 0; i < opts.n_cases; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "case%04d", i);
    const auto src = make_source(opts.width, opts.height, rng);
    const double shift = 120.0 * u(rng) - 60.0;
    const double noise = 40.0 * u(rng);
    const auto edited = make_edit(src, shift, noise, rng);
    const std::string src_name = std::string("images/") + id + "_source.png";
    const std::string edit_name = std::string("images/") + id + "_edited.png";
    image_io::write(src, dir / src_name);
    image_io::write(edited, dir / edit_name);

    dataset::EditCase c;
    c.case_id = id;
    c.source_image = src_name;
    c.edited_image = edit_name;
    c.prompt_type = static_cast<dataset::PromptType>(i % 3);
    const auto& pool = i % 3 == 0 ? kStyle : i % 3 == 1 ? kSemantic : kStructural;
    c.prompt = pool[(i / 3) % 4];
    c.editing_method = cs.methods[static_cast<std::size_t>(i % opts.n_methods)].name;
    c.content_tags = {tags[i % 4]};
    cs.cases.push_back(std::move(c));
    study.latent_quality.push_back(std::clamp(1.0 - 0.5 * std::abs(shift) / 60.0 - 0.5 * noise / 40.0, 0.0, 1.0));
  }
  study.manifest_path = dir / "manifest.jsonl";
  dataset::write_manifest(cs, study.manifest_path);

  const auto& dims = subjective::default_dimensions();
  std::mt19937_64 rr(mix_seed(opts.seed, "synthetic/raters"));
  std::normal_distribution<double> n01(0.0, 1.0);
  const int total_raters = opts.n_raters + opts.n_adversarial;
  for (int r = 0; r < total_raters; ++r) {
    char rid[32];
    std::snprintf(rid, sizeof rid, "r%03d", r);
    const bool adversarial = r >= opts.n_raters;
    const double offset = 0.8 * n01(rr);
    const double scale = 0.8 + 0.4 * u(rr);
    for (int i = 0; i < opts.n_cases; ++i)
      for (std::size_t d = 0; d < dims.size(); ++d) {
        const double q = study.latent_quality[static_cast<std::size_t>(i)];
        const double honest = 5.5 + scale * 9.0 * (q - 0.5) + offset + opts.rater_noise * n01(rr);
        long s = std::clamp(std::lround(honest), 1L, 10L);
        if (adversarial) s = 11 - s;
        study.ratings.push_back({rid, cs.cases[static_cast<std::size_t>(i)].case_id, dims[d], static_cast<int>(s),
                                 1700000000000LL + r * 1000000LL + i * 10000LL + static_cast<long long>(d)});
      }
  }
  study.ratings_path = dir / "ratings.csv";
  text::write_file(study.ratings_path.string(), subjective::format_score_rows(study.ratings));
  return study;
}

}  // namespace ieqa::app
