#include "metrics/scorers.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgproc.hpp>

#include "common/error.hpp"
#include "metrics/image_metrics.hpp"

namespace ieqa::metrics {

std::string_view to_string(ScorerKind k) {
  switch (k) {
    case ScorerKind::full_reference: return "full_reference";
    case ScorerKind::no_reference: return "no_reference";
    case ScorerKind::text_image: return "text_image";
  }
  return "";
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw ValidationError("embedding dimensions differ");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw DegenerateError("cosine of a zero embedding");
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

double embedding_cosine(const ScorerHandle& backend, const Image& a, const Image& b) {
  if (backend.kind != ScorerKind::full_reference || !backend.image_encoder)
    throw BackendUnavailable("scorer '" + backend.name + "' has no full-reference image encoder");
  const auto ea = backend.image_encoder->embed_image(a);
  const auto eb = backend.image_encoder->embed_image(b);
  return cosine(ea, eb);
}

double text_image_cosine(const ScorerHandle& backend, const Image& img, std::string_view prompt) {
  if (backend.kind != ScorerKind::text_image || !backend.text_encoder)
    throw BackendUnavailable("scorer '" + backend.name + "' has no text-image encoder");
  if (prompt.empty()) throw ValidationError("empty prompt");
  const auto ei = backend.text_encoder->embed_image(img);
  const auto et = backend.text_encoder->embed_text(prompt);
  return cosine(ei, et);
}

void ScorerRegistry::add(ScorerHandle handle) {
  if (handle.name.empty()) throw ValidationError("scorer name must not be empty");
  if (contains(handle.name)) throw ValidationError("duplicate scorer name '" + handle.name + "'");
  handles_.push_back(std::move(handle));
}

bool ScorerRegistry::contains(std::string_view name) const {
  return std::any_of(handles_.begin(), handles_.end(), [&](const ScorerHandle& h) { return h.name == name; });
}

const ScorerHandle& ScorerRegistry::get(std::string_view name) const {
  for (const auto& h : handles_)
    if (h.name == name) return h;
  throw ValidationError("unknown scorer '" + std::string(name) + "'");
}

namespace {

class FunctionScorer final : public Scorer {
 public:
  explicit FunctionScorer(std::function<double(const ScoringInput&)> fn) : fn_(std::move(fn)) {}
  double score(const ScoringInput& in) const override { return fn_(in); }

 private:
  std::function<double(const ScoringInput&)> fn_;
};

Image match_size(const Image& img, const Image& like) {
  if (img.width == like.width && img.height == like.height) return img;
  cv::Mat src(img.height, img.width, CV_8UC3, const_cast<std::uint8_t*>(img.pixels.data()));
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(like.width, like.height), 0, 0, cv::INTER_CUBIC);
  Image out(like.width, like.height);
  for (int y = 0; y < dst.rows; ++y) {
    const auto* row = dst.ptr<std::uint8_t>(y);
    std::copy(row, row + dst.cols * 3, out.pixels.begin() + static_cast<std::ptrdiff_t>(y) * dst.cols * 3);
  }
  return out;
}

ScorerHandle full_reference(std::string name, double (*metric)(const Image&, const Image&)) {
  ScorerHandle h;
  h.name = name;
  h.kind = ScorerKind::full_reference;
  h.backend = "builtin";
  h.scorer = make_scorer([metric](const ScoringInput& in) { return metric(in.source, match_size(in.edited, in.source)); });
  return h;
}

}  // namespace

std::shared_ptr<const Scorer> make_scorer(std::function<double(const ScoringInput&)> fn) {
  return std::make_shared<FunctionScorer>(std::move(fn));
}

std::vector<double> ColorHistogramEncoder::embed_image(const Image& img) const {
  if (img.empty()) throw ValidationError("empty image");
  std::vector<double> hist(64, 0.0);
  for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
    const int r = img.pixels[i] >> 6, g = img.pixels[i + 1] >> 6, b = img.pixels[i + 2] >> 6;
    hist[(r * 4 + g) * 4 + b] += 1.0;
  }
  double norm = 0.0;
  for (double v : hist) norm += v * v;
  norm = std::sqrt(norm);
  for (double& v : hist) v /= norm;
  return hist;
}

ScorerHandle make_embedding_scorer(std::string name, std::string backend, std::shared_ptr<const ImageEncoder> enc) {
  ScorerHandle h;
  h.name = std::move(name);
  h.kind = ScorerKind::full_reference;
  h.backend = std::move(backend);
  h.image_encoder = std::move(enc);
  auto encoder = h.image_encoder;
  h.scorer = make_scorer([encoder](const ScoringInput& in) {
    return cosine(encoder->embed_image(in.source), encoder->embed_image(in.edited));
  });
  return h;
}

ScorerHandle make_text_image_scorer(std::string name, std::string backend,
                                    std::shared_ptr<const TextImageEncoder> enc) {
  ScorerHandle h;
  h.name = std::move(name);
  h.kind = ScorerKind::text_image;
  h.backend = std::move(backend);
  h.text_encoder = enc;
  h.image_encoder = enc;
  h.scorer = make_scorer([enc](const ScoringInput& in) {
    if (in.edit.prompt.empty()) throw ValidationError("empty prompt");
    return cosine(enc->embed_image(in.edited), enc->embed_text(in.edit.prompt));
  });
  return h;
}

ScorerRegistry builtin_registry() {
  ScorerRegistry reg;
  reg.add(full_reference("psnr", &psnr));
  reg.add(full_reference("mse", &mse_image));
  reg.add(full_reference("ssim", &ssim));
  reg.add(make_embedding_scorer("hist_cosine", "color_histogram", std::make_shared<ColorHistogramEncoder>()));
  return reg;
}

std::vector<std::string> builtin_scorer_names() {
  std::vector<std::string> names;
  const auto reg = builtin_registry();
  for (const auto& h : reg.handles()) names.push_back(h.name);
  return names;
}

}  // namespace ieqa::metrics
