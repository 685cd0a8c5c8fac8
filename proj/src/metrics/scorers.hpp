#pragma once

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "common/image.hpp"
#include "dataset/dataset.hpp"

namespace ieqa::metrics {

enum class ScorerKind { full_reference, no_reference, text_image };

std::string_view to_string(ScorerKind k);

/// Thrown when a scorer's backend cannot serve the request (wrong kind,
/// missing encoder, failed external model).
class BackendUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ImageEncoder {
 public:
  virtual ~ImageEncoder() = default;
  virtual std::vector<double> embed_image(const Image& img) const = 0;
};

class TextImageEncoder : public ImageEncoder {
 public:
  virtual std::vector<double> embed_text(std::string_view prompt) const = 0;
};

/// Everything a scorer may look at for one case. Images are decoded once per
/// case and shared by every scorer.
struct ScoringInput {
  const dataset::EditCase& edit;
  const Image& source;
  const Image& edited;
};

class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double score(const ScoringInput& in) const = 0;
};

struct ScorerHandle {
  std::string name;
  ScorerKind kind = ScorerKind::full_reference;
  std::string backend;
  std::shared_ptr<const Scorer> scorer;
  std::shared_ptr<const ImageEncoder> image_encoder;
  std::shared_ptr<const TextImageEncoder> text_encoder;
};

double cosine(std::span<const double> a, std::span<const double> b);

/// Cosine between the backend's embeddings of two images.
double embedding_cosine(const ScorerHandle& backend, const Image& a, const Image& b);

/// Cosine between the backend's image embedding and prompt embedding.
double text_image_cosine(const ScorerHandle& backend, const Image& img, std::string_view prompt);

class ScorerRegistry {
 public:
  /// Throws ValidationError on a duplicate name.
  void add(ScorerHandle handle);
  const ScorerHandle& get(std::string_view name) const;
  bool contains(std::string_view name) const;
  const std::vector<ScorerHandle>& handles() const { return handles_; }
  std::size_t size() const { return handles_.size(); }

 private:
  std::vector<ScorerHandle> handles_;
};

/// Scorer built from a plain callable.
std::shared_ptr<const Scorer> make_scorer(std::function<double(const ScoringInput&)> fn);

/// Joint 4x4x4 RGB histogram, L2-normalized. Deterministic, no weights.
class ColorHistogramEncoder final : public ImageEncoder {
 public:
  std::vector<double> embed_image(const Image& img) const override;
};

/// Scorer over an image encoder: cosine(source, edited).
ScorerHandle make_embedding_scorer(std::string name, std::string backend, std::shared_ptr<const ImageEncoder> enc);
/// Scorer over a text-image encoder: cosine(edited, prompt).
ScorerHandle make_text_image_scorer(std::string name, std::string backend,
                                    std::shared_ptr<const TextImageEncoder> enc);

/// psnr, mse, ssim, hist_cosine. Full-reference built-ins compare source to
/// edited; the edited image is bicubically resampled to the source size when
/// the two differ.
ScorerRegistry builtin_registry();
std::vector<std::string> builtin_scorer_names();

}  // namespace ieqa::metrics
