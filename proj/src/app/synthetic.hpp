#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dataset/dataset.hpp"
#include "subjective/subjective.hpp"

namespace ieqa::app {

struct SyntheticOptions {
  int n_cases = 20;
  int n_raters = 25;
  int n_adversarial = 0;  // raters who score 11 - honest score
  int n_methods = 5;
  int width = 64;
  int height = 48;
  double rater_noise = 0.7;
  std::uint64_t seed = 0;
};

struct SyntheticStudy {
  dataset::CaseSet cases;
  std::vector<subjective::ScoreRow> ratings;
  std::vector<double> latent_quality;  // per case, in [0, 1], case order
  std::filesystem::path manifest_path;
  std::filesystem::path ratings_path;
};

/// Writes a small deterministic study: source/edited PNGs, a manifest and a
/// ratings CSV. Edits are brightness shifts plus additive noise; the latent
/// quality drops with both, and every honest rater scores it with a personal
/// offset and scale plus noise.
SyntheticStudy write_synthetic_study(const std::filesystem::path& dir, const SyntheticOptions& opts);

}  // namespace ieqa::app
