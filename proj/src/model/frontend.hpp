#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "common/image.hpp"
#include "model/autograd.hpp"

namespace ieqa::model {

/// Per-cell descriptors produced for every image token: centered mean R, G, B,
/// luma spread, mean gradient magnitude, mean absolute Laplacian.
inline constexpr int kPatchFeatures = 6;

/// Splits the image into grid x grid cells and describes each one.
/// Result is (grid*grid) x kPatchFeatures, cells in row-major order.
nn::Matrix patch_features(const Image& img, int grid);

struct Tokenized {
  std::vector<int> ids;
  bool truncated = false;
};

/// Lowercases ASCII, splits on anything that is not a letter, digit or a
/// UTF-8 continuation/lead byte, hashes each word into [0, vocab). Keeps the
/// first `max_tokens` words. An input without words maps to token 0.
Tokenized tokenize(std::string_view prompt, int vocab, int max_tokens);

}  // namespace ieqa::model
