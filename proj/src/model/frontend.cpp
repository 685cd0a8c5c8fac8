#include "model/frontend.hpp"

#include <cctype>
#include <cmath>

#include "common/error.hpp"
#include "common/hash.hpp"

namespace ieqa::model {

nn::Matrix patch_features(const Image& img, int grid) {
  if (grid <= 0) throw ValidationError("grid must be positive");
  if (img.width < grid || img.height < grid)
    throw ValidationError("image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                          " is smaller than the token grid");
  const auto y = luma(img);
  const int w = img.width, h = img.height;
  auto Y = [&](int px, int py) { return y[static_cast<std::size_t>(py) * w + px]; };

  nn::Matrix out(grid * grid, kPatchFeatures);
  for (int gy = 0; gy < grid; ++gy) {
    const int y0 = gy * h / grid, y1 = (gy + 1) * h / grid;
    for (int gx = 0; gx < grid; ++gx) {
      const int x0 = gx * w / grid, x1 = (gx + 1) * w / grid;
      double rgb[3] = {0, 0, 0};
      double ysum = 0, ysq = 0, grad = 0, lap = 0;
      std::size_t n = 0, ng = 0, nl = 0;
      for (int py = y0; py < y1; ++py) {
        for (int px = x0; px < x1; ++px) {
          for (int c = 0; c < 3; ++c) rgb[c] += img.at(px, py, c);
          const double v = Y(px, py);
          ysum += v;
          ysq += v * v;
          ++n;
          if (px + 1 < w && py + 1 < h) {
            grad += std::abs(Y(px + 1, py) - v) + std::abs(Y(px, py + 1) - v);
            ++ng;
          }
          if (px > 0 && py > 0 && px + 1 < w && py + 1 < h) {
            lap += std::abs(Y(px - 1, py) + Y(px + 1, py) + Y(px, py - 1) + Y(px, py + 1) - 4 * v);
            ++nl;
          }
        }
      }
      const double dn = static_cast<double>(n);
      const double mean_y = ysum / dn;
      const double var_y = std::max(0.0, ysq / dn - mean_y * mean_y);
      const int row = gy * grid + gx;
      for (int c = 0; c < 3; ++c) out(row, c) = rgb[c] / dn / 255.0 - 0.5;
      out(row, 3) = std::sqrt(var_y) / 128.0;
      out(row, 4) = ng ? grad / static_cast<double>(ng) / 128.0 : 0.0;
      out(row, 5) = nl ? lap / static_cast<double>(nl) / 255.0 : 0.0;
    }
  }
  return out;
}

Tokenized tokenize(std::string_view prompt, int vocab, int max_tokens) {
  if (vocab <= 0 || max_tokens <= 0) throw ValidationError("tokenizer limits must be positive");
  Tokenized t;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    if (static_cast<int>(t.ids.size()) < max_tokens) {
      t.ids.push_back(static_cast<int>(fnv1a(word) % static_cast<std::uint64_t>(vocab)));
    } else {
      t.truncated = true;
    }
    word.clear();
  };
  for (unsigned char ch : prompt) {
    if (std::isalnum(ch) || ch >= 0x80) {
      word.push_back(static_cast<char>(ch < 0x80 ? std::tolower(ch) : ch));
    } else {
      flush();
    }
  }
  flush();
  if (t.ids.empty()) t.ids.push_back(0);
  return t;
}

}  // namespace ieqa::model
