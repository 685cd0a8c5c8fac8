#include "metrics/image_metrics.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "common/error.hpp"

namespace ieqa::metrics {
namespace {

void require_same_shape(const Image& a, const Image& b) {
  if (a.empty() || b.empty()) throw ValidationError("empty image");
  if (a.width != b.width || a.height != b.height)
    throw ValidationError("image shapes differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                          std::to_string(b.width) + "x" + std::to_string(b.height));
}

std::array<double, kSsimWindow> gaussian_1d() {
  std::array<double, kSsimWindow> g{};
  const int half = kSsimWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double x = i - half;
    g[i] = std::exp(-(x * x) / (2.0 * kSsimSigma * kSsimSigma));
    sum += g[i];
  }
  for (auto& v : g) v /= sum;
  return g;
}

// 'valid' separable filtering: output is (w - 10) x (h - 10)
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h) {
  const auto g = gaussian_1d();
  const int ow = w - kSsimWindow + 1;
  const int oh = h - kSsimWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) acc += g[k] * src[static_cast<std::size_t>(y) * w + x + k];
      tmp[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) acc += g[k] * tmp[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  return out;
}

}  // namespace

double mse_image(const Image& a, const Image& b) {
  require_same_shape(a, b);
  double ss = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
    ss += d * d;
  }
  return ss / static_cast<double>(a.pixels.size());
}

double psnr_from_mse(double mse) {
  if (mse < 0) throw ValidationError("negative MSE");
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(kPeak * kPeak / mse);
}

double psnr(const Image& a, const Image& b) { return psnr_from_mse(mse_image(a, b)); }

std::array<double, kSsimWindow * kSsimWindow> ssim_window() {
  const auto g = gaussian_1d();
  std::array<double, kSsimWindow * kSsimWindow> w{};
  for (int y = 0; y < kSsimWindow; ++y)
    for (int x = 0; x < kSsimWindow; ++x) w[y * kSsimWindow + x] = g[y] * g[x];
  return w;
}

double ssim(const Image& a, const Image& b) {
  require_same_shape(a, b);
  if (a.width < kSsimWindow || a.height < kSsimWindow)
    throw ValidationError("SSIM needs images of at least 11x11 pixels");

  const auto x = luma(a);
  const auto y = luma(b);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const int w = a.width, h = a.height;
  const auto mu_x = filter_valid(x, w, h);
  const auto mu_y = filter_valid(y, w, h);
  const auto e_xx = filter_valid(xx, w, h);
  const auto e_yy = filter_valid(yy, w, h);
  const auto e_xy = filter_valid(xy, w, h);

  const double c1 = (kSsimK1 * kPeak) * (kSsimK1 * kPeak);
  const double c2 = (kSsimK2 * kPeak) * (kSsimK2 * kPeak);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double mx = mu_x[i], my = mu_y[i];
    const double vx = e_xx[i] - mx * mx;
    const double vy = e_yy[i] - my * my;
    const double cov = e_xy[i] - mx * my;
    total += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mu_x.size());
}

}  // namespace ieqa::metrics
