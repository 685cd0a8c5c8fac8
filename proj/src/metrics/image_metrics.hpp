#pragma once

#include <array>

#include "common/image.hpp"

namespace ieqa::metrics {

inline constexpr double kPeak = 255.0;
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

/// Mean squared difference over every pixel and channel, in 8-bit units.
double mse_image(const Image& a, const Image& b);

/// 10 log10(255^2 / mse); +infinity when the images are identical.
double psnr(const Image& a, const Image& b);
double psnr_from_mse(double mse);

/// Normalized 11x11 Gaussian, sigma 1.5, row-major.
std::array<double, kSsimWindow * kSsimWindow> ssim_window();

/// Mean SSIM over every fully-contained window position, computed on Rec. 601
/// luma with K1 = 0.01, K2 = 0.03, L = 255.
double ssim(const Image& a, const Image& b);

}  // namespace ieqa::metrics
