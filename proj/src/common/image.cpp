#include "common/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "common/error.hpp"
#include "common/log.hpp"

namespace ieqa {
namespace {

cv::Mat to_mat(const Image& img) {
  cv::Mat rgb(img.height, img.width, CV_8UC3, const_cast<std::uint8_t*>(img.pixels.data()));
  return rgb;
}

Image from_rgb_mat(const cv::Mat& rgb) {
  CV_Assert(rgb.type() == CV_8UC3);
  Image out(rgb.cols, rgb.rows);
  for (int y = 0; y < rgb.rows; ++y) {
    const auto* row = rgb.ptr<std::uint8_t>(y);
    std::copy(row, row + rgb.cols * 3, out.pixels.begin() + static_cast<std::ptrdiff_t>(y) * rgb.cols * 3);
  }
  return out;
}

}  // namespace

std::vector<double> luma(const Image& img) {
  std::vector<double> y(static_cast<std::size_t>(img.width) * img.height);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto* p = &img.pixels[i * 3];
    y[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  }
  return y;
}

namespace image_io {

Image read(const std::filesystem::path& path) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED | cv::IMREAD_ANYDEPTH);
  if (raw.empty()) throw IoError("cannot decode image: " + path.string());

  if (raw.depth() != CV_8U) {
    double scale = raw.depth() == CV_16U ? 1.0 / 257.0 : 255.0;
    if (raw.depth() == CV_16S || raw.depth() == CV_8S) scale = 1.0;
    raw.convertTo(raw, CV_MAKETYPE(CV_8U, raw.channels()), scale);
  }

  cv::Mat rgb;
  switch (raw.channels()) {
    case 1:
      cv::cvtColor(raw, rgb, cv::COLOR_GRAY2RGB);
      break;
    case 3:
      cv::cvtColor(raw, rgb, cv::COLOR_BGR2RGB);
      break;
    case 4:
      log::warn("dropping alpha channel of ", path.string());
      cv::cvtColor(raw, rgb, cv::COLOR_BGRA2RGB);
      break;
    default:
      throw IoError("unsupported channel count in " + path.string());
  }
  return from_rgb_mat(rgb);
}

void write(const Image& img, const std::filesystem::path& path) {
  cv::Mat bgr;
  cv::cvtColor(to_mat(img), bgr, cv::COLOR_RGB2BGR);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), bgr)) throw IoError("cannot write image: " + path.string());
}

bool is_decodable(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) return false;
  try {
    return !cv::imread(path.string(), cv::IMREAD_UNCHANGED).empty();
  } catch (const cv::Exception&) {
    return false;
  }
}

}  // namespace image_io

std::pair<int, int> shorter_side_dims(int width, int height, int target) {
  if (width <= 0 || height <= 0) throw ValidationError("image has a zero dimension");
  if (target <= 0) throw ValidationError("resize target must be positive");
  const bool landscape = width >= height;
  const long long shorter = landscape ? height : width;
  const long long longer = landscape ? width : height;
  // round-half-up of longer * target / shorter in exact integer arithmetic
  const long long scaled = (2 * longer * target + shorter) / (2 * shorter);
  return landscape ? std::pair<int, int>{static_cast<int>(scaled), target}
                   : std::pair<int, int>{target, static_cast<int>(scaled)};
}

Image resize_shorter_side(const Image& img, int target) {
  const auto [w, h] = shorter_side_dims(img.width, img.height, target);
  if (w == img.width && h == img.height) return img;
  cv::Mat out;
  cv::resize(to_mat(img), out, cv::Size(w, h), 0, 0, cv::INTER_CUBIC);
  return from_rgb_mat(out);
}

}  // namespace ieqa
