#pragma once

// 8-bit RGB images, OpenCV-backed decode/encode/resize, and conversion to
// the [0,1] NCHW tensors the network consumes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "sguie/errors.hpp"
#include "sguie/tensor.hpp"

namespace sguie {

/// Interleaved RGB, row-major, 3 bytes per pixel.
struct Rgb8Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;

  Rgb8Image() = default;
  Rgb8Image(std::size_t h, std::size_t w, std::uint8_t fill = 0) : height(h), width(w), pixels(h * w * 3, fill) {}

  bool empty() const { return pixels.empty(); }
  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * 3 + c]; }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * 3 + c]; }
  void set(std::size_t y, std::size_t x, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    std::uint8_t* p = &pixels[(y * width + x) * 3];
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }
  friend bool operator==(const Rgb8Image&, const Rgb8Image&) = default;
};

namespace detail {

inline cv::Mat as_mat(const Rgb8Image& img) {
  return cv::Mat(static_cast<int>(img.height), static_cast<int>(img.width), CV_8UC3,
                 const_cast<std::uint8_t*>(img.pixels.data()));
}

inline Rgb8Image from_mat(const cv::Mat& m) {
  cv::Mat c = m.isContinuous() ? m : m.clone();
  Rgb8Image img(static_cast<std::size_t>(c.rows), static_cast<std::size_t>(c.cols));
  std::copy(c.data, c.data + img.pixels.size(), img.pixels.begin());
  return img;
}

}  // namespace detail

/// Decodes PNG/JPEG/BMP into RGB. Grayscale files are expanded to 3 channels.
inline Rgb8Image read_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw FormatError("cannot decode image " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return detail::from_mat(rgb);
}

/// Encodes by extension (PNG recommended: lossless).
inline void write_image(const std::filesystem::path& path, const Rgb8Image& img) {
  if (img.empty()) throw FormatError("refusing to write empty image " + path.string());
  cv::Mat bgr;
  cv::cvtColor(detail::as_mat(img), bgr, cv::COLOR_RGB2BGR);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), bgr)) throw FormatError("cannot encode image " + path.string());
}

inline Rgb8Image resize_bilinear(const Rgb8Image& img, std::size_t h, std::size_t w) {
  cv::Mat out;
  cv::resize(detail::as_mat(img), out, cv::Size(static_cast<int>(w), static_cast<int>(h)), 0, 0, cv::INTER_LINEAR);
  return detail::from_mat(out);
}

inline Rgb8Image resize_nearest(const Rgb8Image& img, std::size_t h, std::size_t w) {
  cv::Mat out;
  cv::resize(detail::as_mat(img), out, cv::Size(static_cast<int>(w), static_cast<int>(h)), 0, 0, cv::INTER_NEAREST);
  return detail::from_mat(out);
}

inline Rgb8Image crop_image(const Rgb8Image& img, const Box& b) {
  if (b.y1 > img.height || b.x1 > img.width || b.y0 >= b.y1 || b.x0 >= b.x1) {
    throw BoundsError("crop_image: box outside " + std::to_string(img.height) + "x" + std::to_string(img.width));
  }
  Rgb8Image out(b.height(), b.width());
  for (std::size_t y = 0; y < out.height; ++y) {
    const auto* src = &img.pixels[((b.y0 + y) * img.width + b.x0) * 3];
    std::copy(src, src + out.width * 3, &out.pixels[y * out.width * 3]);
  }
  return out;
}

inline Rgb8Image flip_horizontal(const Rgb8Image& img) {
  Rgb8Image out(img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) out.at(y, img.width - 1 - x, c) = img.at(y, x, c);
    }
  }
  return out;
}

/// [1,3,H,W] tensor with values v/255.
template <typename T>
Tensor<T> to_tensor(const Rgb8Image& img) {
  const std::size_t plane = img.height * img.width;
  std::vector<T> v(3 * plane);
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) v[c * plane + i] = static_cast<T>(img.pixels[i * 3 + c]) / T(255);
  }
  return Tensor<T>(Shape{1, 3, img.height, img.width}, std::move(v));
}

/// Clamps to [0,1] and rounds to the nearest 8-bit level.
template <typename T>
Rgb8Image to_rgb8(const Tensor<T>& t) {
  const Shape& s = t.shape();
  if (s.n != 1 || s.c != 3) throw ShapeError("to_rgb8: expected [1,3,H,W], got " + s.str());
  Rgb8Image img(s.h, s.w);
  const std::size_t plane = s.plane();
  const auto d = t.data();
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = std::clamp(static_cast<double>(d[c * plane + i]), 0.0, 1.0);
      img.pixels[i * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  return img;
}

}  // namespace sguie
