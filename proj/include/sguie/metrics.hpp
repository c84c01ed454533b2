#pragma once

// Full-reference (MSE, PSNR, SSIM), no-reference (UIQM, UCIQE) and color
// accuracy (CIEDE2000, reproduction angular error) metrics. Every metric
// works on the 8-bit scale: values in [0, 255], double precision.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "sguie/errors.hpp"
#include "sguie/image.hpp"
#include "sguie/tensor.hpp"

namespace sguie {

/// Interleaved RGB in double precision on the [0, 255] scale.
struct MetricImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> rgb;

  MetricImage() = default;
  MetricImage(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), rgb(h * w * 3, fill) {}

  double& at(std::size_t y, std::size_t x, std::size_t c) { return rgb[(y * width + x) * 3 + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c) const { return rgb[(y * width + x) * 3 + c]; }
  std::size_t pixels() const { return height * width; }
};

inline MetricImage to_metric(const Rgb8Image& img) {
  MetricImage m(img.height, img.width);
  std::copy(img.pixels.begin(), img.pixels.end(), m.rgb.begin());
  return m;
}

/// [1,3,H,W] tensor in [0,1], scaled by 255 without quantization.
template <typename T>
MetricImage to_metric(const Tensor<T>& t) {
  const Shape& s = t.shape();
  if (s.n != 1 || s.c != 3) throw ShapeError("to_metric: expected [1,3,H,W], got " + s.str());
  MetricImage m(s.h, s.w);
  const auto d = t.data();
  const std::size_t plane = s.plane();
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) m.rgb[i * 3 + c] = 255.0 * static_cast<double>(d[c * plane + i]);
  }
  return m;
}

namespace detail {

inline void require_same(const MetricImage& a, const MetricImage& b, const char* what) {
  if (a.height != b.height || a.width != b.width) {
    throw ShapeError(std::string(what) + ": image sizes differ (" + std::to_string(a.height) + "x" +
                     std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" + std::to_string(b.width) + ")");
  }
}

/// Rec.601 luma as a CV_64F matrix.
inline cv::Mat luma(const MetricImage& img) {
  cv::Mat y(static_cast<int>(img.height), static_cast<int>(img.width), CV_64F);
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    y.at<double>(static_cast<int>(i)) = 0.299 * img.rgb[i * 3] + 0.587 * img.rgb[i * 3 + 1] + 0.114 * img.rgb[i * 3 + 2];
  }
  return y;
}

inline cv::Mat channel(const MetricImage& img, std::size_t c) {
  cv::Mat m(static_cast<int>(img.height), static_cast<int>(img.width), CV_64F);
  for (std::size_t i = 0; i < img.pixels(); ++i) m.at<double>(static_cast<int>(i)) = img.rgb[i * 3 + c];
  return m;
}

}  // namespace detail

// ---------------------------------------------------------------- MSE / PSNR

inline constexpr double kPsnrCap = 99.0;

inline double mse(const MetricImage& a, const MetricImage& b) {
  detail::require_same(a, b, "mse");
  if (a.rgb.empty()) throw ShapeError("mse: empty image");
  double s = 0.0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) {
    const double d = a.rgb[i] - b.rgb[i];
    s += d * d;
  }
  return s / static_cast<double>(a.rgb.size());
}

/// 10 log10(255^2 / MSE), capped at 99 dB where MSE < 255^2 * 10^-9.9.
inline double psnr_from_mse(double m) {
  if (m < 255.0 * 255.0 * std::pow(10.0, -kPsnrCap / 10.0)) return kPsnrCap;
  return 10.0 * std::log10(255.0 * 255.0 / m);
}

inline double psnr(const MetricImage& a, const MetricImage& b) { return psnr_from_mse(mse(a, b)); }

// ---------------------------------------------------------------- SSIM

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double range = 255.0;
};

/// Normalized 1-D Gaussian profile; the 2-D window is its outer product.
inline std::vector<double> gaussian_profile(int size, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(size));
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - (size - 1) / 2.0;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += g[static_cast<std::size_t>(i)];
  }
  for (auto& v : g) v /= sum;
  return g;
}

/// Mean SSIM of the luma planes over every window position fully inside the
/// image.
inline double ssim(const MetricImage& a, const MetricImage& b, const SsimOptions& opt = {}) {
  detail::require_same(a, b, "ssim");
  if (a.height < static_cast<std::size_t>(opt.window) || a.width < static_cast<std::size_t>(opt.window)) {
    throw ShapeError("ssim: image " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                     " is smaller than the " + std::to_string(opt.window) + "x" + std::to_string(opt.window) + " window");
  }
  const cv::Mat x = detail::luma(a);
  const cv::Mat y = detail::luma(b);
  const std::vector<double> g1 = gaussian_profile(opt.window, opt.sigma);
  const cv::Mat kernel(1, opt.window, CV_64F, const_cast<double*>(g1.data()));
  const int half = opt.window / 2;
  const cv::Rect valid(half, half, x.cols - 2 * half, x.rows - 2 * half);
  auto filter = [&](const cv::Mat& m) {
    cv::Mat out;
    cv::sepFilter2D(m, out, CV_64F, kernel, kernel, cv::Point(-1, -1), 0.0, cv::BORDER_REFLECT);
    return cv::Mat(out, valid).clone();
  };
  const cv::Mat mx = filter(x), my = filter(y);
  const cv::Mat sxx = filter(x.mul(x)) - mx.mul(mx);
  const cv::Mat syy = filter(y.mul(y)) - my.mul(my);
  const cv::Mat sxy = filter(x.mul(y)) - mx.mul(my);
  const double c1 = (opt.k1 * opt.range) * (opt.k1 * opt.range);
  const double c2 = (opt.k2 * opt.range) * (opt.k2 * opt.range);
  double total = 0.0;
  for (int r = 0; r < mx.rows; ++r) {
    for (int c = 0; c < mx.cols; ++c) {
      const double ux = mx.at<double>(r, c), uy = my.at<double>(r, c);
      // Operands in a fixed order keep ssim(a, b) == ssim(b, a) bit-exact
      // even when the compiler fuses multiply-adds.
      const double lo = std::min(ux, uy), hi = std::max(ux, uy);
      const double num = (2 * ux * uy + c1) * (2 * sxy.at<double>(r, c) + c2);
      const double den = (lo * lo + hi * hi + c1) * (sxx.at<double>(r, c) + syy.at<double>(r, c) + c2);
      total += num / den;
    }
  }
  return total / static_cast<double>(mx.rows * mx.cols);
}

// ---------------------------------------------------------------- color

struct Lab {
  double L = 0.0, a = 0.0, b = 0.0;
};

/// sRGB (8-bit scale) to CIELab, D65 2-degree white. The white point is the
/// image of sRGB white under the same matrix, so neutral inputs map to
/// a = b = 0 up to rounding.
inline Lab srgb_to_lab(double r, double g, double b) {
  auto linear = [](double v) {
    v /= 255.0;
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
  };
  static constexpr double M[3][3] = {{0.4124564, 0.3575761, 0.1804375},
                                     {0.2126729, 0.7151522, 0.0721750},
                                     {0.0193339, 0.1191920, 0.9503041}};
  const double lr = linear(r), lg = linear(g), lb = linear(b);
  double xyz[3];
  for (int i = 0; i < 3; ++i) {
    const double white = M[i][0] + M[i][1] + M[i][2];
    xyz[i] = (M[i][0] * lr + M[i][1] * lg + M[i][2] * lb) / white;
  }
  constexpr double delta = 6.0 / 29.0;
  auto f = [&](double t) { return t > delta * delta * delta ? std::cbrt(t) : t / (3 * delta * delta) + 4.0 / 29.0; };
  const double fx = f(xyz[0]), fy = f(xyz[1]), fz = f(xyz[2]);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

/// CIEDE2000 with kL = kC = kH = 1.
inline double ciede2000(const Lab& p, const Lab& q) {
  constexpr double pi = std::numbers::pi;
  auto deg = [&](double r) { return r * 180.0 / pi; };
  auto rad = [&](double d) { return d * pi / 180.0; };
  const double c1 = std::hypot(p.a, p.b), c2 = std::hypot(q.a, q.b);
  const double cbar = (c1 + c2) / 2.0;
  const double cbar7 = std::pow(cbar, 7.0);
  const double g = 0.5 * (1.0 - std::sqrt(cbar7 / (cbar7 + std::pow(25.0, 7.0))));
  const double a1 = (1.0 + g) * p.a, a2 = (1.0 + g) * q.a;
  const double cp1 = std::hypot(a1, p.b), cp2 = std::hypot(a2, q.b);
  auto hue = [&](double a, double b) {
    if (a == 0.0 && b == 0.0) return 0.0;
    double h = deg(std::atan2(b, a));
    return h < 0.0 ? h + 360.0 : h;
  };
  const double h1 = hue(a1, p.b), h2 = hue(a2, q.b);

  const double dL = q.L - p.L;
  const double dC = cp2 - cp1;
  double dh = 0.0;
  if (cp1 * cp2 != 0.0) {
    dh = h2 - h1;
    if (dh > 180.0) dh -= 360.0;
    else if (dh < -180.0) dh += 360.0;
  }
  const double dH = 2.0 * std::sqrt(cp1 * cp2) * std::sin(rad(dh / 2.0));

  const double lbar = (p.L + q.L) / 2.0;
  const double cpbar = (cp1 + cp2) / 2.0;
  double hbar = h1 + h2;
  if (cp1 * cp2 != 0.0) {
    if (std::abs(h1 - h2) <= 180.0) hbar /= 2.0;
    else if (h1 + h2 < 360.0) hbar = (h1 + h2 + 360.0) / 2.0;
    else hbar = (h1 + h2 - 360.0) / 2.0;
  }
  const double t = 1.0 - 0.17 * std::cos(rad(hbar - 30.0)) + 0.24 * std::cos(rad(2.0 * hbar)) +
                   0.32 * std::cos(rad(3.0 * hbar + 6.0)) - 0.20 * std::cos(rad(4.0 * hbar - 63.0));
  const double dtheta = 30.0 * std::exp(-std::pow((hbar - 275.0) / 25.0, 2.0));
  const double cpbar7 = std::pow(cpbar, 7.0);
  const double rc = 2.0 * std::sqrt(cpbar7 / (cpbar7 + std::pow(25.0, 7.0)));
  const double sl = 1.0 + 0.015 * (lbar - 50.0) * (lbar - 50.0) / std::sqrt(20.0 + (lbar - 50.0) * (lbar - 50.0));
  const double sc = 1.0 + 0.045 * cpbar;
  const double sh = 1.0 + 0.015 * cpbar * t;
  const double rt = -std::sin(rad(2.0 * dtheta)) * rc;
  const double tl = dL / sl, tc = dC / sc, th = dH / sh;
  return std::sqrt(tl * tl + tc * tc + th * th + rt * tc * th);
}

/// Angle in degrees between an RGB vector and the gray axis (1,1,1).
inline double angular_error(double r, double g, double b) {
  const double norm = std::sqrt(r * r + g * g + b * b);
  if (!(norm > 0.0)) throw UsageError("angular_error: zero RGB vector has no angle");
  const double cosine = std::clamp((r + g + b) / (norm * std::sqrt(3.0)), -1.0, 1.0);
  return std::acos(cosine) * 180.0 / std::numbers::pi;
}

/// Mean angular error over patch means.
inline double reproduction_angular_error(const std::vector<std::array<double, 3>>& patches) {
  if (patches.empty()) throw UsageError("reproduction_angular_error: no patches");
  double s = 0.0;
  for (const auto& p : patches) s += angular_error(p[0], p[1], p[2]);
  return s / static_cast<double>(patches.size());
}

// ---------------------------------------------------------------- UIQM

struct UiqmResult {
  double uicm = 0.0, uism = 0.0, uiconm = 0.0, uiqm = 0.0;
};

struct UiqmOptions {
  double c1 = 0.0282, c2 = 0.2953, c3 = 3.5753;
  double alpha = 0.1;  // trimmed from each tail
  std::size_t block = 8;
};

namespace detail {

/// Mean of the sorted values after dropping floor(alpha K) from each end.
inline double trimmed_mean(std::vector<double> v, double alpha) {
  std::sort(v.begin(), v.end());
  const auto cut = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(v.size())));
  double s = 0.0;
  for (std::size_t i = cut; i < v.size() - cut; ++i) s += v[i];
  return s / static_cast<double>(v.size() - 2 * cut);
}

inline double spread_about(const std::vector<double>& v, double mu) {
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return s / static_cast<double>(v.size());
}

/// Block EME: 2/(k1 k2) sum log(max/min), skipping blocks with a zero extreme.
inline double eme(const cv::Mat& m, std::size_t block) {
  const int k1 = m.rows / static_cast<int>(block), k2 = m.cols / static_cast<int>(block);
  const int bs = static_cast<int>(block);
  double s = 0.0;
  for (int i = 0; i < k1; ++i) {
    for (int j = 0; j < k2; ++j) {
      double lo = 0.0, hi = 0.0;
      cv::minMaxLoc(m(cv::Rect(j * bs, i * bs, bs, bs)), &lo, &hi);
      if (lo > 0.0 && hi > 0.0) s += std::log(hi / lo);
    }
  }
  return 2.0 / static_cast<double>(k1 * k2) * s;
}

}  // namespace detail

/// UICM from alpha-trimmed statistics of RG = R - G and YB = (R + G)/2 - B;
/// UISM from the block EME of Sobel-magnitude-weighted channels; UIConM from
/// the block log-AMEE over all three channels.
inline UiqmResult uiqm(const MetricImage& img, const UiqmOptions& opt = {}) {
  if (img.height < 2 * opt.block || img.width < 2 * opt.block) {
    throw ShapeError("uiqm: image must be at least " + std::to_string(2 * opt.block) + " pixels on each side");
  }
  UiqmResult r;
  std::vector<double> rg(img.pixels()), yb(img.pixels());
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    const double R = img.rgb[i * 3], G = img.rgb[i * 3 + 1], B = img.rgb[i * 3 + 2];
    rg[i] = R - G;
    yb[i] = (R + G) / 2.0 - B;
  }
  const double mu_rg = detail::trimmed_mean(rg, opt.alpha), mu_yb = detail::trimmed_mean(yb, opt.alpha);
  r.uicm = -0.0268 * std::hypot(mu_rg, mu_yb) +
           0.1586 * std::sqrt(detail::spread_about(rg, mu_rg) + detail::spread_about(yb, mu_yb));

  static constexpr double lambda[3] = {0.299, 0.587, 0.114};
  for (std::size_t c = 0; c < 3; ++c) {
    const cv::Mat ch = detail::channel(img, c);
    cv::Mat gx, gy, mag;
    cv::Sobel(ch, gx, CV_64F, 1, 0, 3, 1.0, 0.0, cv::BORDER_REFLECT);
    cv::Sobel(ch, gy, CV_64F, 0, 1, 3, 1.0, 0.0, cv::BORDER_REFLECT);
    cv::magnitude(gx, gy, mag);
    r.uism += lambda[c] * detail::eme(mag.mul(ch), opt.block);
  }

  const std::size_t k1 = img.height / opt.block, k2 = img.width / opt.block;
  double amee = 0.0;
  for (std::size_t i = 0; i < k1; ++i) {
    for (std::size_t j = 0; j < k2; ++j) {
      double lo = 255.0, hi = 0.0;
      for (std::size_t y = i * opt.block; y < (i + 1) * opt.block; ++y) {
        for (std::size_t x = j * opt.block; x < (j + 1) * opt.block; ++x) {
          for (std::size_t c = 0; c < 3; ++c) {
            lo = std::min(lo, img.at(y, x, c));
            hi = std::max(hi, img.at(y, x, c));
          }
        }
      }
      const double top = hi - lo, bot = hi + lo;
      if (top > 0.0 && bot > 0.0) amee += (top / bot) * std::log(top / bot);
    }
  }
  r.uiconm = -amee / static_cast<double>(k1 * k2);
  r.uiqm = opt.c1 * r.uicm + opt.c2 * r.uism + opt.c3 * r.uiconm;
  return r;
}

// ---------------------------------------------------------------- UCIQE

struct UciqeResult {
  double chroma_std = 0.0, luma_contrast = 0.0, mean_saturation = 0.0, uciqe = 0.0;
};

struct UciqeOptions {
  double w_chroma = 0.4680, w_contrast = 0.2745, w_saturation = 0.2576;
  double percentile = 0.01;
};

/// Chroma is divided by 100 so all three terms are on a unit scale;
/// contrast uses L/100; saturation is C/L (0 where L = 0).
inline UciqeResult uciqe(const MetricImage& img, const UciqeOptions& opt = {}) {
  if (img.rgb.empty()) throw ShapeError("uciqe: empty image");
  const std::size_t n = img.pixels();
  std::vector<double> chroma(n), lum(n);
  double sat = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Lab lab = srgb_to_lab(img.rgb[i * 3], img.rgb[i * 3 + 1], img.rgb[i * 3 + 2]);
    const double c = std::hypot(lab.a, lab.b);
    chroma[i] = c / 100.0;
    lum[i] = lab.L / 100.0;
    sat += lab.L > 0.0 ? c / lab.L : 0.0;
  }
  UciqeResult r;
  double mean = 0.0;
  for (double c : chroma) mean += c;
  mean /= static_cast<double>(n);
  r.chroma_std = std::sqrt(detail::spread_about(chroma, mean));
  std::sort(lum.begin(), lum.end());
  const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(opt.percentile * static_cast<double>(n))));
  double top = 0.0, bottom = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    bottom += lum[i];
    top += lum[n - 1 - i];
  }
  r.luma_contrast = (top - bottom) / static_cast<double>(k);
  r.mean_saturation = sat / static_cast<double>(n);
  r.uciqe = opt.w_chroma * r.chroma_std + opt.w_contrast * r.luma_contrast + opt.w_saturation * r.mean_saturation;
  return r;
}

// ---------------------------------------------------------------- color chart

struct ChartPatch {
  std::string name;
  Box rect;
  Lab reference;
  bool neutral = false;
};

inline constexpr std::size_t kChartPatches = 24;
inline constexpr std::size_t kNeutralPatches = 6;

/// Sidecar document: {"patches": [{"name", "x", "y", "w", "h", "lab": [L,a,b], "neutral"}]}.
inline std::vector<ChartPatch> parse_chart_layout(const nlohmann::json& doc) {
  try {
    std::vector<ChartPatch> out;
    for (const auto& p : doc.at("patches")) {
      ChartPatch c;
      c.name = p.value("name", "patch" + std::to_string(out.size()));
      const auto x = p.at("x").get<std::size_t>(), y = p.at("y").get<std::size_t>();
      const auto w = p.at("w").get<std::size_t>(), h = p.at("h").get<std::size_t>();
      if (w == 0 || h == 0) throw FormatError("chart layout: empty rectangle for " + c.name);
      c.rect = Box{y, x, y + h, x + w};
      const auto& lab = p.at("lab");
      if (lab.size() != 3) throw FormatError("chart layout: lab of " + c.name + " needs three values");
      c.reference = {lab[0].get<double>(), lab[1].get<double>(), lab[2].get<double>()};
      c.neutral = p.value("neutral", false);
      out.push_back(c);
    }
    const auto neutral = std::count_if(out.begin(), out.end(), [](const ChartPatch& p) { return p.neutral; });
    if (out.size() != kChartPatches || static_cast<std::size_t>(neutral) != kNeutralPatches) {
      throw FormatError("chart layout: expected 24 patches with 6 neutral, got " + std::to_string(out.size()) +
                        " with " + std::to_string(neutral));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("chart layout: ") + e.what());
  }
}

inline std::array<double, 3> patch_mean(const MetricImage& img, const Box& b) {
  if (b.y1 > img.height || b.x1 > img.width || b.y0 >= b.y1 || b.x0 >= b.x1) {
    throw BoundsError("chart patch outside the image");
  }
  std::array<double, 3> s{};
  for (std::size_t y = b.y0; y < b.y1; ++y) {
    for (std::size_t x = b.x0; x < b.x1; ++x) {
      for (std::size_t c = 0; c < 3; ++c) s[c] += img.at(y, x, c);
    }
  }
  const double n = static_cast<double>(b.height() * b.width());
  for (auto& v : s) v /= n;
  return s;
}

struct ChartScore {
  double ciede2000 = 0.0;       // mean over all patches
  double angular_error = 0.0;   // mean over neutral patches, degrees
};

inline ChartScore score_chart(const MetricImage& img, const std::vector<ChartPatch>& layout) {
  ChartScore s;
  std::vector<std::array<double, 3>> neutral;
  for (const auto& p : layout) {
    const auto m = patch_mean(img, p.rect);
    s.ciede2000 += ciede2000(srgb_to_lab(m[0], m[1], m[2]), p.reference);
    if (p.neutral) neutral.push_back(m);
  }
  s.ciede2000 /= static_cast<double>(layout.size());
  s.angular_error = reproduction_angular_error(neutral);
  return s;
}

// ---------------------------------------------------------------- reports

/// Per-image metric values and their arithmetic means. Metric columns keep
/// first-insertion order.
class MetricReport {
 public:
  void add(const std::string& image, const std::string& metric, double value) {
    if (std::find(metrics_.begin(), metrics_.end(), metric) == metrics_.end()) metrics_.push_back(metric);
    auto it = std::find_if(rows_.begin(), rows_.end(), [&](const auto& r) { return r.first == image; });
    if (it == rows_.end()) {
      rows_.push_back({image, {}});
      it = std::prev(rows_.end());
    }
    it->second[metric] = value;
  }

  const std::vector<std::string>& metrics() const { return metrics_; }
  std::size_t size() const { return rows_.size(); }

  /// Mean over the images that have this metric.
  double mean(const std::string& metric) const {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& [id, values] : rows_) {
      auto it = values.find(metric);
      if (it == values.end()) continue;
      s += it->second;
      ++n;
    }
    if (n == 0) throw UsageError("MetricReport: no values for " + metric);
    return s / static_cast<double>(n);
  }

  std::string csv() const {
    std::ostringstream os;
    os << std::setprecision(10) << "image";
    for (const auto& m : metrics_) os << ',' << m;
    os << '\n';
    for (const auto& [id, values] : rows_) {
      os << id;
      for (const auto& m : metrics_) {
        os << ',';
        if (auto it = values.find(m); it != values.end()) os << it->second;
      }
      os << '\n';
    }
    os << "mean";
    for (const auto& m : metrics_) os << ',' << mean(m);
    os << '\n';
    return os.str();
  }

  nlohmann::ordered_json json() const {
    nlohmann::ordered_json doc;
    doc["images"] = nlohmann::ordered_json::object();
    for (const auto& [id, values] : rows_) {
      auto& row = doc["images"][id];
      row = nlohmann::ordered_json::object();
      for (const auto& m : metrics_) {
        if (auto it = values.find(m); it != values.end()) row[m] = it->second;
      }
    }
    doc["mean"] = nlohmann::ordered_json::object();
    for (const auto& m : metrics_) doc["mean"][m] = mean(m);
    return doc;
  }

 private:
  std::vector<std::string> metrics_;
  std::vector<std::pair<std::string, std::map<std::string, double>>> rows_;
};

}  // namespace sguie
