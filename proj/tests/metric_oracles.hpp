#pragma once

// Independent brute-force metric oracles and the CIEDE2000 verification set.

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "sguie/metrics.hpp"

namespace sguie::testing {


inline MetricImage random_image(std::size_t h, std::size_t w, std::mt19937_64& rng, double lo = 0.0, double hi = 255.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  MetricImage m(h, w);
  for (auto& v : m.rgb) v = d(rng);
  return m;
}

inline MetricImage constant_image(std::size_t h, std::size_t w, double r, double g, double b) {
  MetricImage m(h, w);
  for (std::size_t i = 0; i < m.pixels(); ++i) {
    m.rgb[i * 3] = r;
    m.rgb[i * 3 + 1] = g;
    m.rgb[i * 3 + 2] = b;
  }
  return m;
}

/// Two colors in a checkerboard of 4x4 cells.
inline MetricImage two_tone(std::size_t h, std::size_t w, std::array<double, 3> p, std::array<double, 3> q) {
  MetricImage m(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const auto& c = ((y / 4 + x / 4) % 2 == 0) ? p : q;
      for (std::size_t k = 0; k < 3; ++k) m.at(y, x, k) = c[k];
    }
  }
  return m;
}

// ------------------------------------------------------------ scalar oracles

inline double oracle_luma(const MetricImage& m, std::size_t y, std::size_t x) {
  return 0.299 * m.at(y, x, 0) + 0.587 * m.at(y, x, 1) + 0.114 * m.at(y, x, 2);
}

/// Direct evaluation of every 11x11 window with explicit 2-D Gaussian weights.
inline double oracle_ssim(const MetricImage& a, const MetricImage& b) {
  const int n = 11;
  const double sigma = 1.5;
  double w[11][11];
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      w[i][j] = std::exp(-((i - 5.0) * (i - 5.0) + (j - 5.0) * (j - 5.0)) / (2 * sigma * sigma));
      total += w[i][j];
    }
  }
  const double C1 = std::pow(0.01 * 255, 2), C2 = std::pow(0.03 * 255, 2);
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t y0 = 0; y0 + n <= a.height; ++y0) {
    for (std::size_t x0 = 0; x0 + n <= a.width; ++x0) {
      double mx = 0, my = 0;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          mx += w[i][j] / total * oracle_luma(a, y0 + i, x0 + j);
          my += w[i][j] / total * oracle_luma(b, y0 + i, x0 + j);
        }
      }
      double vx = 0, vy = 0, cxy = 0;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const double dx = oracle_luma(a, y0 + i, x0 + j) - mx, dy = oracle_luma(b, y0 + i, x0 + j) - my;
          vx += w[i][j] / total * dx * dx;
          vy += w[i][j] / total * dy * dy;
          cxy += w[i][j] / total * dx * dy;
        }
      }
      acc += (2 * mx * my + C1) * (2 * cxy + C2) / ((mx * mx + my * my + C1) * (vx + vy + C2));
      ++count;
    }
  }
  return acc / count;
}

/// Mirror index with the edge pixel repeated: -1 -> 0, n -> n-1.
inline long reflect(long i, long n) {
  if (i < 0) return -i - 1;
  if (i >= n) return 2 * n - i - 1;
  return i;
}

struct OracleUiqm {
  double uicm, uism, uiconm, uiqm;
};

inline OracleUiqm oracle_uiqm(const MetricImage& m) {
  const long H = static_cast<long>(m.height), W = static_cast<long>(m.width);
  const std::size_t N = m.pixels();
  // UICM
  std::vector<double> rg, yb;
  for (std::size_t i = 0; i < N; ++i) {
    rg.push_back(m.rgb[3 * i] - m.rgb[3 * i + 1]);
    yb.push_back(0.5 * (m.rgb[3 * i] + m.rgb[3 * i + 1]) - m.rgb[3 * i + 2]);
  }
  auto trimmed = [&](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t t = static_cast<std::size_t>(0.1 * v.size());
    double s = 0;
    for (std::size_t i = t; i + t < v.size(); ++i) s += v[i];
    return s / (v.size() - 2 * t);
  };
  auto variance = [&](const std::vector<double>& v, double mu) {
    double s = 0;
    for (double x : v) s += (x - mu) * (x - mu);
    return s / v.size();
  };
  const double mrg = trimmed(rg), myb = trimmed(yb);
  OracleUiqm r{};
  r.uicm = -0.0268 * std::sqrt(mrg * mrg + myb * myb) + 0.1586 * std::sqrt(variance(rg, mrg) + variance(yb, myb));
  // UISM
  const long k1 = H / 8, k2 = W / 8;
  const double lam[3] = {0.299, 0.587, 0.114};
  r.uism = 0;
  for (int c = 0; c < 3; ++c) {
    auto px = [&](long y, long x) { return m.at(reflect(y, H), reflect(x, W), c); };
    std::vector<double> edge(N);
    for (long y = 0; y < H; ++y) {
      for (long x = 0; x < W; ++x) {
        const double gx = (px(y - 1, x + 1) + 2 * px(y, x + 1) + px(y + 1, x + 1)) -
                          (px(y - 1, x - 1) + 2 * px(y, x - 1) + px(y + 1, x - 1));
        const double gy = (px(y + 1, x - 1) + 2 * px(y + 1, x) + px(y + 1, x + 1)) -
                          (px(y - 1, x - 1) + 2 * px(y - 1, x) + px(y - 1, x + 1));
        edge[y * W + x] = std::sqrt(gx * gx + gy * gy) * px(y, x);
      }
    }
    double s = 0;
    for (long bi = 0; bi < k1; ++bi) {
      for (long bj = 0; bj < k2; ++bj) {
        double lo = 1e300, hi = -1e300;
        for (long y = bi * 8; y < bi * 8 + 8; ++y) {
          for (long x = bj * 8; x < bj * 8 + 8; ++x) {
            lo = std::min(lo, edge[y * W + x]);
            hi = std::max(hi, edge[y * W + x]);
          }
        }
        if (lo > 0 && hi > 0) s += std::log(hi / lo);
      }
    }
    r.uism += lam[c] * 2.0 / (k1 * k2) * s;
  }
  // UIConM
  double s = 0;
  for (long bi = 0; bi < k1; ++bi) {
    for (long bj = 0; bj < k2; ++bj) {
      double lo = 1e300, hi = -1e300;
      for (long y = bi * 8; y < bi * 8 + 8; ++y) {
        for (long x = bj * 8; x < bj * 8 + 8; ++x) {
          for (int c = 0; c < 3; ++c) {
            lo = std::min(lo, m.at(y, x, c));
            hi = std::max(hi, m.at(y, x, c));
          }
        }
      }
      const double ratio = (hi - lo) / (hi + lo);
      if (hi - lo > 0 && hi + lo > 0) s += ratio * std::log(ratio);
    }
  }
  r.uiconm = -s / (k1 * k2);
  r.uiqm = 0.0282 * r.uicm + 0.2953 * r.uism + 3.5753 * r.uiconm;
  return r;
}

/// sRGB -> XYZ -> Lab with the white taken as XYZ of (255,255,255).
inline std::array<double, 3> oracle_lab(double R, double G, double B) {
  auto lin = [](double u) {
    u = u / 255;
    return u > 0.04045 ? std::pow((u + 0.055) / 1.055, 2.4) : u / 12.92;
  };
  const double r = lin(R), g = lin(G), b = lin(B);
  const double X = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double Y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double Z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
  const double Xn = 0.4124564 + 0.3575761 + 0.1804375;
  const double Yn = 0.2126729 + 0.7151522 + 0.0721750;
  const double Zn = 0.0193339 + 0.1191920 + 0.9503041;
  auto f = [](double t) { return t > 216.0 / 24389.0 ? std::cbrt(t) : (24389.0 / 27.0 * t + 16.0) / 116.0; };
  return {116 * f(Y / Yn) - 16, 500 * (f(X / Xn) - f(Y / Yn)), 200 * (f(Y / Yn) - f(Z / Zn))};
}

inline double oracle_uciqe(const MetricImage& m) {
  const std::size_t N = m.pixels();
  std::vector<double> C, L;
  double sat = 0;
  for (std::size_t i = 0; i < N; ++i) {
    const auto lab = oracle_lab(m.rgb[3 * i], m.rgb[3 * i + 1], m.rgb[3 * i + 2]);
    const double c = std::sqrt(lab[1] * lab[1] + lab[2] * lab[2]);
    C.push_back(c / 100);
    L.push_back(lab[0] / 100);
    sat += lab[0] > 0 ? c / lab[0] : 0;
  }
  double mean = 0;
  for (double c : C) mean += c / N;
  double var = 0;
  for (double c : C) var += (c - mean) * (c - mean) / N;
  std::sort(L.begin(), L.end());
  std::size_t k = N / 100;
  if (k == 0) k = 1;
  double lo = 0, hi = 0;
  for (std::size_t i = 0; i < k; ++i) {
    lo += L[i] / k;
    hi += L[N - 1 - i] / k;
  }
  return 0.4680 * std::sqrt(var) + 0.2745 * (hi - lo) + 0.2576 * sat / N;
}


struct CiedePair {
  Lab a, b;
  double expected;
};

/// Sharma, Wu and Dalal (2005) test data, all 34 pairs.
inline std::vector<CiedePair> ciede2000_pairs() {
  return {
      {{50, 2.6772, -79.7751}, {50, 0, -82.7485}, 2.0425},
      {{50, 3.1571, -77.2803}, {50, 0, -82.7485}, 2.8615},
      {{50, 2.8361, -74.02}, {50, 0, -82.7485}, 3.4412},
      {{50, -1.3802, -84.2814}, {50, 0, -82.7485}, 1.0000},
      {{50, -1.1848, -84.8006}, {50, 0, -82.7485}, 1.0000},
      {{50, -0.9009, -85.5211}, {50, 0, -82.7485}, 1.0000},
      {{50, 0, 0}, {50, -1, 2}, 2.3669},
      {{50, -1, 2}, {50, 0, 0}, 2.3669},
      {{50, 2.49, -0.001}, {50, -2.49, 0.0009}, 7.1792},
      {{50, 2.49, -0.001}, {50, -2.49, 0.0010}, 7.1792},
      {{50, 2.49, -0.001}, {50, -2.49, 0.0011}, 7.2195},
      {{50, 2.49, -0.001}, {50, -2.49, 0.0012}, 7.2195},
      {{50, -0.001, 2.49}, {50, 0.0009, -2.49}, 4.8045},
      {{50, -0.001, 2.49}, {50, 0.0010, -2.49}, 4.8045},
      {{50, -0.001, 2.49}, {50, 0.0011, -2.49}, 4.7461},
      {{50, 2.5, 0}, {50, 0, -2.5}, 4.3065},
      {{50, 2.5, 0}, {73, 25, -18}, 27.1492},
      {{50, 2.5, 0}, {61, -5, 29}, 22.8977},
      {{50, 2.5, 0}, {56, -27, -3}, 31.9030},
      {{50, 2.5, 0}, {58, 24, 15}, 19.4535},
      {{50, 2.5, 0}, {50, 3.1736, 0.5854}, 1.0000},
      {{50, 2.5, 0}, {50, 3.2972, 0}, 1.0000},
      {{50, 2.5, 0}, {50, 1.8634, 0.5757}, 1.0000},
      {{50, 2.5, 0}, {50, 3.2592, 0.335}, 1.0000},
      {{60.2574, -34.0099, 36.2677}, {60.4626, -34.1751, 39.4387}, 1.2644},
      {{63.0109, -31.0961, -5.8663}, {62.8187, -29.7946, -4.0864}, 1.2630},
      {{61.2901, 3.7196, -5.3901}, {61.4292, 2.248, -4.962}, 1.8731},
      {{35.0831, -44.1164, 3.7933}, {35.0232, -40.0716, 1.5901}, 1.8645},
      {{22.7233, 20.0904, -46.694}, {23.0331, 14.973, -42.5619}, 2.0373},
      {{36.4612, 47.858, 18.3852}, {36.2715, 50.5065, 21.2231}, 1.4146},
      {{90.8027, -2.0831, 1.441}, {91.1528, -1.6435, 0.0447}, 1.4441},
      {{90.9257, -0.5406, -0.9208}, {88.6381, -0.8985, -0.7239}, 1.5381},
      {{6.7747, -0.2908, -2.4247}, {5.8714, -0.0985, -2.2286}, 0.6377},
      {{2.0776, 0.0795, -1.135}, {0.9033, -0.0636, -0.5514}, 0.9082},
  };
}

}  // namespace sguie::testing
