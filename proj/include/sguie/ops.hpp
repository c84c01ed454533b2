#pragma once

// Differentiable primitives used by the enhancement network. Every op takes
// the tape it records onto as its first argument; a non-recording tape turns
// the same calls into plain inference.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "sguie/errors.hpp"
#include "sguie/tensor.hpp"

namespace sguie {

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

/// Gradient sink for an op input; empty when the input does not need one.
template <typename T>
std::span<T> sink(Tensor<T> t) {
  if (!t.requires_grad()) return {};
  return t.mutable_grad();
}

inline void require_batch1(const Shape& s, const char* op) {
  if (s.n != 1) throw ShapeError(std::string(op) + ": batch size must be 1, got " + s.str());
}

inline void require_same(const Shape& a, const Shape& b, const char* op) {
  if (a != b) throw ShapeError(std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str());
}

inline void require_box(const Shape& s, const Box& b, const char* op) {
  if (b.y0 >= b.y1 || b.x0 >= b.x1 || b.y1 > s.h || b.x1 > s.w) {
    throw BoundsError(std::string(op) + ": box (" + std::to_string(b.y0) + "," +
                      std::to_string(b.x0) + "," + std::to_string(b.y1) + "," +
                      std::to_string(b.x1) + ") outside " + s.str());
  }
}

struct ConvGeometry {
  std::size_t cin, h, w, kh, kw, stride, pad, ho, wo;
  std::size_t k() const { return cin * kh * kw; }
  std::size_t p() const { return ho * wo; }
  bool trivial() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

/// Output columns [lo, hi) whose input column ox*stride + k - pad is in range.
inline std::pair<std::size_t, std::size_t> valid_span(std::size_t k, const ConvGeometry& g, std::size_t n_in,
                                                      std::size_t n_out) {
  // ox*stride + k >= pad  and  ox*stride + k < n_in + pad
  const std::size_t lo = k >= g.pad ? 0 : (g.pad - k + g.stride - 1) / g.stride;
  const std::size_t lim = n_in + g.pad;
  const std::size_t hi = k >= lim ? 0 : std::min(n_out, (lim - k + g.stride - 1) / g.stride);
  return {std::min(lo, hi), hi};
}

template <typename T>
void im2col(const ConvGeometry& g, const T* x, T* cols) {
  const std::size_t P = g.p();
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    const T* plane = x + ci * g.h * g.w;
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      const auto [oy0, oy1] = valid_span(ky, g, g.h, g.ho);
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const auto [ox0, ox1] = valid_span(kx, g, g.w, g.wo);
        T* row = cols + ((ci * g.kh + ky) * g.kw + kx) * P;
        std::fill(row, row + oy0 * g.wo, T(0));
        for (std::size_t oy = oy0; oy < oy1; ++oy) {
          const T* src = plane + (oy * g.stride + ky - g.pad) * g.w;
          T* out = row + oy * g.wo;
          std::fill(out, out + ox0, T(0));
          if (g.stride == 1) {
            std::copy(src + ox0 + kx - g.pad, src + ox1 + kx - g.pad, out + ox0);
          } else {
            for (std::size_t ox = ox0; ox < ox1; ++ox) out[ox] = src[ox * g.stride + kx - g.pad];
          }
          std::fill(out + ox1, out + g.wo, T(0));
        }
        std::fill(row + oy1 * g.wo, row + P, T(0));
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvGeometry& g, const T* cols, T* dx) {
  const std::size_t P = g.p();
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    T* plane = dx + ci * g.h * g.w;
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      const auto [oy0, oy1] = valid_span(ky, g, g.h, g.ho);
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const auto [ox0, ox1] = valid_span(kx, g, g.w, g.wo);
        const T* row = cols + ((ci * g.kh + ky) * g.kw + kx) * P;
        for (std::size_t oy = oy0; oy < oy1; ++oy) {
          T* dst = plane + (oy * g.stride + ky - g.pad) * g.w;
          const T* in = row + oy * g.wo;
          if (g.stride == 1) {
            for (std::size_t ox = ox0; ox < ox1; ++ox) dst[ox + kx - g.pad] += in[ox];
          } else {
            for (std::size_t ox = ox0; ox < ox1; ++ox) dst[ox * g.stride + kx - g.pad] += in[ox];
          }
        }
      }
    }
  }
}

/// Index of the broadcast operand element feeding output element (c, p).
enum class Broadcast { None, Channel, Spatial };

inline Broadcast broadcast_kind(const Shape& a, const Shape& b, const char* op) {
  if (a == b) return Broadcast::None;
  if (a.n == b.n && b.c == 1 && b.h == a.h && b.w == a.w) return Broadcast::Channel;
  if (a.n == b.n && b.c == a.c && b.h == 1 && b.w == 1) return Broadcast::Spatial;
  throw ShapeError(std::string(op) + ": cannot broadcast " + b.str() + " onto " + a.str());
}

/// Calls f(i, j) for every output element i and its broadcast source j.
template <typename F>
inline void for_each_broadcast(Broadcast kind, const Shape& a, F&& f) {
  const std::size_t plane = a.plane();
  const std::size_t total = a.numel();
  switch (kind) {
    case Broadcast::None:
      for (std::size_t i = 0; i < total; ++i) f(i, i);
      return;
    case Broadcast::Channel:
      for (std::size_t n = 0; n < a.n; ++n) {
        for (std::size_t c = 0; c < a.c; ++c) {
          const std::size_t base = (n * a.c + c) * plane;
          for (std::size_t p = 0; p < plane; ++p) f(base + p, n * plane + p);
        }
      }
      return;
    case Broadcast::Spatial:
      for (std::size_t q = 0; q < a.n * a.c; ++q) {
        for (std::size_t p = 0; p < plane; ++p) f(q * plane + p, q);
      }
      return;
  }
}

}  // namespace detail

/// 2-D cross-correlation. `weight` is laid out [Cout, Cin, kh, kw] in the
/// (n, c, h, w) slots of its Shape; `bias` is [1, Cout, 1, 1] or undefined.
template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride = 1, std::size_t pad = 0) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  detail::require_batch1(xs, "conv2d");
  if (ws.c != xs.c) {
    throw ShapeError("conv2d: input has " + std::to_string(xs.c) + " channels, weight expects " +
                     std::to_string(ws.c));
  }
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  if (xs.h + 2 * pad < ws.h || xs.w + 2 * pad < ws.w) throw ShapeError("conv2d: kernel larger than padded input");
  if ((xs.h + 2 * pad - ws.h) % stride != 0 || (xs.w + 2 * pad - ws.w) % stride != 0) {
    throw ShapeError("conv2d: output size is not an integer for input " + xs.str());
  }
  if (bias.defined() && bias.numel() != ws.n) throw ShapeError("conv2d: bias length mismatch");

  detail::ConvGeometry g{xs.c, xs.h, xs.w, ws.h, ws.w, stride, pad,
                         (xs.h + 2 * pad - ws.h) / stride + 1, (xs.w + 2 * pad - ws.w) / stride + 1};
  const std::size_t cout = ws.n;
  const std::size_t P = g.p();
  const std::size_t K = g.k();

  Buffer<T> cols_buf;
  const T* cols = x.data().data();
  if (!g.trivial()) {
    cols_buf.resize(K * P);
    detail::im2col(g, x.data().data(), cols_buf.data());
    cols = cols_buf.data();
  }

  Buffer<T> out(cout * P);
  {
    detail::MapMat<T> o(out.data(), cout, P);
    detail::ConstMapMat<T> wm(weight.data().data(), cout, K);
    detail::ConstMapMat<T> cm(cols, K, P);
    o.noalias() = wm * cm;
    if (bias.defined()) {
      const auto b = bias.data();
      for (std::size_t co = 0; co < cout; ++co) o.row(co).array() += b[co];
    }
  }
  Tensor<T> y(Shape{1, cout, g.ho, g.wo}, std::move(out));

  return tape.record(std::move(y), {x, weight, bias.defined() ? bias : Tensor<T>()},
                     [x, weight, bias, g, cout](std::span<const T> gout) {
                       const std::size_t P = g.p();
                       const std::size_t K = g.k();
                       detail::ConstMapMat<T> go(gout.data(), cout, P);
                       auto dw = detail::sink(weight);
                       auto dx = detail::sink(x);
                       if (bias.defined()) {
                         auto db = detail::sink(bias);
                         if (!db.empty()) {
                           for (std::size_t co = 0; co < cout; ++co) db[co] += go.row(co).sum();
                         }
                       }
                       if (dw.empty() && dx.empty()) return;
                       Buffer<T> cols_buf;
                       const T* cols = x.data().data();
                       if (!g.trivial()) {
                         cols_buf.resize(K * P);
                         detail::im2col(g, x.data().data(), cols_buf.data());
                         cols = cols_buf.data();
                       }
                       if (!dw.empty()) {
                         detail::MapMat<T> dwm(dw.data(), cout, K);
                         detail::ConstMapMat<T> cm(cols, K, P);
                         dwm.noalias() += go * cm.transpose();
                       }
                       if (!dx.empty()) {
                         detail::ConstMapMat<T> wm(weight.data().data(), cout, K);
                         if (g.trivial()) {
                           detail::MapMat<T> dxm(dx.data(), K, P);
                           dxm.noalias() += wm.transpose() * go;
                         } else {
                           detail::MapMat<T> dcols(cols_buf.data(), K, P);
                           dcols.noalias() = wm.transpose() * go;
                           detail::col2im_add(g, cols_buf.data(), dx.data());
                         }
                       }
                     });
}

enum class Mode { Train, Eval };

/// Per-channel running statistics for batch normalization.
template <typename T>
struct RunningStats {
  std::vector<T> mean;
  std::vector<T> var;

  RunningStats() = default;
  explicit RunningStats(std::size_t channels) : mean(channels, T(0)), var(channels, T(1)) {}
};

/// Batch normalization over H x W (N is always 1). Train mode normalizes with
/// the batch statistics and updates `stats`; eval mode uses `stats`.
template <typename T>
Tensor<T> batchnorm2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                      RunningStats<T>& stats, Mode mode, T eps = T(1e-5), T momentum = T(0.1)) {
  const Shape& s = x.shape();
  detail::require_batch1(s, "batchnorm2d");
  if (gamma.numel() != s.c || beta.numel() != s.c || stats.mean.size() != s.c || stats.var.size() != s.c) {
    throw ShapeError("batchnorm2d: channel count mismatch for input " + s.str());
  }
  const std::size_t M = s.plane();
  if (M == 0) throw ShapeError("batchnorm2d: zero spatial extent");

  const auto xd = x.data();
  const auto gd = gamma.data();
  const auto bd = beta.data();
  Buffer<T> out(s.numel());
  std::vector<double> inv_std(s.c);
  std::vector<double> xhat(mode == Mode::Train ? s.numel() : 0);

  for (std::size_t c = 0; c < s.c; ++c) {
    const T* src = xd.data() + c * M;
    double mean, var;
    if (mode == Mode::Train) {
      double acc = 0;
      for (std::size_t i = 0; i < M; ++i) acc += src[i];
      const double m = acc / double(M);
      double sq = 0;
      for (std::size_t i = 0; i < M; ++i) sq += (src[i] - m) * (src[i] - m);
      mean = m;
      var = sq / double(M);
      const double unbiased = M > 1 ? sq / double(M - 1) : var;
      stats.mean[c] = T((1.0 - momentum) * stats.mean[c] + momentum * mean);
      stats.var[c] = T((1.0 - momentum) * stats.var[c] + momentum * unbiased);
    } else {
      mean = stats.mean[c];
      var = stats.var[c];
    }
    inv_std[c] = 1.0 / std::sqrt(var + double(eps));
    T* dst = out.data() + c * M;
    for (std::size_t i = 0; i < M; ++i) {
      const double xh = (src[i] - mean) * inv_std[c];
      if (mode == Mode::Train) xhat[c * M + i] = xh;
      dst[i] = T(double(gd[c]) * xh + double(bd[c]));
    }
  }

  Tensor<T> y(s, std::move(out));
  if (mode == Mode::Eval) {
    return tape.record(std::move(y), {x, gamma, beta},
                       [x, gamma, beta, inv_std, M, mean = stats.mean](std::span<const T> go) {
                         const std::size_t C = inv_std.size();
                         auto dx = detail::sink(x);
                         auto dg = detail::sink(gamma);
                         auto db = detail::sink(beta);
                         const auto xd = x.data();
                         const auto gd = gamma.data();
                         for (std::size_t c = 0; c < C; ++c) {
                           double sum_g = 0, sum_gx = 0;
                           for (std::size_t i = 0; i < M; ++i) {
                             const T g = go[c * M + i];
                             sum_g += g;
                             sum_gx += g * (double(xd[c * M + i]) - mean[c]) * inv_std[c];
                             if (!dx.empty()) dx[c * M + i] += T(g * gd[c] * inv_std[c]);
                           }
                           if (!dg.empty()) dg[c] += T(sum_gx);
                           if (!db.empty()) db[c] += T(sum_g);
                         }
                       });
  }
  return tape.record(std::move(y), {x, gamma, beta},
                     [x, gamma, beta, inv_std, M, xhat = std::move(xhat)](std::span<const T> go) {
                       const std::size_t C = inv_std.size();
                       auto dx = detail::sink(x);
                       auto dg = detail::sink(gamma);
                       auto db = detail::sink(beta);
                       const auto gd = gamma.data();
                       for (std::size_t c = 0; c < C; ++c) {
                         double sum_g = 0, sum_gx = 0;
                         for (std::size_t i = 0; i < M; ++i) {
                           sum_g += go[c * M + i];
                           sum_gx += double(go[c * M + i]) * xhat[c * M + i];
                         }
                         if (!dg.empty()) dg[c] += T(sum_gx);
                         if (!db.empty()) db[c] += T(sum_g);
                         if (dx.empty()) continue;
                         const double k = double(gd[c]) * inv_std[c] / double(M);
                         for (std::size_t i = 0; i < M; ++i) {
                           dx[c * M + i] += T(k * (double(M) * go[c * M + i] - sum_g - xhat[c * M + i] * sum_gx));
                         }
                       }
                     });
}

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x) {
  const auto xd = x.data();
  Buffer<T> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = xd[i] > T(0) ? xd[i] : T(0);
  return tape.record(Tensor<T>(x.shape(), std::move(out)), {x}, [x](std::span<const T> go) {
    auto dx = detail::sink(x);
    const auto xd = x.data();
    for (std::size_t i = 0; i < xd.size(); ++i) {
      if (xd[i] > T(0)) dx[i] += go[i];
    }
  });
}

template <typename T>
Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& x) {
  const auto xd = x.data();
  // Saturated values are held strictly inside (0, 1).
  constexpr T lo = std::numeric_limits<T>::min();
  constexpr T hi = T(1) - std::numeric_limits<T>::epsilon() / T(2);
  Buffer<T> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) {
    const T v = xd[i];
    T s;
    if (v >= T(0)) {
      s = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      s = e / (T(1) + e);
    }
    out[i] = std::clamp(s, lo, hi);
  }
  Tensor<T> y(x.shape(), std::move(out));
  return tape.record(y, {x}, [x, y](std::span<const T> go) {
    auto dx = detail::sink(x);
    const auto yd = y.data();
    for (std::size_t i = 0; i < go.size(); ++i) dx[i] += go[i] * yd[i] * (T(1) - yd[i]);
  });
}

/// a + b, where b may broadcast with C=1 or H=W=1.
template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& as = a.shape();
  const auto kind = detail::broadcast_kind(as, b.shape(), "add");
  const auto ad = a.data();
  const auto bd = b.data();
  Buffer<T> out(ad.size());
  detail::for_each_broadcast(kind, as, [&](std::size_t i, std::size_t j) { out[i] = ad[i] + bd[j]; });
  return tape.record(Tensor<T>(as, std::move(out)), {a, b}, [a, b, kind](std::span<const T> go) {
    auto da = detail::sink(a);
    auto db = detail::sink(b);
    const Shape& as = a.shape();
    if (!da.empty()) {
      for (std::size_t i = 0; i < go.size(); ++i) da[i] += go[i];
    }
    if (!db.empty()) detail::for_each_broadcast(kind, as, [&](std::size_t i, std::size_t j) { db[j] += go[i]; });
  });
}

/// a - b, identical shapes.
template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same(a.shape(), b.shape(), "sub");
  const auto ad = a.data();
  const auto bd = b.data();
  Buffer<T> out(ad.size());
  for (std::size_t i = 0; i < ad.size(); ++i) out[i] = ad[i] - bd[i];
  return tape.record(Tensor<T>(a.shape(), std::move(out)), {a, b}, [a, b](std::span<const T> go) {
    auto da = detail::sink(a);
    auto db = detail::sink(b);
    for (std::size_t i = 0; i < go.size(); ++i) {
      if (!da.empty()) da[i] += go[i];
      if (!db.empty()) db[i] -= go[i];
    }
  });
}

/// a ⊙ b, where b may broadcast with C=1 or H=W=1.
template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& as = a.shape();
  const auto kind = detail::broadcast_kind(as, b.shape(), "mul");
  const auto ad = a.data();
  const auto bd = b.data();
  Buffer<T> out(ad.size());
  detail::for_each_broadcast(kind, as, [&](std::size_t i, std::size_t j) { out[i] = ad[i] * bd[j]; });
  return tape.record(Tensor<T>(as, std::move(out)), {a, b}, [a, b, kind](std::span<const T> go) {
    auto da = detail::sink(a);
    auto db = detail::sink(b);
    const Shape& as = a.shape();
    const auto ad = a.data();
    const auto bd = b.data();
    if (!da.empty()) detail::for_each_broadcast(kind, as, [&](std::size_t i, std::size_t j) { da[i] += go[i] * bd[j]; });
    if (!db.empty()) detail::for_each_broadcast(kind, as, [&](std::size_t i, std::size_t j) { db[j] += go[i] * ad[i]; });
  });
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, T alpha) {
  const auto xd = x.data();
  Buffer<T> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = alpha * xd[i];
  return tape.record(Tensor<T>(x.shape(), std::move(out)), {x}, [x, alpha](std::span<const T> go) {
    auto dx = detail::sink(x);
    for (std::size_t i = 0; i < go.size(); ++i) dx[i] += alpha * go[i];
  });
}

/// Clamp into [lo, hi]; gradient passes only where the input was inside.
template <typename T>
Tensor<T> clamp(Tape<T>& tape, const Tensor<T>& x, T lo, T hi) {
  const auto xd = x.data();
  Buffer<T> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = std::clamp(xd[i], lo, hi);
  return tape.record(Tensor<T>(x.shape(), std::move(out)), {x}, [x, lo, hi](std::span<const T> go) {
    auto dx = detail::sink(x);
    const auto xd = x.data();
    for (std::size_t i = 0; i < go.size(); ++i) {
      if (xd[i] >= lo && xd[i] <= hi) dx[i] += go[i];
    }
  });
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x) {
  double acc = 0;
  for (T v : x.data()) acc += v;
  return tape.record(Tensor<T>(Shape{1, 1, 1, 1}, {T(acc)}), {x}, [x](std::span<const T> go) {
    auto dx = detail::sink(x);
    for (auto& d : dx) d += go[0];
  });
}

template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x) {
  double acc = 0;
  for (T v : x.data()) acc += v;
  const T n = T(x.numel());
  return tape.record(Tensor<T>(Shape{1, 1, 1, 1}, {T(acc / double(x.numel()))}), {x}, [x, n](std::span<const T> go) {
    auto dx = detail::sink(x);
    for (auto& d : dx) d += go[0] / n;
  });
}

/// Mean of squared differences over every element.
template <typename T>
Tensor<T> mse_loss(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same(a.shape(), b.shape(), "mse_loss");
  const auto ad = a.data();
  const auto bd = b.data();
  double acc = 0;
  for (std::size_t i = 0; i < ad.size(); ++i) {
    const double d = double(ad[i]) - double(bd[i]);
    acc += d * d;
  }
  const T n = T(ad.size());
  return tape.record(Tensor<T>(Shape{1, 1, 1, 1}, {T(acc / double(ad.size()))}), {a, b}, [a, b, n](std::span<const T> go) {
    auto da = detail::sink(a);
    auto db = detail::sink(b);
    const auto ad = a.data();
    const auto bd = b.data();
    const T k = T(2) * go[0] / n;
    for (std::size_t i = 0; i < ad.size(); ++i) {
      const T d = k * (ad[i] - bd[i]);
      if (!da.empty()) da[i] += d;
      if (!db.empty()) db[i] -= d;
    }
  });
}

template <typename T>
Tensor<T> global_avg_pool(Tape<T>& tape, const Tensor<T>& x) {
  const Shape& s = x.shape();
  detail::require_batch1(s, "global_avg_pool");
  const std::size_t M = s.plane();
  if (M == 0) throw ShapeError("global_avg_pool: zero spatial extent");
  const auto xd = x.data();
  Buffer<T> out(s.c);
  for (std::size_t c = 0; c < s.c; ++c) {
    double acc = 0;
    for (std::size_t i = 0; i < M; ++i) acc += xd[c * M + i];
    out[c] = T(acc / double(M));
  }
  return tape.record(Tensor<T>(Shape{1, s.c, 1, 1}, std::move(out)), {x}, [x, M](std::span<const T> go) {
    auto dx = detail::sink(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += go[i / M] / T(M);
  });
}

/// 2x2 max pooling, stride 2. Ties resolve to the first element in scan order.
template <typename T>
Tensor<T> maxpool2(Tape<T>& tape, const Tensor<T>& x) {
  const Shape& s = x.shape();
  detail::require_batch1(s, "maxpool2");
  if (s.h % 2 != 0 || s.w % 2 != 0) throw ShapeError("maxpool2: odd spatial size " + s.str());
  const Shape os{1, s.c, s.h / 2, s.w / 2};
  const auto xd = x.data();
  Buffer<T> out(os.numel());
  std::vector<std::size_t> arg(os.numel());
  for (std::size_t c = 0; c < s.c; ++c) {
    for (std::size_t oy = 0; oy < os.h; ++oy) {
      for (std::size_t ox = 0; ox < os.w; ++ox) {
        std::size_t best = (c * s.h + 2 * oy) * s.w + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (c * s.h + 2 * oy + dy) * s.w + 2 * ox + dx;
            if (xd[idx] > xd[best]) best = idx;
          }
        }
        const std::size_t o = (c * os.h + oy) * os.w + ox;
        out[o] = xd[best];
        arg[o] = best;
      }
    }
  }
  return tape.record(Tensor<T>(os, std::move(out)), {x}, [x, arg = std::move(arg)](std::span<const T> go) {
    auto dx = detail::sink(x);
    for (std::size_t o = 0; o < go.size(); ++o) dx[arg[o]] += go[o];
  });
}

template <typename T>
Tensor<T> upsample2_nearest(Tape<T>& tape, const Tensor<T>& x) {
  const Shape& s = x.shape();
  detail::require_batch1(s, "upsample2_nearest");
  const Shape os{1, s.c, s.h * 2, s.w * 2};
  const auto xd = x.data();
  Buffer<T> out(os.numel());
  for (std::size_t c = 0; c < s.c; ++c) {
    for (std::size_t y = 0; y < os.h; ++y) {
      for (std::size_t xx = 0; xx < os.w; ++xx) {
        out[(c * os.h + y) * os.w + xx] = xd[(c * s.h + y / 2) * s.w + xx / 2];
      }
    }
  }
  return tape.record(Tensor<T>(os, std::move(out)), {x}, [x, s, os](std::span<const T> go) {
    auto dx = detail::sink(x);
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t y = 0; y < os.h; ++y) {
        for (std::size_t xx = 0; xx < os.w; ++xx) {
          dx[(c * s.h + y / 2) * s.w + xx / 2] += go[(c * os.h + y) * os.w + xx];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> concat_channels(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  detail::require_batch1(as, "concat_channels");
  if (as.n != bs.n || as.h != bs.h || as.w != bs.w) {
    throw ShapeError("concat_channels: spatial mismatch " + as.str() + " vs " + bs.str());
  }
  Buffer<T> out;
  out.reserve(a.numel() + b.numel());
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  const std::size_t split = a.numel();
  return tape.record(Tensor<T>(Shape{1, as.c + bs.c, as.h, as.w}, std::move(out)), {a, b},
                     [a, b, split](std::span<const T> go) {
                       auto da = detail::sink(a);
                       auto db = detail::sink(b);
                       for (std::size_t i = 0; i < da.size(); ++i) da[i] += go[i];
                       for (std::size_t i = 0; i < db.size(); ++i) db[i] += go[split + i];
                     });
}

template <typename T>
Tensor<T> crop(Tape<T>& tape, const Tensor<T>& x, const Box& box) {
  const Shape& s = x.shape();
  detail::require_batch1(s, "crop");
  detail::require_box(s, box, "crop");
  const Shape os{1, s.c, box.height(), box.width()};
  const auto xd = x.data();
  Buffer<T> out(os.numel());
  for (std::size_t c = 0; c < s.c; ++c) {
    for (std::size_t y = 0; y < os.h; ++y) {
      const T* src = xd.data() + (c * s.h + box.y0 + y) * s.w + box.x0;
      std::copy(src, src + os.w, out.data() + (c * os.h + y) * os.w);
    }
  }
  return tape.record(Tensor<T>(os, std::move(out)), {x}, [x, box, s, os](std::span<const T> go) {
    auto dx = detail::sink(x);
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t y = 0; y < os.h; ++y) {
        for (std::size_t xx = 0; xx < os.w; ++xx) {
          dx[(c * s.h + box.y0 + y) * s.w + box.x0 + xx] += go[(c * os.h + y) * os.w + xx];
        }
      }
    }
  });
}

namespace detail {

template <typename T>
Tensor<T> embed(Tape<T>& tape, const Tensor<T>& base, const Tensor<T>& patch, const Box& box, bool accumulate) {
  const Shape& s = base.shape();
  const Shape& ps = patch.shape();
  const char* op = accumulate ? "add_at" : "paste";
  require_batch1(s, op);
  require_box(s, box, op);
  if (ps.n != 1 || ps.c != s.c || ps.h != box.height() || ps.w != box.width()) {
    throw ShapeError(std::string(op) + ": patch " + ps.str() + " does not fit box in " + s.str());
  }
  Buffer<T> out(base.data().begin(), base.data().end());
  const auto pd = patch.data();
  for (std::size_t c = 0; c < s.c; ++c) {
    for (std::size_t y = 0; y < ps.h; ++y) {
      for (std::size_t x = 0; x < ps.w; ++x) {
        T& dst = out[(c * s.h + box.y0 + y) * s.w + box.x0 + x];
        const T v = pd[(c * ps.h + y) * ps.w + x];
        dst = accumulate ? dst + v : v;
      }
    }
  }
  return tape.record(Tensor<T>(s, std::move(out)), {base, patch},
                     [base, patch, box, s, ps, accumulate](std::span<const T> go) {
                       auto db = sink(base);
                       auto dp = sink(patch);
                       for (std::size_t c = 0; c < s.c; ++c) {
                         for (std::size_t y = 0; y < s.h; ++y) {
                           for (std::size_t x = 0; x < s.w; ++x) {
                             const std::size_t i = (c * s.h + y) * s.w + x;
                             const bool inside = y >= box.y0 && y < box.y1 && x >= box.x0 && x < box.x1;
                             if (inside && !dp.empty()) {
                               dp[(c * ps.h + y - box.y0) * ps.w + x - box.x0] += go[i];
                             }
                             if (!db.empty() && (accumulate || !inside)) db[i] += go[i];
                           }
                         }
                       }
                     });
}

}  // namespace detail

/// Copy of `base` with the box region replaced by `patch`.
template <typename T>
Tensor<T> paste(Tape<T>& tape, const Tensor<T>& base, const Tensor<T>& patch, const Box& box) {
  return detail::embed(tape, base, patch, box, false);
}

/// Copy of `base` with `patch` added into the box region.
template <typename T>
Tensor<T> add_at(Tape<T>& tape, const Tensor<T>& base, const Tensor<T>& patch, const Box& box) {
  return detail::embed(tape, base, patch, box, true);
}

template <typename T>
struct Padded {
  Tensor<T> tensor;
  std::size_t height = 0;  // size before padding
  std::size_t width = 0;

  Box original() const { return Box{0, 0, height, width}; }
};

/// Replicate-pads bottom/right so H and W become multiples of `multiple`.
template <typename T>
Padded<T> pad_to_multiple(Tape<T>& tape, const Tensor<T>& x, std::size_t multiple) {
  const Shape& s = x.shape();
  detail::require_batch1(s, "pad_to_multiple");
  if (multiple == 0) throw ShapeError("pad_to_multiple: multiple must be positive");
  if (s.h == 0 || s.w == 0) throw ShapeError("pad_to_multiple: empty input");
  const std::size_t ph = (s.h + multiple - 1) / multiple * multiple;
  const std::size_t pw = (s.w + multiple - 1) / multiple * multiple;
  if (ph == s.h && pw == s.w) return {x, s.h, s.w};
  const Shape os{1, s.c, ph, pw};
  const auto xd = x.data();
  Buffer<T> out(os.numel());
  for (std::size_t c = 0; c < s.c; ++c) {
    for (std::size_t y = 0; y < ph; ++y) {
      const std::size_t sy = std::min(y, s.h - 1);
      for (std::size_t xx = 0; xx < pw; ++xx) {
        out[(c * ph + y) * pw + xx] = xd[(c * s.h + sy) * s.w + std::min(xx, s.w - 1)];
      }
    }
  }
  Tensor<T> y = tape.record(Tensor<T>(os, std::move(out)), {x}, [x, s, os](std::span<const T> go) {
    auto dx = detail::sink(x);
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t y = 0; y < os.h; ++y) {
        const std::size_t sy = std::min(y, s.h - 1);
        for (std::size_t xx = 0; xx < os.w; ++xx) {
          dx[(c * s.h + sy) * s.w + std::min(xx, s.w - 1)] += go[(c * os.h + y) * os.w + xx];
        }
      }
    }
  });
  return {std::move(y), s.h, s.w};
}

}  // namespace sguie
