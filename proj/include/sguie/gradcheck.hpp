#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "sguie/errors.hpp"
#include "sguie/tensor.hpp"

namespace sguie {

struct GradCheckOptions {
  double eps = 1e-3;
  /// Elements checked per input; 0 checks all of them.
  std::size_t max_per_input = 0;
  std::uint64_t seed = 0x5eed;
  /// Range of the random projection weights. A one-signed range avoids
  /// cancellation in the projected gradient, which matters in f32.
  double projection_lo = 0.5;
  double projection_hi = 1.5;
  /// Explicit projection weights; overrides the random draw when non-empty.
  std::vector<double> projection;
  /// Check the entries with the largest analytic magnitude instead of a
  /// random subset (only meaningful with max_per_input).
  bool largest = false;
  /// Richardson extrapolation of the central differences at eps and eps/2,
  /// (4 D(eps/2) - D(eps)) / 3, which cancels the O(eps^2) truncation term.
  bool richardson = false;
  /// With richardson: when D(eps) and D(eps/2) disagree by more than this
  /// (relative), a kink lies inside the stencil and the step shrinks 10x, up
  /// to `kink_retries` times. 0 disables.
  double kink_tolerance = 0.0;
  int kink_retries = 3;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::vector<double> per_input;  // max relative error per input tensor
  std::size_t checked = 0;
};

/// Compares reverse-mode gradients against central differences.
///
/// `fn(tape, inputs)` maps the inputs to any tensor y. A fixed random
/// projection r reduces y to L = sum(r * y), accumulated in double, and both
/// gradients are taken of L. The central difference uses the perturbation
/// actually representable in T. Relative error per element is
/// |a - n| / max(|a|, |n|, 1e-8). Inputs must be leaves that require grad.
template <typename T, typename Fn>
GradCheckResult grad_check(Fn&& fn, std::vector<Tensor<T>> inputs, const GradCheckOptions& opt = {}) {
  if (!(opt.eps > 0)) throw UsageError("grad_check: eps must be positive");
  for (const auto& in : inputs) {
    if (!in.requires_grad()) throw UsageError("grad_check: inputs must be gradient leaves");
  }
  std::mt19937_64 rng(opt.seed);

  for (auto& in : inputs) in.zero_grad();
  std::vector<T> r;
  {
    Tape<T> tape;
    Tensor<T> y = fn(tape, std::span<const Tensor<T>>(inputs));
    r.resize(y.numel());
    if (!opt.projection.empty()) {
      if (opt.projection.size() != r.size()) throw UsageError("grad_check: projection size does not match output");
      std::copy(opt.projection.begin(), opt.projection.end(), r.begin());
    } else if (r.size() == 1) {
      r[0] = T(1);
    } else {
      std::uniform_real_distribution<double> dist(opt.projection_lo, opt.projection_hi);
      for (auto& v : r) v = static_cast<T>(dist(rng));
    }
    bool direct = false;
    for (auto& in : inputs) {
      if (in.same_storage(y)) {
        auto g = in.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += r[i];
        direct = true;
      }
    }
    if (!direct && y.requires_grad()) tape.backward(y, r);
  }

  auto evaluate = [&]() {
    Tape<T> tape(false);
    Tensor<T> y = fn(tape, std::span<const Tensor<T>>(inputs));
    return std::vector<T>(y.data().begin(), y.data().end());
  };

  GradCheckResult result;
  result.per_input.assign(inputs.size(), 0.0);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor<T>& in = inputs[k];
    const std::vector<T> analytic(in.grad().begin(), in.grad().end());
    std::vector<std::size_t> idx(in.numel());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (opt.max_per_input != 0 && idx.size() > opt.max_per_input) {
      if (opt.largest) {
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t x, std::size_t y) { return std::abs(analytic[x]) > std::abs(analytic[y]); });
      } else {
        std::shuffle(idx.begin(), idx.end(), rng);
      }
      idx.resize(opt.max_per_input);
      std::sort(idx.begin(), idx.end());
    }
    auto data = in.mutable_data();
    auto central = [&](std::size_t i, double eps) {
      const T saved = data[i];
      const T plus = static_cast<T>(saved + static_cast<T>(eps));
      const T minus = static_cast<T>(saved - static_cast<T>(eps));
      data[i] = plus;
      const auto yp = evaluate();
      data[i] = minus;
      const auto ym = evaluate();
      data[i] = saved;
      // Differencing per element first keeps unaffected outputs exactly out
      // of the sum instead of cancelling two large totals.
      double delta = 0.0;
      for (std::size_t j = 0; j < yp.size(); ++j) {
        delta += static_cast<double>(r[j]) * (static_cast<double>(yp[j]) - static_cast<double>(ym[j]));
      }
      return delta / (static_cast<double>(plus) - static_cast<double>(minus));
    };
    for (std::size_t i : idx) {
      double numeric = central(i, opt.eps);
      if (opt.richardson) {
        double step = opt.eps;
        for (int retry = 0;; ++retry) {
          const double half = central(i, step / 2.0);
          const double gap = std::abs(half - numeric) / std::max({std::abs(half), std::abs(numeric), 1e-8});
          if (opt.kink_tolerance <= 0.0 || gap <= opt.kink_tolerance || retry >= opt.kink_retries) {
            numeric = (4.0 * half - numeric) / 3.0;
            break;
          }
          step /= 10.0;
          numeric = central(i, step);
        }
      }
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      result.per_input[k] = std::max(result.per_input[k], rel);
      ++result.checked;
    }
    result.max_rel_error = std::max(result.max_rel_error, result.per_input[k]);
  }
  return result;
}

}  // namespace sguie
