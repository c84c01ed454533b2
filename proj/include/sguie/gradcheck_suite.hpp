#pragma once

// Finite-difference sweep over every differentiable primitive, each on a
// handful of random shapes. Shared by the test suites and `sguie gradcheck`.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sguie/gradcheck.hpp"
#include "sguie/ops.hpp"

namespace sguie {

struct OpCheck {
  std::string op;
  double max_rel_error = 0.0;
  std::size_t shapes = 0;
};

namespace detail {

template <typename T>
Tensor<T> uniform_leaf(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<T> v(s.numel());
  for (auto& x : v) x = static_cast<T>(d(rng));
  return Tensor<T>::leaf(s, std::move(v));
}

// |x| >= margin so a finite-difference step never straddles a kink at 0.
template <typename T>
Tensor<T> signed_leaf(Shape s, std::mt19937_64& rng, double margin = 0.05) {
  std::uniform_real_distribution<double> d(margin, 1.0);
  std::bernoulli_distribution sign(0.5);
  std::vector<T> v(s.numel());
  for (auto& x : v) x = static_cast<T>(sign(rng) ? d(rng) : -d(rng));
  return Tensor<T>::leaf(s, std::move(v));
}

// Pairwise-distinct values, so max-pool argmax is stable under perturbation.
template <typename T>
Tensor<T> distinct_leaf(Shape s, std::mt19937_64& rng, double gap = 0.02) {
  std::vector<T> v(s.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(gap * static_cast<double>(i) - 0.5);
  std::shuffle(v.begin(), v.end(), rng);
  return Tensor<T>::leaf(s, std::move(v));
}

inline Shape random_shape(std::mt19937_64& rng, bool even = false) {
  std::uniform_int_distribution<std::size_t> c(1, 4);
  std::uniform_int_distribution<std::size_t> hw(2, 7);
  Shape s{1, c(rng), hw(rng), hw(rng)};
  if (even) {
    s.h += s.h % 2;
    s.w += s.w % 2;
  }
  return s;
}

}  // namespace detail

/// Runs grad_check for every primitive on `shapes_per_op` random shapes.
template <typename T>
std::vector<OpCheck> op_gradcheck_suite(double eps, std::size_t shapes_per_op = 5, std::uint64_t seed = 2024) {
  using Inputs = std::span<const Tensor<T>>;
  std::mt19937_64 rng(seed);
  std::vector<OpCheck> results;

  auto run = [&](const std::string& name, auto&& make_case) {
    OpCheck check{name, 0.0, 0};
    for (std::size_t k = 0; k < shapes_per_op; ++k) {
      auto c = make_case();
      GradCheckOptions opt;
      opt.eps = eps;
      opt.seed = rng();
      opt.projection = std::move(c.projection);
      const auto r = grad_check<T>(c.fn, std::move(c.inputs), opt);
      check.max_rel_error = std::max(check.max_rel_error, r.max_rel_error);
      ++check.shapes;
    }
    results.push_back(check);
  };
  using Fn = std::function<Tensor<T>(Tape<T>&, Inputs)>;
  struct Case {
    Fn fn;
    std::vector<Tensor<T>> inputs;
    std::vector<double> projection = {};
  };

  for (std::size_t k : {std::size_t{1}, std::size_t{3}}) {
    for (std::size_t stride : {std::size_t{1}, std::size_t{2}}) {
      if (k == 1 && stride == 2) continue;
      const std::size_t pad = k / 2;
      run("conv2d_k" + std::to_string(k) + "_s" + std::to_string(stride), [&]() -> Case {
        Shape s = detail::random_shape(rng);
        if (stride == 2) {
          s.h += (s.h % 2 == 0);
          s.w += (s.w % 2 == 0);
        }
        std::uniform_int_distribution<std::size_t> co(1, 4);
        const Shape ws{co(rng), s.c, k, k};
        // Positive operands keep every gradient entry a sum of like-signed
        // terms. Small inputs keep the f32 partial sums, and with them the
        // rounding noise, well below a single weight tap; the bias cancels
        // the mean response.
        const double fan = static_cast<double>(s.c * k * k);
        auto w = detail::uniform_leaf<T>(ws, rng, 0.5 / fan, 1.0 / fan);
        std::vector<T> bias(ws.n);
        const std::size_t per_out = s.c * k * k;
        for (std::size_t o = 0; o < ws.n; ++o) {
          double acc = 0;
          for (std::size_t i = 0; i < per_out; ++i) acc += w.data()[o * per_out + i];
          bias[o] = static_cast<T>(-0.075 * acc);
        }
        return {[stride, pad](Tape<T>& t, Inputs in) { return conv2d(t, in[0], in[1], in[2], stride, pad); },
                {detail::uniform_leaf<T>(s, rng, 0.05, 0.1), w, Tensor<T>::leaf(Shape{1, ws.n, 1, 1}, std::move(bias))}};
      });
    }
  }

  // Two-level inputs probed with two-level weights: every term of the
  // normalization gradient contributes, yet no entry of d/dx comes near zero,
  // which an f32 central difference could not resolve.
  run("batchnorm2d_train", [&]() -> Case {
    std::uniform_int_distribution<std::size_t> c(1, 4);
    std::uniform_int_distribution<int> side(0, 1);
    const Shape s{1, c(rng), std::size_t{4} << side(rng), std::size_t{4} << side(rng)};
    const std::size_t M = s.plane();
    std::uniform_real_distribution<double> jitter(-0.05, 0.05), mu(-0.5, 0.5), spread(0.05, 0.1);
    std::vector<T> x(s.numel());
    std::vector<double> r(s.numel());
    std::vector<std::size_t> order(M);
    for (std::size_t ch = 0; ch < s.c; ++ch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      const double m = mu(rng), sd = spread(rng);
      for (std::size_t j = 0; j < M; ++j) {
        const bool upper = j < M / 2;
        const std::size_t rank = j % (M / 2);
        // 7/8 of the upper half and 5/8 of the lower half get the heavy weight.
        const bool heavy = rank * 8 < (M / 2) * (upper ? 7 : 5);
        const std::size_t i = ch * M + order[j];
        x[i] = static_cast<T>(m + sd * ((upper ? 1.0 : -1.0) + jitter(rng)));
        r[i] = heavy ? 1.5 : 0.5;
      }
    }
    auto stats = std::make_shared<RunningStats<T>>(s.c);
    return {[stats](Tape<T>& t, Inputs in) { return batchnorm2d(t, in[0], in[1], in[2], *stats, Mode::Train); },
            {Tensor<T>::leaf(s, std::move(x)), detail::uniform_leaf<T>(Shape{1, s.c, 1, 1}, rng, 0.5, 1.0),
             detail::uniform_leaf<T>(Shape{1, s.c, 1, 1}, rng, -0.1, 0.1)},
            std::move(r)};
  });
  run("batchnorm2d_eval", [&]() -> Case {
    Shape s = detail::random_shape(rng);
    auto stats = std::make_shared<RunningStats<T>>(s.c);
    std::uniform_real_distribution<double> d(0.5, 2.0);
    // Running means below every input keep the normalized values positive.
    for (std::size_t c = 0; c < s.c; ++c) {
      stats->mean[c] = static_cast<T>(-d(rng));
      stats->var[c] = static_cast<T>(d(rng));
    }
    return {[stats](Tape<T>& t, Inputs in) { return batchnorm2d(t, in[0], in[1], in[2], *stats, Mode::Eval); },
            {detail::uniform_leaf<T>(s, rng, 0.0, 1.0), detail::uniform_leaf<T>(Shape{1, s.c, 1, 1}, rng, 0.5, 1.0),
             detail::uniform_leaf<T>(Shape{1, s.c, 1, 1}, rng, -0.1, 0.1)}};
  });
  run("relu", [&]() -> Case {
    return {[](Tape<T>& t, Inputs in) { return relu(t, in[0]); },
            {detail::signed_leaf<T>(detail::random_shape(rng), rng)}};
  });
  run("sigmoid", [&]() -> Case {
    return {[](Tape<T>& t, Inputs in) { return sigmoid(t, in[0]); },
            {detail::uniform_leaf<T>(detail::random_shape(rng), rng, -1.5, 1.5)}};
  });
  run("clamp", [&]() -> Case {
    // Values stay at least 0.05 away from both bounds.
    auto x = detail::signed_leaf<T>(detail::random_shape(rng), rng);
    for (auto& v : x.mutable_data()) {
      if (std::abs(v) > T(0.45) && std::abs(v) < T(0.55)) v = v > 0 ? T(0.7) : T(-0.7);
    }
    return {[](Tape<T>& t, Inputs in) { return clamp(t, in[0], T(-0.5), T(0.5)); }, {x}};
  });
  run("scale", [&]() -> Case {
    return {[](Tape<T>& t, Inputs in) { return scale(t, in[0], T(-1.75)); },
            {detail::uniform_leaf<T>(detail::random_shape(rng), rng)}};
  });

  auto binary = [&](const std::string& name, auto op, int broadcast) {
    run(name, [&, op, broadcast]() -> Case {
      const Shape a = detail::random_shape(rng);
      Shape b = a;
      if (broadcast == 1) b.c = 1;
      if (broadcast == 2) b.h = b.w = 1;
      return {[op](Tape<T>& t, Inputs in) { return op(t, in[0], in[1]); },
              {detail::uniform_leaf<T>(a, rng, 0.5, 1.0), detail::uniform_leaf<T>(b, rng, 0.5, 1.0)}};
    });
  };
  auto add_op = [](Tape<T>& t, const Tensor<T>& a, const Tensor<T>& b) { return add(t, a, b); };
  auto mul_op = [](Tape<T>& t, const Tensor<T>& a, const Tensor<T>& b) { return mul(t, a, b); };
  auto sub_op = [](Tape<T>& t, const Tensor<T>& a, const Tensor<T>& b) { return sub(t, a, b); };
  binary("elem_add", add_op, 0);
  binary("elem_add_bcast_channel", add_op, 1);
  binary("elem_add_bcast_spatial", add_op, 2);
  binary("elem_mul", mul_op, 0);
  binary("elem_mul_bcast_channel", mul_op, 1);
  binary("elem_mul_bcast_spatial", mul_op, 2);
  binary("elem_sub", sub_op, 0);

  run("sum", [&]() -> Case {
    return {[](Tape<T>& t, Inputs in) { return sum(t, in[0]); },
            {detail::uniform_leaf<T>(detail::random_shape(rng), rng)}};
  });
  run("mean", [&]() -> Case {
    return {[](Tape<T>& t, Inputs in) { return mean(t, in[0]); },
            {detail::uniform_leaf<T>(detail::random_shape(rng), rng)}};
  });
  run("mse_loss", [&]() -> Case {
    const Shape s = detail::random_shape(rng);
    auto a = detail::uniform_leaf<T>(s, rng);
    // Residuals of 0.05..0.1 keep the loss small next to its gradient.
    auto offset = detail::signed_leaf<T>(s, rng, 0.5);
    std::vector<T> bv(s.numel());
    for (std::size_t i = 0; i < bv.size(); ++i) bv[i] = a.data()[i] + T(0.1) * offset.data()[i];
    return {[](Tape<T>& t, Inputs in) { return mse_loss(t, in[0], in[1]); },
            {a, Tensor<T>::leaf(s, std::move(bv))}};
  });
  run("global_avg_pool", [&]() -> Case {
    return {[](Tape<T>& t, Inputs in) { return global_avg_pool(t, in[0]); },
            {detail::uniform_leaf<T>(detail::random_shape(rng), rng)}};
  });
  run("maxpool2", [&]() -> Case {
    return {[](Tape<T>& t, Inputs in) { return maxpool2(t, in[0]); },
            {detail::distinct_leaf<T>(detail::random_shape(rng, true), rng)}};
  });
  run("upsample2_nearest", [&]() -> Case {
    return {[](Tape<T>& t, Inputs in) { return upsample2_nearest(t, in[0]); },
            {detail::uniform_leaf<T>(detail::random_shape(rng), rng)}};
  });
  run("concat_channels", [&]() -> Case {
    const Shape a = detail::random_shape(rng);
    Shape b = a;
    b.c = 1 + a.c % 3;
    return {[](Tape<T>& t, Inputs in) { return concat_channels(t, in[0], in[1]); },
            {detail::uniform_leaf<T>(a, rng), detail::uniform_leaf<T>(b, rng)}};
  });

  auto random_box = [&](const Shape& s) {
    std::uniform_int_distribution<std::size_t> y0(0, s.h - 1), x0(0, s.w - 1);
    Box b{y0(rng), x0(rng), 0, 0};
    std::uniform_int_distribution<std::size_t> y1(b.y0 + 1, s.h), x1(b.x0 + 1, s.w);
    b.y1 = y1(rng);
    b.x1 = x1(rng);
    return b;
  };
  run("crop", [&]() -> Case {
    const Shape s = detail::random_shape(rng);
    const Box b = random_box(s);
    return {[b](Tape<T>& t, Inputs in) { return crop(t, in[0], b); }, {detail::uniform_leaf<T>(s, rng)}};
  });
  run("paste", [&]() -> Case {
    const Shape s = detail::random_shape(rng);
    const Box b = random_box(s);
    return {[b](Tape<T>& t, Inputs in) { return paste(t, in[0], in[1], b); },
            {detail::uniform_leaf<T>(s, rng), detail::uniform_leaf<T>(Shape{1, s.c, b.height(), b.width()}, rng)}};
  });
  run("add_at", [&]() -> Case {
    const Shape s = detail::random_shape(rng);
    const Box b = random_box(s);
    return {[b](Tape<T>& t, Inputs in) { return add_at(t, in[0], in[1], b); },
            {detail::uniform_leaf<T>(s, rng), detail::uniform_leaf<T>(Shape{1, s.c, b.height(), b.width()}, rng)}};
  });
  run("pad_to_multiple", [&]() -> Case {
    return {[](Tape<T>& t, Inputs in) { return pad_to_multiple(t, in[0], 4).tensor; },
            {detail::uniform_leaf<T>(detail::random_shape(rng), rng)}};
  });
  return results;
}

}  // namespace sguie
