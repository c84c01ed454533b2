#pragma once

#include <cmath>
#include <span>
#include <string>

#include "sguie/errors.hpp"
#include "sguie/tensor.hpp"

namespace sguie {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update over every parameter. Gradients are left in
/// place; the caller zeroes them before the next accumulation.
template <typename T>
void adam_step(std::span<Parameter<T>* const> params, const AdamConfig& cfg) {
  if (!(cfg.lr > 0)) throw UsageError("adam_step: learning rate must be positive");
  for (Parameter<T>* p : params) {
    if (!p->value.has_grad()) throw UsageError("adam_step: parameter has no gradient");
  }
  for (Parameter<T>* p : params) {
    p->step_count += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p->step_count));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p->step_count));
    auto w = p->value.mutable_data();
    const auto g = p->value.grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      const double m = cfg.beta1 * p->adam_m[i] + (1.0 - cfg.beta1) * gi;
      const double v = cfg.beta2 * p->adam_v[i] + (1.0 - cfg.beta2) * gi * gi;
      p->adam_m[i] = static_cast<T>(m);
      p->adam_v[i] = static_cast<T>(v);
      const double update = cfg.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
      w[i] = static_cast<T>(w[i] - update);
    }
  }
}

/// Linear decay to zero starting at epoch 0: lr0 * (1 - epoch / total).
inline double lr_schedule(int epoch, int total, double lr0) {
  if (total <= 0 || epoch < 0 || epoch >= total) {
    throw UsageError("lr_schedule: epoch " + std::to_string(epoch) + " outside [0, " +
                     std::to_string(total) + ")");
  }
  return lr0 * (1.0 - static_cast<double>(epoch) / static_cast<double>(total));
}

}  // namespace sguie
