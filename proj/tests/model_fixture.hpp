#pragma once

// Model fixtures shared by the unit and acceptance tests.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "sguie/gradcheck.hpp"
#include "sguie/model.hpp"
#include "support.hpp"

namespace sguie::testing {

inline HyperConfig small_config() {
  HyperConfig cfg;
  cfg.base_channels = 8;
  cfg.reduction = 4;
  cfg.srm_stem_channels = 6;
  cfg.unet_channels = 4;
  return cfg;
}

template <typename T>
SguieParams<T> make_params(const HyperConfig& cfg, InitMode mode, std::uint64_t seed = 7) {
  auto p = SguieParams<T>::make(cfg);
  InitOptions opt;
  opt.mode = mode;
  opt.seed = seed;
  initialize(p, opt);
  return p;
}

template <typename T>
Tensor<T> image(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  return Tensor<T>(Shape{1, 3, h, w}, uniform<T>(3 * h * w, rng, 0.0, 1.0));
}

template <typename T>
Tensor<T> features(std::size_t c, std::size_t h, std::size_t w, std::mt19937_64& rng) {
  return Tensor<T>(Shape{1, c, h, w}, uniform<T>(c * h * w, rng));
}

/// Two disjoint categories: fish blob on the upper left, sea floor along the bottom.
inline SemanticMask two_region_mask(std::size_t h, std::size_t w) {
  SemanticMask m{h, w, std::vector<std::uint8_t>(h * w, 0)};
  for (std::size_t y = 1; y < h / 2; ++y) {
    for (std::size_t x = 1; x < w / 2 + 1; ++x) m.labels[y * w + x] = 6;
  }
  for (std::size_t y = h / 2 + 1; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) m.labels[y * w + x] = (x + y) % 5 == 0 ? 0 : 7;
  }
  return m;
}

/// Vertical stripes of every SUIM category, each at least 4 pixels wide.
inline SemanticMask all_categories_mask(std::size_t h, std::size_t w) {
  SemanticMask m{h, w, std::vector<std::uint8_t>(h * w, 0)};
  const std::size_t stripe = w / 8;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) m.labels[y * w + x] = static_cast<std::uint8_t>(std::min<std::size_t>(x / stripe, 7));
  }
  return m;
}

template <typename T>
std::vector<Tensor<T>> parameter_values(SguieParams<T>& p) {
  std::vector<Tensor<T>> out;
  for (auto* q : p.parameters()) out.push_back(q->value);
  return out;
}

/// Well-conditioned f64 model for finite-difference checks: small random
/// biases keep relu pre-activations off their kinks, a shifted batch-norm beta
/// keeps the units after it active, and scaled-down CAM weights keep the deep
/// residual chain near unit gain.
inline SguieParams<double> conditioned_params(std::uint64_t seed) {
  HyperConfig cfg = small_config();
  cfg.srm_stem_channels = 8;
  cfg.unet_channels = 8;
  auto p = make_params<double>(cfg, InitMode::Kaiming, seed);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> bias(-0.1, 0.1);
  for (auto& [name, q] : p.named_parameters()) {
    auto d = q->value.mutable_data();
    const auto ends_with = [&](const std::string& s) {
      return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
    };
    if (ends_with(".beta")) {
      std::fill(d.begin(), d.end(), 2.0);
    } else if (ends_with(".bias")) {
      for (auto& v : d) v = bias(rng);
    } else if (ends_with(".weight") && name.rfind("cam.", 0) == 0) {
      for (auto& v : d) v *= 0.7;
    }
  }
  return p;
}

inline GradCheckOptions whole_model_options() {
  GradCheckOptions opt;
  opt.eps = 1e-5;
  opt.max_per_input = 1;
  opt.largest = true;
  opt.richardson = true;
  opt.kink_tolerance = 1e-5;
  return opt;
}

}  // namespace sguie::testing
