#pragma once

// Shared fixtures for the test binaries.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "sguie/tensor.hpp"

namespace sguie::testing {

template <typename T>
std::vector<T> uniform(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(d(rng));
  return v;
}

template <typename T>
Tensor<T> random_leaf(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  return Tensor<T>::leaf(s, uniform<T>(s.numel(), rng, lo, hi));
}

/// Random values with |x| >= margin, so kinks (relu, clamp) are never
/// straddled by a finite-difference step.
template <typename T>
Tensor<T> random_leaf_away_from_zero(Shape s, std::mt19937_64& rng, double margin = 0.05) {
  std::uniform_real_distribution<double> d(margin, 1.0);
  std::bernoulli_distribution sign(0.5);
  std::vector<T> v(s.numel());
  for (auto& x : v) x = static_cast<T>(sign(rng) ? d(rng) : -d(rng));
  return Tensor<T>::leaf(s, std::move(v));
}

/// Distinct values spaced at least `gap` apart in random order (max-pool ties).
template <typename T>
Tensor<T> random_leaf_distinct(Shape s, std::mt19937_64& rng, double gap = 0.01) {
  std::vector<T> v(s.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(gap * static_cast<double>(i) - 0.5);
  std::shuffle(v.begin(), v.end(), rng);
  return Tensor<T>::leaf(s, std::move(v));
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("sguie_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace sguie::testing
