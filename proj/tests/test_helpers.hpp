#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "wtalc/tensor.hpp"

namespace wtalc::testing {

inline Sequence random_sequence(std::size_t dim, std::size_t length, Rng& rng, double sigma = 1.0) {
  std::normal_distribution<double> n(0.0, sigma);
  Sequence s(dim, length);
  for (double& v : s.flat()) v = n(rng);
  return s;
}

inline Vector random_vector(std::size_t n, Rng& rng, double sigma = 1.0) {
  std::normal_distribution<double> d(0.0, sigma);
  Vector v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("wtalc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace wtalc::testing
