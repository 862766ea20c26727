#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "latsplit/tensor.hpp"

namespace test {

inline latsplit::Tensor<double> random_tensor(latsplit::Shape s, unsigned seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  latsplit::Tensor<double> t(s);
  for (long i = 0; i < t.size(); ++i) t.matrix().data()[i] = dist(gen);
  return t;
}

inline latsplit::Tensor<double> from_values(std::initializer_list<double> v) {
  latsplit::Tensor<double> t(1, 1, static_cast<int>(v.size()), 1);
  int i = 0;
  for (double x : v) t(0, 0, i++, 0) = x;
  return t;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("latsplit_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace test
