#pragma once

#include <cmath>
#include <vector>

#include "latsplit/errors.hpp"
#include "latsplit/tensor.hpp"

namespace latsplit {

// Normalised 1-D Gaussian taps, radius ceil(3 sigma).
inline std::vector<double> gaussian_taps(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> taps(2 * radius + 1);
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    taps[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
    sum += taps[k + radius];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// Half-sample symmetric reflection (d c b a | a b c d | d c b a), period 2n.
inline int reflect_index(int i, int n) {
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

// Channelwise separable Gaussian blur with reflect padding. The operator is
// symmetric, so it is also its own adjoint for backpropagation. sigma == 0
// returns the input unchanged.
template <typename Scalar>
Tensor<Scalar> blur_lighting(const Tensor<Scalar>& z, double sigma) {
  if (!(sigma >= 0.0)) throw ParameterError("blur_lighting: sigma must be non-negative");
  if (sigma == 0.0) return z;
  const std::vector<double> taps = gaussian_taps(sigma);
  const int radius = static_cast<int>(taps.size() / 2);
  const Shape& s = z.shape();
  Tensor<Scalar> tmp(s);
  Tensor<Scalar> out(s);
  std::vector<double> line;
  for (int ch = 0; ch < s.c; ++ch) {
    const Scalar* src = z.matrix().col(ch).data();
    Scalar* mid = tmp.matrix().col(ch).data();
    Scalar* dst = out.matrix().col(ch).data();
    for (int b = 0; b < s.n; ++b) {
      const long base = static_cast<long>(b) * s.h * s.w;
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
          double acc = 0.0;
          for (int k = -radius; k <= radius; ++k) acc += taps[k + radius] * src[base + y * s.w + reflect_index(x + k, s.w)];
          mid[base + y * s.w + x] = static_cast<Scalar>(acc);
        }
      }
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
          double acc = 0.0;
          for (int k = -radius; k <= radius; ++k) acc += taps[k + radius] * mid[base + reflect_index(y + k, s.h) * s.w + x];
          dst[base + y * s.w + x] = static_cast<Scalar>(acc);
        }
      }
    }
  }
  return out;
}

}  // namespace latsplit
