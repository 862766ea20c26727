#pragma once

#include <filesystem>

#include "latsplit/tensor.hpp"

namespace latsplit {

// 8-bit PNG without alpha. One-channel tensors are written as grayscale,
// three-channel tensors as RGB. Values are clamped to [0, 1] and rounded.
void write_png(const std::filesystem::path& path, const Image& image);

// Reads an 8-bit RGB or grayscale PNG into an H x W x 3 tensor in [0, 1].
Image read_png(const std::filesystem::path& path);

inline float quantize_8bit(float v) {
  const float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return static_cast<float>(static_cast<int>(c * 255.0f + 0.5f)) / 255.0f;
}

}  // namespace latsplit
