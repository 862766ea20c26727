#pragma once

#include <cstdint>
#include <vector>

#include "latsplit/tensor.hpp"

namespace latsplit {

// Single-channel multiplicative illumination field, H x W x 1.
using ShadingField = Tensor<float>;

struct ShadingOptions {
  float lo = 0.2f;
  float hi = 1.5f;           // s_max
  float smooth_bound = 0.05f;
};

// Label map behind an albedo: 0 is the base color, k > 0 the k-th painted shape.
struct AlbedoLayout {
  int height = 0;
  int width = 0;
  int shape_count = 0;
  std::vector<int> labels;  // row-major, height * width
};

struct SceneSample {
  Image albedo;
  std::vector<Image> images;
  std::vector<std::uint64_t> light_seeds;
  std::uint64_t seed = 0;

  int lights() const { return static_cast<int>(images.size()); }
};

inline constexpr int kImageAlignment = 4;
inline constexpr float kAlbedoMin = 0.05f;
inline constexpr float kAlbedoMax = 0.95f;
inline constexpr float kTextureAmplitude = 0.03f;

// Throws DimensionError unless height, width >= 8 and both divisible by `alignment`.
void validate_dimensions(int height, int width, int alignment = kImageAlignment);

// Throws DimensionError/ParameterError when `image` violates the ImageTensor invariants.
void validate_image(const Image& image, int alignment = kImageAlignment);

AlbedoLayout gen_albedo_layout(std::uint64_t seed, int height, int width);
Image gen_albedo(std::uint64_t seed, int height, int width);
ShadingField gen_shading(std::uint64_t seed, int height, int width, const ShadingOptions& options = {});
Image compose_image(const Image& albedo, const ShadingField& shading);
SceneSample gen_scene(std::uint64_t seed, int k, int height, int width);

// Number of 4-connected components over the non-base labels of a layout.
int count_shape_regions(const AlbedoLayout& layout);

}  // namespace latsplit
