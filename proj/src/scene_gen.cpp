#include "latsplit/scene_gen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "latsplit/random.hpp"

namespace latsplit {

namespace {

constexpr int kMinShapes = 4;
constexpr int kMaxShapes = 12;
constexpr int kMaxLayoutAttempts = 64;

struct ShapeSpec {
  bool ellipse = false;
  double cx = 0, cy = 0, rx = 0, ry = 0;
};

bool covers(const ShapeSpec& s, double x, double y) {
  const double dx = (x - s.cx) / s.rx;
  const double dy = (y - s.cy) / s.ry;
  if (s.ellipse) return dx * dx + dy * dy <= 1.0;
  return std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
}

int find_root(std::vector<int>& parent, int i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

AlbedoLayout draw_layout(Rng& rng, int height, int width) {
  AlbedoLayout layout;
  layout.height = height;
  layout.width = width;
  layout.shape_count = uniform_int(rng, kMinShapes, kMaxShapes);
  layout.labels.assign(static_cast<size_t>(height) * width, 0);
  for (int k = 1; k <= layout.shape_count; ++k) {
    ShapeSpec s;
    s.ellipse = uniform(rng, 0.0, 1.0) < 0.5;
    s.cx = uniform(rng, 0.0, width);
    s.cy = uniform(rng, 0.0, height);
    s.rx = uniform(rng, 0.08, 0.25) * width;
    s.ry = uniform(rng, 0.08, 0.25) * height;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        if (covers(s, x + 0.5, y + 0.5)) layout.labels[static_cast<size_t>(y) * width + x] = k;
      }
    }
  }
  return layout;
}

}  // namespace

void validate_dimensions(int height, int width, int alignment) {
  if (height < 8 || width < 8 || height % alignment != 0 || width % alignment != 0) {
    throw DimensionError("image dimensions " + std::to_string(height) + "x" + std::to_string(width) +
                         " must be >= 8 and divisible by " + std::to_string(alignment));
  }
}

void validate_image(const Image& image, int alignment) {
  validate_dimensions(image.height(), image.width(), alignment);
  if (image.channels() != 3 || image.batch() != 1) {
    throw DimensionError("expected a single H x W x 3 image, got " + to_string(image.shape()));
  }
  if (!image.all_finite() || image.matrix().minCoeff() < 0.0f || image.matrix().maxCoeff() > 1.0f) {
    throw ParameterError("image values must lie in [0, 1]");
  }
}

int count_shape_regions(const AlbedoLayout& layout) {
  const int n = layout.height * layout.width;
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto unite = [&](int a, int b) {
    a = find_root(parent, a);
    b = find_root(parent, b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  };
  for (int y = 0; y < layout.height; ++y) {
    for (int x = 0; x < layout.width; ++x) {
      const int i = y * layout.width + x;
      if (layout.labels[i] == 0) continue;
      if (x + 1 < layout.width && layout.labels[i + 1] == layout.labels[i]) unite(i, i + 1);
      if (y + 1 < layout.height && layout.labels[i + layout.width] == layout.labels[i]) unite(i, i + layout.width);
    }
  }
  int regions = 0;
  for (int i = 0; i < n; ++i) {
    if (layout.labels[i] != 0 && find_root(parent, i) == i) ++regions;
  }
  return regions;
}

AlbedoLayout gen_albedo_layout(std::uint64_t seed, int height, int width) {
  validate_dimensions(height, width);
  Rng rng(mix_seed(seed, 0xA1BED0));
  AlbedoLayout layout;
  for (int attempt = 0; attempt < kMaxLayoutAttempts; ++attempt) {
    layout = draw_layout(rng, height, width);
    const int regions = count_shape_regions(layout);
    if (regions >= kMinShapes && regions <= kMaxShapes) return layout;
  }
  return layout;
}

Image gen_albedo(std::uint64_t seed, int height, int width) {
  const AlbedoLayout layout = gen_albedo_layout(seed, height, width);
  Rng rng(mix_seed(seed, 0xC0102));
  std::vector<std::array<float, 3>> palette(layout.shape_count + 1);
  for (auto& color : palette) {
    for (float& v : color) v = static_cast<float>(uniform(rng, 0.1, 0.9));
  }
  Image out(height, width, 3);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const auto& color = palette[layout.labels[static_cast<size_t>(y) * width + x]];
      for (int ch = 0; ch < 3; ++ch) {
        const float noise = static_cast<float>(uniform(rng, -kTextureAmplitude, kTextureAmplitude));
        out(y, x, ch) = std::clamp(color[ch] + noise, kAlbedoMin, kAlbedoMax);
      }
    }
  }
  return out;
}

ShadingField gen_shading(std::uint64_t seed, int height, int width, const ShadingOptions& options) {
  validate_dimensions(height, width);
  if (!(options.lo > 0.0f) || options.hi < options.lo) throw ParameterError("invalid shading range");
  Rng rng(mix_seed(seed, 0x5AD1));
  const double angle = uniform(rng, 0.0, 2.0 * M_PI);
  const double slope = uniform(rng, 0.3, 1.0);
  const int spots = uniform_int(rng, 1, 3);
  struct Spot {
    double cx, cy, sigma, amp;
  };
  std::vector<Spot> lights(spots);
  const double extent = std::max(height, width);
  for (auto& s : lights) {
    s.cx = uniform(rng, -0.1, 1.1) * width;
    s.cy = uniform(rng, -0.1, 1.1) * height;
    s.sigma = uniform(rng, 0.25, 0.5) * extent;
    s.amp = uniform(rng, 0.5, 1.5);
  }
  const double lo = uniform(rng, options.lo, options.lo + 0.4 * (1.0 - options.lo));
  const double hi = uniform(rng, 1.0 + 0.4 * (options.hi - 1.0), options.hi);

  Eigen::MatrixXd field(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = (x + 0.5) / width - 0.5;
      const double v = (y + 0.5) / height - 0.5;
      double f = slope * (std::cos(angle) * u + std::sin(angle) * v);
      for (const auto& s : lights) {
        const double dx = x + 0.5 - s.cx;
        const double dy = y + 0.5 - s.cy;
        f += s.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * s.sigma * s.sigma));
      }
      field(y, x) = f;
    }
  }
  const double fmin = field.minCoeff();
  const double range = std::max(field.maxCoeff() - fmin, 1e-12);
  field = ((field.array() - fmin) / range * (hi - lo) + lo).matrix();

  // Contract toward the centre of the range until neighbouring pixels differ by
  // at most the smoothness bound; the result stays inside [lo, hi].
  double max_step = 0.0;
  if (width > 1) max_step = (field.rightCols(width - 1) - field.leftCols(width - 1)).cwiseAbs().maxCoeff();
  if (height > 1) {
    max_step = std::max(max_step, (field.bottomRows(height - 1) - field.topRows(height - 1)).cwiseAbs().maxCoeff());
  }
  const double bound = 0.999 * options.smooth_bound;
  if (max_step > bound) {
    const double mid = 0.5 * (lo + hi);
    field = ((field.array() - mid) * (bound / max_step) + mid).matrix();
  }

  ShadingField out(height, width, 1);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) out(y, x, 0) = static_cast<float>(field(y, x));
  }
  return out;
}

Image compose_image(const Image& albedo, const ShadingField& shading) {
  if (albedo.height() != shading.height() || albedo.width() != shading.width() || shading.channels() != 1 ||
      albedo.batch() != shading.batch()) {
    throw DimensionError("compose_image: albedo " + to_string(albedo.shape()) + " vs shading " +
                         to_string(shading.shape()));
  }
  Image out(albedo.shape());
  out.matrix() = (albedo.matrix().array().colwise() * shading.matrix().col(0).array()).cwiseMax(0.0f).cwiseMin(1.0f);
  return out;
}

SceneSample gen_scene(std::uint64_t seed, int k, int height, int width) {
  if (k < 2) throw ParameterError("gen_scene: need at least 2 lighting conditions, got " + std::to_string(k));
  SceneSample scene;
  scene.seed = seed;
  scene.albedo = gen_albedo(mix_seed(seed, 0), height, width);
  for (int i = 0; i < k; ++i) {
    const std::uint64_t light_seed = mix_seed(seed, 1 + static_cast<std::uint64_t>(i));
    scene.light_seeds.push_back(light_seed);
    scene.images.push_back(compose_image(scene.albedo, gen_shading(light_seed, height, width)));
  }
  return scene;
}

}  // namespace latsplit
