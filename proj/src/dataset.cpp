#include "latsplit/dataset.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "latsplit/errors.hpp"
#include "latsplit/image_io.hpp"
#include "latsplit/random.hpp"

namespace latsplit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("missing file: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

template <typename T>
T field(const json& j, const char* key, const fs::path& path) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(path.string() + ": missing or invalid field '" + key + "'");
  }
}

}  // namespace

void write_dataset(const std::vector<SceneSample>& samples, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create dataset directory " + dir.string() + ": " + ec.message());

  const int k = samples.empty() ? 0 : samples.front().lights();
  const int height = samples.empty() ? 0 : samples.front().albedo.height();
  const int width = samples.empty() ? 0 : samples.front().albedo.width();
  for (size_t idx = 0; idx < samples.size(); ++idx) {
    const SceneSample& s = samples[idx];
    if (s.lights() != k || s.albedo.height() != height || s.albedo.width() != width) {
      throw DimensionError("write_dataset: scene " + std::to_string(idx) + " does not match the dataset shape");
    }
    const fs::path scene_dir = dir / ("scene_" + std::to_string(idx));
    fs::create_directories(scene_dir, ec);
    if (ec) throw IoError("cannot create " + scene_dir.string() + ": " + ec.message());
    write_png(scene_dir / "albedo.png", s.albedo);
    for (int i = 0; i < k; ++i) write_png(scene_dir / ("light_" + std::to_string(i) + ".png"), s.images[i]);
    write_json(scene_dir / "meta.json", json{{"seed", s.seed}, {"light_seeds", s.light_seeds}});
  }
  write_json(dir / "manifest.json", json{{"scene_count", samples.size()},
                                         {"lights", k},
                                         {"height", height},
                                         {"width", width},
                                         {"generator_version", kGeneratorVersion}});
}

std::vector<SceneSample> read_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory not found: " + dir.string());
  const fs::path manifest_path = dir / "manifest.json";
  const json manifest = read_json(manifest_path);
  const auto count = field<long>(manifest, "scene_count", manifest_path);
  const auto k = field<int>(manifest, "lights", manifest_path);
  const auto height = field<int>(manifest, "height", manifest_path);
  const auto width = field<int>(manifest, "width", manifest_path);
  const auto version = field<std::string>(manifest, "generator_version", manifest_path);
  if (version != kGeneratorVersion) {
    throw FormatError(manifest_path.string() + ": unsupported generator version '" + version + "'");
  }
  if (count < 0) throw FormatError(manifest_path.string() + ": negative scene count");

  std::vector<SceneSample> samples;
  samples.reserve(count);
  for (long idx = 0; idx < count; ++idx) {
    const fs::path scene_dir = dir / ("scene_" + std::to_string(idx));
    if (!fs::is_directory(scene_dir)) throw FormatError("missing scene directory: " + scene_dir.string());
    SceneSample s;
    const fs::path meta_path = scene_dir / "meta.json";
    const json meta = read_json(meta_path);
    s.seed = field<std::uint64_t>(meta, "seed", meta_path);
    s.light_seeds = field<std::vector<std::uint64_t>>(meta, "light_seeds", meta_path);
    if (static_cast<int>(s.light_seeds.size()) != k) {
      throw FormatError(meta_path.string() + ": expected " + std::to_string(k) + " light seeds");
    }
    auto load = [&](const fs::path& p) {
      Image img = read_png(p);
      if (img.height() != height || img.width() != width) {
        throw FormatError(p.string() + ": expected " + std::to_string(height) + "x" + std::to_string(width));
      }
      return img;
    };
    s.albedo = load(scene_dir / "albedo.png");
    for (int i = 0; i < k; ++i) s.images.push_back(load(scene_dir / ("light_" + std::to_string(i) + ".png")));
    samples.push_back(std::move(s));
  }
  return samples;
}

std::vector<SceneSample> generate_scenes(std::uint64_t seed, int count, int k, int height, int width) {
  if (count < 0) throw ParameterError("scene count must be non-negative");
  std::vector<SceneSample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(gen_scene(mix_seed(seed, 1000 + i), k, height, width));
  return out;
}

}  // namespace latsplit
