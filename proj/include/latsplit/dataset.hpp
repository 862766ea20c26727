#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "latsplit/scene_gen.hpp"

namespace latsplit {

inline constexpr const char* kGeneratorVersion = "latsplit-scene-gen/1";

// Layout:
//   <dir>/manifest.json            scene count, K, dimensions, generator version
//   <dir>/scene_<idx>/albedo.png
//   <dir>/scene_<idx>/light_<k>.png
//   <dir>/scene_<idx>/meta.json    scene seed and per-light seeds
void write_dataset(const std::vector<SceneSample>& samples, const std::filesystem::path& dir);
std::vector<SceneSample> read_dataset(const std::filesystem::path& dir);

// Generates `count` scenes with seeds derived from `seed`.
std::vector<SceneSample> generate_scenes(std::uint64_t seed, int count, int k, int height, int width);

}  // namespace latsplit
