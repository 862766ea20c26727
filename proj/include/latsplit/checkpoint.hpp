#pragma once

#include <filesystem>
#include <string>

#include "latsplit/autoencoder.hpp"
#include "latsplit/denoiser.hpp"
#include "latsplit/trainer.hpp"

namespace latsplit {

// A checkpoint is a binary parameter archive at `path` plus a JSON sidecar at
// `path` + ".json". Binary layout (little-endian):
//   "LATSPLITCKPT" | u32 format version | u32 len, model version string |
//   u32 tensor count | per tensor: u32 len, name, i64 rows, i64 cols, f32 data
// Loading checks the format and model versions and every tensor name and
// shape; any mismatch throws FormatError.
inline constexpr std::uint32_t kCheckpointFormat = 1;

std::filesystem::path sidecar_path(const std::filesystem::path& path);

void save_autoencoder(const Autoencoder& ae, const std::filesystem::path& path);
Autoencoder load_autoencoder(const std::filesystem::path& path);

struct DenoiserCheckpoint {
  Denoiser model;
  TrainConfig train;
};

void save_denoiser(const Denoiser& model, const TrainConfig& train, const std::filesystem::path& path);
DenoiserCheckpoint load_denoiser(const std::filesystem::path& path);

}  // namespace latsplit
