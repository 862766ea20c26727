#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "latsplit/autoencoder.hpp"
#include "latsplit/denoiser.hpp"
#include "latsplit/inference.hpp"
#include "latsplit/trainer.hpp"

namespace latsplit {

using Json = nlohmann::json;

// Calls visitor(name, field) for every field of a config, in schema order.
template <typename R>
void visit_fields(R& r, AutoencoderConfig& c) {
  r("downsample_factor", c.downsample_factor);
  r("latent_channels", c.latent_channels);
  r("base_width", c.base_width);
  r("kl_weight", c.kl_weight);
  r("epochs", c.epochs);
  r("learning_rate", c.learning_rate);
  r("batch_size", c.batch_size);
  r("seed", c.seed);
}

template <typename R>
void visit_fields(R& r, DenoiserConfig& c) {
  r("latent_channels", c.latent_channels);
  r("base_width", c.base_width);
  r("time_features", c.time_features);
  r("time_embed_dim", c.time_embed_dim);
  r("timesteps", c.timesteps);
  r("cond_dropout_prob", c.cond_dropout_prob);
  r("seed", c.seed);
}

template <typename R>
void visit_fields(R& r, TrainConfig& c) {
  r("lambda", c.lambda);
  r("blur_prob", c.blur_prob);
  r("blur_sigma_min", c.blur_sigma_min);
  r("blur_sigma_max", c.blur_sigma_max);
  r("use_consistency", c.use_consistency);
  r("steps", c.steps);
  r("batch_size", c.batch_size);
  r("learning_rate", c.learning_rate);
  r("seed", c.seed);
}

template <typename R>
void visit_fields(R& r, InferenceConfig& c) {
  r("ddim_steps", c.ddim_steps);
  r("guidance_scale", c.guidance_scale);
  r("n_samples", c.n_samples);
  r("eta", c.eta);
  r("seed", c.seed);
}

// Every config serialises to a flat object of its fields. Reading rejects
// unknown fields and wrongly typed values with a FormatError naming
// `<section>.<field>`; missing fields keep their defaults.
Json to_json(const AutoencoderConfig& c);
Json to_json(const DenoiserConfig& c);
Json to_json(const TrainConfig& c);
Json to_json(const InferenceConfig& c);

void from_json(const Json& j, const std::string& section, AutoencoderConfig& c);
void from_json(const Json& j, const std::string& section, DenoiserConfig& c);
void from_json(const Json& j, const std::string& section, TrainConfig& c);
void from_json(const Json& j, const std::string& section, InferenceConfig& c);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace latsplit
