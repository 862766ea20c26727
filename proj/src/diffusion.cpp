#include "latsplit/denoiser.hpp"
#include "latsplit/inference.hpp"
#include "latsplit/trainer.hpp"

namespace latsplit {

void DenoiserConfig::validate() const {
  if (latent_channels < 1) throw ParameterError("denoiser.latent_channels must be >= 1");
  if (base_width < 1) throw ParameterError("denoiser.base_width must be >= 1");
  if (time_features < 2 || time_features % 2 != 0) throw ParameterError("denoiser.time_features must be even and >= 2");
  if (time_embed_dim < 1) throw ParameterError("denoiser.time_embed_dim must be >= 1");
  if (timesteps < 1) throw ParameterError("denoiser.timesteps must be >= 1");
  if (!(cond_dropout_prob >= 0.0 && cond_dropout_prob <= 1.0)) {
    throw ParameterError("denoiser.cond_dropout_prob must lie in [0, 1]");
  }
}

Denoiser::Denoiser(const DenoiserConfig& cfg) : config(cfg) {
  config.validate();
  Rng rng(mix_seed(config.seed, 0xD1F));
  net = DenoiserNet<float>(config, rng);
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0)) throw ParameterError("train.lambda must be >= 0");
  if (!(blur_prob >= 0.0 && blur_prob <= 1.0)) throw ParameterError("train.blur_prob must lie in [0, 1]");
  if (!(blur_sigma_min >= 0.0 && blur_sigma_max >= blur_sigma_min)) {
    throw ParameterError("train.blur_sigma_range must satisfy 0 <= min <= max");
  }
  if (steps < 1) throw ParameterError("train.steps must be >= 1");
  if (batch_size < 1) throw ParameterError("train.batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ParameterError("train.learning_rate must be > 0");
}

void InferenceConfig::validate(int timesteps) const {
  if (ddim_steps < 1 || ddim_steps > timesteps) {
    throw ParameterError("inference.ddim_steps must lie in [1, " + std::to_string(timesteps) + "]");
  }
  if (!(guidance_scale >= 0.0)) throw ParameterError("inference.guidance_scale must be >= 0");
  if (n_samples < 1) throw ParameterError("inference.n_samples must be >= 1");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ParameterError("inference.eta must lie in [0, 1]");
}

}  // namespace latsplit
