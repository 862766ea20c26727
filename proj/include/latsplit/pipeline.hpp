#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "latsplit/autoencoder.hpp"
#include "latsplit/denoiser.hpp"
#include "latsplit/inference.hpp"
#include "latsplit/metrics.hpp"
#include "latsplit/scene_gen.hpp"
#include "latsplit/trainer.hpp"

namespace latsplit {

// Latents of every lit image, row s * lights + k holds scene s under light k.
struct SceneLatents {
  Latent latents;
  int scenes = 0;
  int lights = 0;

  int row(int scene, int light) const { return scene * lights + light; }
};

SceneLatents encode_scenes(const std::vector<SceneSample>& dataset, const Autoencoder& ae);

// Standard deviation over every latent entry; dividing by it gives the
// diffusion unit-order inputs.
double compute_latent_scale(const Latent& latents);

// Copy of `latents` with every entry multiplied by `factor`.
SceneLatents scale_latents(const SceneLatents& latents, double factor);

using StepCallback = std::function<void(int step, const LossReport<float>& report)>;

// Runs config.steps optimiser updates on `model` over latent pairs that are
// already divided by model.latent_scale. Each batch item is a random scene
// with two distinct random lights. When `guard` is given its digest is
// checked against the value at entry after every step; a change throws
// InvariantViolation.
void train_denoiser(Denoiser& model, const SceneLatents& scaled, const TrainConfig& config,
                    const StepCallback& on_step = {}, const Autoencoder* guard = nullptr);

// Encodes the dataset, fixes the latent scale and trains a fresh denoiser.
Denoiser train_diffusion(const std::vector<SceneSample>& dataset, const Autoencoder& ae,
                         const DenoiserConfig& denoiser_config, const TrainConfig& config,
                         const StepCallback& on_step = {});

// Batched albedo prediction; latents are in autoencoder units (unscaled).
struct AlbedoPrediction {
  Image albedo;            // decoded mean albedo latent per input image
  Latent albedo_latent;    // mean over samples
  Latent lighting_latent;  // mean over samples of the lighting head
};

struct PredictOptions {
  bool allow_untrained = false;  // evaluate an initialised, untrained denoiser
  int max_batch = 64;            // conditioning latents x samples per sampler call
};

// encode -> scale -> sample n_samples decompositions -> mean -> unscale -> decode.
AlbedoPrediction predict_albedos(const Image& images, const Autoencoder& ae, const Denoiser& model,
                                 const InferenceConfig& config, const NoiseSchedule& sched,
                                 const PredictOptions& options = {});

Image predict_albedo(const Image& image, const Autoencoder& ae, const Denoiser& model, const InferenceConfig& config,
                     const NoiseSchedule& sched);

// Held-out evaluation: every lit image of every scene is decomposed.
struct EvalReport {
  ConsistencyReport accuracy;       // predicted albedo vs ground truth
  ConsistencyReport baseline;       // input image vs ground truth
  double pairwise_pred_psnr = 0.0;  // between predictions of one scene
  double pairwise_input_psnr = 0.0;
  double pairwise_latent_l2 = 0.0;  // between predicted albedo latents of one scene
  double mean_whdr = 0.0;           // on judgments synthesised from the ground truth
  Latent lighting_latents;          // predicted lighting latents, all scenes
  std::vector<std::vector<Image>> predictions;
};

struct EvalOptions {
  PredictOptions predict;
  int judgments_per_scene = 200;
  std::uint64_t judgment_seed = 11;
};

EvalReport evaluate(const std::vector<SceneSample>& scenes, const Autoencoder& ae, const Denoiser& model,
                    const InferenceConfig& config, const NoiseSchedule& sched, const EvalOptions& options = {});

// Rows of the ablation table: full, without regularisers (lambda = 0),
// without the consistency term and without lighting blur.
struct AblationVariant {
  std::string name;
  TrainConfig config;
};

std::vector<AblationVariant> ablation_variants(const TrainConfig& full);

}  // namespace latsplit
