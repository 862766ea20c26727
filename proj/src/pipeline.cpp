#include "latsplit/pipeline.hpp"

#include <algorithm>
#include <cmath>

namespace latsplit {

namespace {

constexpr int kEncodeBatch = 32;

Image lit_images(const SceneSample& scene) {
  std::vector<const Image*> ptrs;
  for (const Image& img : scene.images) ptrs.push_back(&img);
  return batch_images(ptrs);
}

}  // namespace

SceneLatents encode_scenes(const std::vector<SceneSample>& dataset, const Autoencoder& ae) {
  if (dataset.empty()) throw ParameterError("encode_scenes: empty dataset");
  SceneLatents out;
  out.scenes = static_cast<int>(dataset.size());
  out.lights = dataset.front().lights();
  std::vector<const Image*> all;
  for (const SceneSample& s : dataset) {
    if (s.lights() != out.lights) throw ParameterError("encode_scenes: scenes differ in light count");
    for (const Image& img : s.images) all.push_back(&img);
  }
  const int f = ae.config().downsample_factor;
  const Image& first = *all.front();
  out.latents = Latent(static_cast<int>(all.size()), first.height() / f, first.width() / f,
                       ae.config().latent_channels);
  for (size_t b = 0; b < all.size(); b += kEncodeBatch) {
    const size_t e = std::min(all.size(), b + kEncodeBatch);
    out.latents.set_slice(static_cast<int>(b), ae.encode(batch_images({all.begin() + b, all.begin() + e})));
  }
  return out;
}

double compute_latent_scale(const Latent& latents) {
  if (latents.size() == 0) throw ParameterError("compute_latent_scale: no latents");
  const Eigen::ArrayXXd v = latents.matrix().cast<double>().array();
  const double mean = v.mean();
  const double var = (v - mean).square().mean();
  if (!(var > 0.0) || !std::isfinite(var)) throw NumericError("compute_latent_scale: degenerate latent variance");
  return std::sqrt(var);
}

SceneLatents scale_latents(const SceneLatents& latents, double factor) {
  SceneLatents out = latents;
  out.latents.matrix() *= static_cast<float>(factor);
  return out;
}

void train_denoiser(Denoiser& model, const SceneLatents& scaled, const TrainConfig& config,
                    const StepCallback& on_step, const Autoencoder* guard) {
  config.validate();
  if (scaled.lights < 2) throw ParameterError("train: scenes need at least two lights");
  const std::uint64_t digest = guard ? guard->digest() : 0;
  const NoiseSchedule sched = make_schedule(model.config.timesteps);
  nn::AdamOptions opts;
  opts.learning_rate = config.learning_rate;
  nn::Adam<float> optimizer(opts);
  Rng rng(mix_seed(config.seed, 0x7A1));

  Shape shape = scaled.latents.shape();
  shape.n = config.batch_size;
  for (int step = 1; step <= config.steps; ++step) {
    PairBatch<float> batch{Latent(shape), Latent(shape)};
    for (int b = 0; b < config.batch_size; ++b) {
      const int scene = uniform_int(rng, 0, scaled.scenes - 1);
      const int li = uniform_int(rng, 0, scaled.lights - 1);
      int lj = uniform_int(rng, 0, scaled.lights - 2);
      if (lj >= li) ++lj;
      batch.z_i.set_slice(b, scaled.latents.sample(scaled.row(scene, li)));
      batch.z_j.set_slice(b, scaled.latents.sample(scaled.row(scene, lj)));
    }
    const StepPlan<float> plan =
        draw_plan<float>(shape, config, model.config.cond_dropout_prob, sched.timesteps(), rng);
    const LossReport<float> report = train_step(model, optimizer, batch, plan, sched, config);
    ++model.steps_trained;
    if (guard && guard->digest() != digest) {
      throw InvariantViolation("autoencoder parameters changed during diffusion training (step " +
                               std::to_string(step) + ")");
    }
    if (on_step) on_step(step, report);
  }
}

Denoiser train_diffusion(const std::vector<SceneSample>& dataset, const Autoencoder& ae,
                         const DenoiserConfig& denoiser_config, const TrainConfig& config,
                         const StepCallback& on_step) {
  const SceneLatents latents = encode_scenes(dataset, ae);
  Denoiser model(denoiser_config);
  model.latent_scale = compute_latent_scale(latents.latents);
  train_denoiser(model, scale_latents(latents, 1.0 / model.latent_scale), config, on_step, &ae);
  return model;
}

AlbedoPrediction predict_albedos(const Image& images, const Autoencoder& ae, const Denoiser& model,
                                 const InferenceConfig& config, const NoiseSchedule& sched,
                                 const PredictOptions& options) {
  if (!options.allow_untrained) require_trained(model);
  config.validate(sched.timesteps());
  Latent cond = ae.encode(images);
  cond.matrix() /= static_cast<float>(model.latent_scale);

  AlbedoPrediction out;
  out.albedo_latent = Latent(cond.shape());
  out.lighting_latent = Latent(cond.shape());
  const int chunk = std::max(1, options.max_batch / config.n_samples);
  for (int first = 0; first < cond.batch(); first += chunk) {
    const int count = std::min(chunk, cond.batch() - first);
    const Decomposition<float> dec = sample_decompositions(model, cond.slice(first, count), config, sched);
    out.albedo_latent.set_slice(first, mean_over_samples(dec.albedo, config.n_samples));
    out.lighting_latent.set_slice(first, mean_over_samples(dec.lighting, config.n_samples));
  }
  out.albedo_latent.matrix() *= static_cast<float>(model.latent_scale);
  out.lighting_latent.matrix() *= static_cast<float>(model.latent_scale);
  out.albedo = ae.decode(out.albedo_latent);
  return out;
}

Image predict_albedo(const Image& image, const Autoencoder& ae, const Denoiser& model, const InferenceConfig& config,
                     const NoiseSchedule& sched) {
  if (image.batch() != 1) throw DimensionError("predict_albedo: expects a single image");
  validate_image(image, ae.config().downsample_factor);
  return predict_albedos(image, ae, model, config, sched).albedo;
}

namespace {

double mean_pairwise(int n, const std::function<double(int, int)>& metric) {
  double sum = 0.0;
  int pairs = 0;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      sum += metric(a, b);
      ++pairs;
    }
  }
  return pairs ? sum / pairs : 0.0;
}

}  // namespace

EvalReport evaluate(const std::vector<SceneSample>& scenes, const Autoencoder& ae, const Denoiser& model,
                    const InferenceConfig& config, const NoiseSchedule& sched, const EvalOptions& options) {
  if (scenes.empty()) throw ParameterError("evaluate: no scenes");
  EvalReport report;
  std::vector<Image> gts;
  std::vector<std::vector<Image>> inputs;
  std::vector<Latent> lighting;
  double pred_pairs = 0.0, input_pairs = 0.0, latent_pairs = 0.0, whdr_sum = 0.0;
  for (size_t s = 0; s < scenes.size(); ++s) {
    const SceneSample& scene = scenes[s];
    const AlbedoPrediction pred = predict_albedos(lit_images(scene), ae, model, config, sched, options.predict);
    const int k = scene.lights();
    std::vector<Image> preds;
    for (int i = 0; i < k; ++i) preds.push_back(pred.albedo.sample(i));
    pred_pairs += mean_pairwise(k, [&](int a, int b) { return psnr(preds[a], preds[b]); });
    input_pairs += mean_pairwise(k, [&](int a, int b) { return psnr(scene.images[a], scene.images[b]); });
    latent_pairs += mean_pairwise(k, [&](int a, int b) {
      return std::sqrt(static_cast<double>(squared_distance(pred.albedo_latent.sample(a), pred.albedo_latent.sample(b))));
    });
    const JudgmentSet judgments =
        synth_judgments(scene.albedo, options.judgments_per_scene, kWhdrDelta, mix_seed(options.judgment_seed, s));
    for (const Image& p : preds) whdr_sum += whdr(p, judgments) / k;
    lighting.push_back(pred.lighting_latent);
    gts.push_back(scene.albedo);
    inputs.push_back(scene.images);
    report.predictions.push_back(std::move(preds));
  }
  const double n = static_cast<double>(scenes.size());
  report.accuracy = consistency_eval(report.predictions, gts);
  report.baseline = consistency_eval(inputs, gts);
  report.pairwise_pred_psnr = pred_pairs / n;
  report.pairwise_input_psnr = input_pairs / n;
  report.pairwise_latent_l2 = latent_pairs / n;
  report.mean_whdr = whdr_sum / n;
  Shape all = lighting.front().shape();
  all.n = 0;
  for (const Latent& l : lighting) all.n += l.batch();
  report.lighting_latents = Latent(all);
  int row = 0;
  for (const Latent& l : lighting) {
    report.lighting_latents.set_slice(row, l);
    row += l.batch();
  }
  return report;
}

std::vector<AblationVariant> ablation_variants(const TrainConfig& full) {
  std::vector<AblationVariant> out;
  out.push_back({"full", full});
  TrainConfig no_reg = full;
  no_reg.lambda = 0.0;
  out.push_back({"no_reg", no_reg});
  TrainConfig no_consistency = full;
  no_consistency.use_consistency = false;
  out.push_back({"no_consistency", no_consistency});
  TrainConfig no_blur = full;
  no_blur.blur_prob = 0.0;
  out.push_back({"no_blur", no_blur});
  return out;
}

}  // namespace latsplit
