#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "latsplit/losses.hpp"
#include "latsplit/random.hpp"
#include "latsplit/schedule.hpp"

namespace latsplit {

struct InferenceConfig {
  int ddim_steps = 50;
  double guidance_scale = 1.5;
  int n_samples = 10;
  double eta = 0.0;
  std::uint64_t seed = 0;

  void validate(int timesteps) const;
};

// Uniform-stride DDIM subsequence from T down to 1 (just {T} for one step).
inline std::vector<int> ddim_timesteps(int timesteps, int steps) {
  if (steps < 1 || steps > timesteps) {
    throw ParameterError("ddim_steps must lie in [1, " + std::to_string(timesteps) + "], got " + std::to_string(steps));
  }
  std::vector<int> out;
  if (steps == 1) return {timesteps};
  const double stride = static_cast<double>(timesteps - 1) / (steps - 1);
  for (int i = 0; i < steps; ++i) out.push_back(static_cast<int>(std::lround(timesteps - i * stride)));
  return out;
}

// One DDIM update using the sample prediction x0; the implied noise is
// recovered from z_t. eta = 0 is deterministic and needs no generator.
template <typename Scalar>
Tensor<Scalar> ddim_step(const Tensor<Scalar>& z_t, const Tensor<Scalar>& x0_pred, int t, int t_prev,
                         const NoiseSchedule& sched, double eta = 0.0, Rng* rng = nullptr) {
  require_same_shape(z_t, x0_pred, "ddim_step");
  if (t <= t_prev || t_prev < 0) {
    throw ParameterError("ddim_step: need t > t_prev >= 0, got t=" + std::to_string(t) + " t_prev=" +
                         std::to_string(t_prev));
  }
  if (!(eta >= 0.0 && eta <= 1.0)) throw ParameterError("ddim_step: eta must lie in [0, 1]");
  const double ab_t = sched.alpha_bar(t);
  const double ab_prev = sched.alpha_bar(t_prev);
  const double sigma =
      eta == 0.0 ? 0.0 : eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab_t)) * std::sqrt(1.0 - ab_t / ab_prev);
  Mat<Scalar> eps_hat = Mat<Scalar>::Zero(z_t.matrix().rows(), z_t.matrix().cols());
  if (ab_t < 1.0) {
    eps_hat = (z_t.matrix() - static_cast<Scalar>(std::sqrt(ab_t)) * x0_pred.matrix()) /
              static_cast<Scalar>(std::sqrt(1.0 - ab_t));
  }
  const double dir = std::sqrt(std::max(0.0, 1.0 - ab_prev - sigma * sigma));
  Mat<Scalar> out = static_cast<Scalar>(std::sqrt(ab_prev)) * x0_pred.matrix() + static_cast<Scalar>(dir) * eps_hat;
  if (sigma > 0.0) {
    if (!rng) throw ParameterError("ddim_step: eta > 0 needs a random generator");
    out += static_cast<Scalar>(sigma) * normal_tensor<Scalar>(z_t.shape(), *rng).matrix();
  }
  return Tensor<Scalar>(z_t.shape(), std::move(out));
}

// Per head: scale * cond + (1 - scale) * uncond. Written this way the
// identities at scale 1 and 0 hold exactly in floating point.
template <typename Scalar>
Decomposition<Scalar> combine_guidance(const Decomposition<Scalar>& cond, const Decomposition<Scalar>& uncond,
                                       double scale) {
  require_same_shape(cond.albedo, uncond.albedo, "guidance");
  require_same_shape(cond.lighting, uncond.lighting, "guidance");
  const Scalar s = static_cast<Scalar>(scale);
  const Scalar r = static_cast<Scalar>(1.0 - scale);
  return {Tensor<Scalar>(cond.albedo.shape(), s * cond.albedo.matrix() + r * uncond.albedo.matrix()),
          Tensor<Scalar>(cond.lighting.shape(), s * cond.lighting.matrix() + r * uncond.lighting.matrix())};
}

// Classifier-free guided decomposition. The conditional and the zero-filled
// unconditional branch run as one stacked batch.
template <typename Model, typename Scalar>
Decomposition<Scalar> guided_decompose(const Model& model, const Tensor<Scalar>& z_t, int t, const Tensor<Scalar>& cond,
                                       double scale) {
  require_same_shape(z_t, cond, "guided_decompose");
  if (!(scale >= 0.0)) throw ParameterError("guided_decompose: guidance scale must be >= 0");
  const int n = z_t.batch();
  const Decomposition<Scalar> both =
      model.forward(stack(z_t, z_t), std::vector<int>(2 * n, t), stack(cond, Tensor<Scalar>(cond.shape())), nullptr);
  return combine_guidance(Decomposition<Scalar>{both.albedo.slice(0, n), both.lighting.slice(0, n)},
                          Decomposition<Scalar>{both.albedo.slice(n, n), both.lighting.slice(n, n)}, scale);
}

template <typename Model>
void require_trained(const Model& model) {
  if constexpr (requires { model.trained(); }) {
    if (!model.trained()) throw StateError("sampling requires trained denoiser parameters");
  }
}

// Seed of the k-th albedo sample drawn for one conditioning latent.
inline std::uint64_t sample_seed(std::uint64_t seed, int k) { return mix_seed(seed, 0x5A3E + static_cast<std::uint64_t>(k)); }

// Albedo generation loop: start from Gaussian noise; at every timestep of the
// DDIM subsequence decompose with guidance, recompose z_A + z_E into the clean
// relit latent and take one DDIM step with it. Returns the decomposition of
// the final iteration. `conds` may hold several conditioning latents; every
// one gets the samples seeded by sample_seed(config.seed, k), k < n_samples,
// and the result is ordered [cond0 sample0..n-1, cond1 sample0..n-1, ...].
// No trained-state check; see sample_albedo_latents.
template <typename Model, typename Scalar>
Decomposition<Scalar> sample_decompositions(const Model& model, const Tensor<Scalar>& conds,
                                            const InferenceConfig& config, const NoiseSchedule& sched) {
  config.validate(sched.timesteps());
  const int per_cond = config.n_samples;
  const int total = conds.batch() * per_cond;
  Shape one = conds.shape();
  one.n = 1;
  Shape all = conds.shape();
  all.n = total;
  Tensor<Scalar> cond(all);
  Tensor<Scalar> z(all);
  std::vector<Rng> rngs;
  for (int c = 0; c < conds.batch(); ++c) {
    for (int k = 0; k < per_cond; ++k) {
      const int row = c * per_cond + k;
      cond.set_slice(row, conds.sample(c));
      rngs.emplace_back(sample_seed(config.seed, k));
      z.set_slice(row, normal_tensor<Scalar>(one, rngs.back()));
    }
  }
  const std::vector<int> steps = ddim_timesteps(sched.timesteps(), config.ddim_steps);
  Decomposition<Scalar> dec;
  for (size_t i = 0; i < steps.size(); ++i) {
    const int t = steps[i];
    const int t_prev = i + 1 < steps.size() ? steps[i + 1] : 0;
    dec = guided_decompose(model, z, t, cond, config.guidance_scale);
    const Tensor<Scalar> x0 = dec.recompose();
    if (config.eta > 0.0) {
      Tensor<Scalar> next(all);
      for (int r = 0; r < total; ++r) {
        next.set_slice(r, ddim_step(z.sample(r), x0.sample(r), t, t_prev, sched, config.eta, &rngs[r]));
      }
      z = std::move(next);
    } else {
      z = ddim_step(z, x0, t, t_prev, sched);
    }
  }
  return dec;
}

template <typename Model, typename Scalar>
Tensor<Scalar> sample_albedo_latents(const Model& model, const Tensor<Scalar>& conds, const InferenceConfig& config,
                                     const NoiseSchedule& sched) {
  require_trained(model);
  return sample_decompositions(model, conds, config, sched).albedo;
}

template <typename Model, typename Scalar>
Tensor<Scalar> sample_albedo_latent(const Model& model, const Tensor<Scalar>& cond, const InferenceConfig& config,
                                    const NoiseSchedule& sched) {
  if (cond.batch() != 1) throw DimensionError("sample_albedo_latent: expects one conditioning latent");
  InferenceConfig single = config;
  single.n_samples = 1;
  return sample_albedo_latents(model, cond, single, sched);
}

// Mean over the n_samples albedo latents of each conditioning latent.
template <typename Scalar>
Tensor<Scalar> mean_over_samples(const Tensor<Scalar>& samples, int per_cond) {
  if (per_cond < 1 || samples.batch() % per_cond != 0) throw DimensionError("mean_over_samples: bad sample count");
  Shape s = samples.shape();
  s.n /= per_cond;
  Tensor<Scalar> out(s);
  for (int c = 0; c < s.n; ++c) {
    Mat<Scalar> acc = samples.sample_rows(c * per_cond);
    for (int k = 1; k < per_cond; ++k) acc += samples.sample_rows(c * per_cond + k);
    out.sample_rows(c) = acc / static_cast<Scalar>(per_cond);
  }
  return out;
}

}  // namespace latsplit
