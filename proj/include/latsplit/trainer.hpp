#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "latsplit/blur.hpp"
#include "latsplit/losses.hpp"
#include "latsplit/nn/layers.hpp"
#include "latsplit/random.hpp"
#include "latsplit/schedule.hpp"

namespace latsplit {

struct TrainConfig {
  double lambda = 0.5;
  double blur_prob = 0.5;
  double blur_sigma_min = 0.5;
  double blur_sigma_max = 2.0;
  bool use_consistency = true;
  int steps = 20000;
  int batch_size = 16;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;

  void validate() const;
};

// B scene pairs: z_i[b] and z_j[b] are latents of the same scene under two
// different lights.
template <typename Scalar>
struct PairBatch {
  Tensor<Scalar> z_i;
  Tensor<Scalar> z_j;

  int size() const { return z_i.batch(); }
};

// Every random choice of one training step, drawn up front so that the loss
// is a deterministic function of the parameters.
template <typename Scalar>
struct StepPlan {
  std::vector<int> t_i;
  std::vector<int> t_j;
  Tensor<Scalar> eps_i;
  Tensor<Scalar> eps_j;
  // Per forward row: pass A rows [0, B) predict lighting for j, pass B rows
  // [B, 2B) for i. Zero sigma means no blur.
  std::vector<double> blur_sigma;
  std::vector<bool> drop_cond;
};

template <typename Scalar>
struct LossReport {
  LossParts<Scalar> parts;
  Scalar total{0};
};

template <typename Scalar>
StepPlan<Scalar> draw_plan(const Shape& latent_shape, const TrainConfig& config, double cond_dropout_prob,
                           int timesteps, Rng& rng) {
  const int batch = latent_shape.n;
  StepPlan<Scalar> plan;
  for (int b = 0; b < batch; ++b) {
    plan.t_j.push_back(uniform_int(rng, 1, timesteps));
    plan.t_i.push_back(uniform_int(rng, 1, timesteps));
  }
  plan.eps_j = normal_tensor<Scalar>(latent_shape, rng);
  plan.eps_i = normal_tensor<Scalar>(latent_shape, rng);
  for (int r = 0; r < 2 * batch; ++r) {
    const bool blur = uniform(rng, 0.0, 1.0) < config.blur_prob;
    const double sigma = uniform(rng, config.blur_sigma_min, config.blur_sigma_max);
    plan.blur_sigma.push_back(blur ? sigma : 0.0);
    plan.drop_cond.push_back(uniform(rng, 0.0, 1.0) < cond_dropout_prob);
  }
  return plan;
}

namespace detail {

template <typename Scalar>
Tensor<Scalar> blur_rows(const Tensor<Scalar>& z, const std::vector<double>& sigma, int offset) {
  Tensor<Scalar> out(z.shape());
  for (int b = 0; b < z.batch(); ++b) out.set_slice(b, blur_lighting(z.sample(b), sigma[offset + b]));
  return out;
}

}  // namespace detail

// Two-pass cross-conditioned forward, the five losses, and (when `tape` is
// given) the backward pass into the model's parameter gradients.
//   pass A: F(noise(z_j, t_j), t_j, z_i) -> (albedo_i, lighting_j)
//   pass B: F(noise(z_i, t_i), t_i, z_j) -> (albedo_j, lighting_i)
template <typename Scalar, typename Model>
LossReport<Scalar> compute_losses(Model& model, const PairBatch<Scalar>& batch, const StepPlan<Scalar>& plan,
                                  const NoiseSchedule& sched, const TrainConfig& config, bool backprop) {
  require_same_shape(batch.z_i, batch.z_j, "train_step");
  const int B = batch.size();
  const Tensor<Scalar> noisy = stack(add_noise(batch.z_j, plan.eps_j, plan.t_j, sched),
                                     add_noise(batch.z_i, plan.eps_i, plan.t_i, sched));
  Tensor<Scalar> cond = stack(batch.z_i, batch.z_j);
  for (int r = 0; r < 2 * B; ++r) {
    if (plan.drop_cond[r]) cond.sample_rows(r).setZero();
  }
  std::vector<int> t = plan.t_j;
  t.insert(t.end(), plan.t_i.begin(), plan.t_i.end());

  nn::Tape<Scalar> tape;
  const Decomposition<Scalar> out = model.forward(noisy, t, cond, backprop ? &tape : nullptr);
  const Tensor<Scalar> albedo_i = out.albedo.slice(0, B);
  const Tensor<Scalar> albedo_j = out.albedo.slice(B, B);
  const Tensor<Scalar> light_j = detail::blur_rows(out.lighting.slice(0, B), plan.blur_sigma, 0);
  const Tensor<Scalar> light_i = detail::blur_rows(out.lighting.slice(B, B), plan.blur_sigma, B);
  const Tensor<Scalar>& z_i = batch.z_i;
  const Tensor<Scalar>& z_j = batch.z_j;
  const Scalar half(0.5);
  const Scalar lambda = static_cast<Scalar>(config.lambda);
  const Scalar w_consistency = config.use_consistency ? Scalar(1) : Scalar(0);

  LossReport<Scalar> report;
  const Tensor<Scalar> pair[] = {albedo_i, albedo_j};
  report.parts.relight = half * (loss_relight(z_j, Decomposition<Scalar>{albedo_i, light_j}) +
                                 loss_relight(z_i, Decomposition<Scalar>{albedo_j, light_i}));
  report.parts.albedo = loss_albedo<Scalar>(pair);
  report.parts.consistency = half * (loss_consistency(z_i, albedo_i, light_i) + loss_consistency(z_j, albedo_j, light_j));
  report.parts.invariant = half * (loss_invariant(z_j, albedo_i) + loss_invariant(z_i, albedo_j));
  report.parts.reg = half * (loss_reg(light_j) + loss_reg(light_i));
  LossParts<Scalar> weighted = report.parts;
  weighted.consistency *= w_consistency;
  report.total = total_loss(weighted, lambda);
  if (!backprop) return report;

  // d total / d outputs
  Tensor<Scalar> g_albedo_i(albedo_i.shape()), g_albedo_j(albedo_j.shape());
  Tensor<Scalar> g_light_i(light_i.shape()), g_light_j(light_j.shape());
  auto add = [](Tensor<Scalar>& dst, const Tensor<Scalar>& g, Scalar w) { dst.matrix() += w * g.matrix(); };

  const Tensor<Scalar> r_a = mse_grad(albedo_i + light_j, z_j);
  add(g_albedo_i, r_a, half);
  add(g_light_j, r_a, half);
  const Tensor<Scalar> r_b = mse_grad(albedo_j + light_i, z_i);
  add(g_albedo_j, r_b, half);
  add(g_light_i, r_b, half);

  const auto g_pair = loss_albedo_grad<Scalar>(pair);
  add(g_albedo_i, g_pair[0], Scalar(1));
  add(g_albedo_j, g_pair[1], Scalar(1));

  if (config.use_consistency) {
    const Tensor<Scalar> c_i = mse_grad(albedo_i + light_i, z_i);
    add(g_albedo_i, c_i, half);
    add(g_light_i, c_i, half);
    const Tensor<Scalar> c_j = mse_grad(albedo_j + light_j, z_j);
    add(g_albedo_j, c_j, half);
    add(g_light_j, c_j, half);
  }

  add(g_albedo_i, mse_grad(albedo_i, z_j), half * lambda);
  add(g_albedo_j, mse_grad(albedo_j, z_i), half * lambda);
  add(g_light_j, loss_reg_grad(light_j), half * lambda);
  add(g_light_i, loss_reg_grad(light_i), half * lambda);

  // The blur operator is symmetric, so its adjoint is itself.
  Decomposition<Scalar> grad{stack(g_albedo_i, g_albedo_j),
                             stack(detail::blur_rows(g_light_j, plan.blur_sigma, 0),
                                   detail::blur_rows(g_light_i, plan.blur_sigma, B))};
  model.backward(grad, tape);
  return report;
}

// One optimiser update on the model parameters only.
template <typename Scalar, typename Model>
LossReport<Scalar> train_step(Model& model, nn::Adam<Scalar>& optimizer, const PairBatch<Scalar>& batch,
                              const StepPlan<Scalar>& plan, const NoiseSchedule& sched, const TrainConfig& config) {
  auto params = model.parameters();
  nn::zero_grad(params);
  const LossReport<Scalar> report = compute_losses(model, batch, plan, sched, config, true);
  optimizer.step(params);
  return report;
}

}  // namespace latsplit
