#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "latsplit/denoiser.hpp"
#include "latsplit/inference.hpp"
#include "stand_in.hpp"

using namespace latsplit;
using T = Tensor<double>;
using test::random_tensor;

namespace {

// Constant heads; counts forward calls to observe the sampling loop.
struct ConstantModel {
  double albedo = 0.25;
  double lighting = -0.5;
  mutable int calls = 0;
  bool trained() const { return true; }
  Decomposition<double> forward(const T& noisy, const std::vector<int>&, const T&, nn::Tape<double>*) const {
    ++calls;
    return {T::constant(noisy.shape(), albedo), T::constant(noisy.shape(), lighting)};
  }
};

}  // namespace

TEST_CASE("ddim timestep subsequence") {
  for (int steps : {1, 2, 10, 50, 999, 1000}) {
    const auto ts = ddim_timesteps(1000, steps);
    CHECK(static_cast<int>(ts.size()) == steps);
    CHECK(ts.front() == 1000);
    if (steps > 1) CHECK(ts.back() == 1);
    for (size_t i = 1; i < ts.size(); ++i) CHECK(ts[i] < ts[i - 1]);
  }
  CHECK_THROWS_AS(ddim_timesteps(1000, 0), ParameterError);
  CHECK_THROWS_AS(ddim_timesteps(1000, 1001), ParameterError);
}

TEST_CASE("ddim_step endpoint, fixed point and scalar case") {
  const NoiseSchedule s = make_schedule(1000);
  const T z = random_tensor({1, 4, 4, 2}, 1), x0 = random_tensor({1, 4, 4, 2}, 2);
  const T end = ddim_step(z, x0, 20, 0, s);
  CHECK((end.matrix() - x0.matrix()).cwiseAbs().maxCoeff() <= 1e-9);

  const NoiseSchedule flat = NoiseSchedule::from_alpha_bar({0.5, 0.5});
  CHECK((ddim_step(z, z, 2, 1, flat).matrix() - z.matrix()).cwiseAbs().maxCoeff() <= 1e-9);

  const NoiseSchedule two = NoiseSchedule::from_alpha_bar({0.81, 0.25});
  const T one = T::constant({1, 1, 1, 1}, 1.0);
  const double expected = 0.9 + std::sqrt(0.19) * (0.5 / std::sqrt(0.75));
  CHECK(std::abs(ddim_step(one, one, 2, 1, two)(0, 0, 0) - expected) <= 1e-9);

  CHECK_THROWS_AS(ddim_step(z, x0, 5, 5, s), ParameterError);
  CHECK_THROWS_AS(ddim_step(z, x0, 4, 5, s), ParameterError);
  CHECK_THROWS_AS(ddim_step(z, x0, 5, 1, s, 0.5), ParameterError);  // eta > 0 needs a generator
  Rng rng(1);
  CHECK(ddim_step(z, x0, 500, 400, s, 0.5, &rng).matrix() != ddim_step(z, x0, 500, 400, s).matrix());
}

TEST_CASE("guidance identities") {
  const Decomposition<double> c{random_tensor({1, 3, 3, 2}, 3), random_tensor({1, 3, 3, 2}, 4)};
  const Decomposition<double> u{random_tensor({1, 3, 3, 2}, 5), random_tensor({1, 3, 3, 2}, 6)};
  const auto one = combine_guidance(c, u, 1.0);
  CHECK(one.albedo.matrix() == c.albedo.matrix());
  CHECK(one.lighting.matrix() == c.lighting.matrix());
  const auto zero = combine_guidance(c, u, 0.0);
  CHECK(zero.albedo.matrix() == u.albedo.matrix());
  CHECK(zero.lighting.matrix() == u.lighting.matrix());
  const Decomposition<double> sc{T::constant({1, 1, 1, 1}, 2.0), T::constant({1, 1, 1, 1}, 2.0)};
  const Decomposition<double> su{T::constant({1, 1, 1, 1}, 0.0), T::constant({1, 1, 1, 1}, 0.0)};
  CHECK(std::abs(combine_guidance(sc, su, 1.5).albedo(0, 0, 0) - 3.0) < 1e-12);
  CHECK(std::abs(combine_guidance(sc, su, 1.5).lighting(0, 0, 0) - 3.0) < 1e-12);
}

TEST_CASE("guided_decompose runs the conditional and the zero-filled branch") {
  test::LinearStandIn<double> model;
  const T z = random_tensor({2, 4, 4, 2}, 7), cond = random_tensor({2, 4, 4, 2}, 8);
  const auto g1 = guided_decompose(model, z, 10, cond, 1.0);
  CHECK((g1.albedo.matrix() - 0.7 * cond.matrix()).cwiseAbs().maxCoeff() < 1e-12);
  const auto g0 = guided_decompose(model, z, 10, cond, 0.0);
  CHECK(g0.albedo.matrix().isZero());
  CHECK_THROWS_AS(guided_decompose(model, z, 10, cond, -1.0), ParameterError);
}

TEST_CASE("sampler returns the final albedo head, never the recomposition") {
  ConstantModel model;
  InferenceConfig cfg;
  cfg.ddim_steps = 7;
  cfg.n_samples = 3;
  const NoiseSchedule s = make_schedule(1000);
  const T cond = random_tensor({2, 4, 4, 2}, 9);
  const T out = sample_albedo_latents(model, cond, cfg, s);
  CHECK(model.calls == 7);
  CHECK(out.batch() == 6);
  CHECK((out.matrix().array() - 0.25).abs().maxCoeff() < 1e-12);
}

TEST_CASE("sampling is deterministic and seed dependent") {
  DenoiserConfig dc;
  dc.base_width = 4;
  dc.time_features = 8;
  dc.time_embed_dim = 8;
  Denoiser model(dc);
  const NoiseSchedule s = make_schedule(1000);
  Rng rng(5);
  const Latent cond = normal_tensor<float>({1, 4, 4, 4}, rng);
  InferenceConfig cfg;
  cfg.ddim_steps = 5;
  CHECK_THROWS_AS(sample_albedo_latent(model, cond, cfg, s), StateError);
  model.steps_trained = 1;
  const Latent a = sample_albedo_latent(model, cond, cfg, s);
  const Latent b = sample_albedo_latent(model, cond, cfg, s);
  CHECK(a.shape() == cond.shape());
  CHECK(a.matrix() == b.matrix());
  cfg.seed = 1;
  CHECK(sample_albedo_latent(model, cond, cfg, s).matrix() != a.matrix());

  // batched sampling matches per-sample sampling
  cfg.n_samples = 3;
  const Latent all = sample_albedo_latents(model, cond, cfg, s);
  CHECK(all.batch() == 3);
  cfg.n_samples = 1;
  CHECK((all.sample(0).matrix() - sample_albedo_latent(model, cond, cfg, s).matrix()).cwiseAbs().maxCoeff() < 1e-5f);
}

TEST_CASE("inference config validation") {
  InferenceConfig c;
  CHECK_NOTHROW(c.validate(1000));
  CHECK(c.ddim_steps == 50);
  CHECK(c.guidance_scale == 1.5);
  CHECK(c.n_samples == 10);
  CHECK(c.eta == 0.0);
  c.n_samples = 0;
  CHECK_THROWS_AS(c.validate(1000), ParameterError);
  c = {};
  c.ddim_steps = 1001;
  CHECK_THROWS_AS(c.validate(1000), ParameterError);
  c = {};
  c.eta = 1.5;
  CHECK_THROWS_AS(c.validate(1000), ParameterError);
}

TEST_CASE("mean over samples") {
  const T s = random_tensor({6, 2, 2, 3}, 10);
  CHECK(mean_over_samples(s, 1).matrix() == s.matrix());
  const T m = mean_over_samples(s, 3);
  CHECK(m.batch() == 2);
  const Mat<double> expect = (s.sample_rows(3) + s.sample_rows(4) + s.sample_rows(5)) / 3.0;
  CHECK((m.sample_rows(1) - expect).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(mean_over_samples(s, 4), DimensionError);
}
