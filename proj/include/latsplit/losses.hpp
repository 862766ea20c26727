#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "latsplit/tensor.hpp"

namespace latsplit {

// Output of the dual-head denoiser: lighting-invariant and lighting-dependent
// latents whose sum recomposes the relit latent.
template <typename Scalar>
struct Decomposition {
  Tensor<Scalar> albedo;
  Tensor<Scalar> lighting;

  Tensor<Scalar> recompose() const { return albedo + lighting; }
};

template <typename Scalar>
void validate_decomposition(const Decomposition<Scalar>& d) {
  require_same_shape(d.albedo, d.lighting, "Decomposition");
  if (!d.albedo.all_finite() || !d.lighting.all_finite()) throw NumericError("Decomposition: non-finite latent");
}

template <typename Scalar>
Scalar mse(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require_same_shape(a, b, "mse");
  if (a.size() == 0) return Scalar(0);
  return (a.matrix() - b.matrix()).squaredNorm() / static_cast<Scalar>(a.size());
}

// d mse(a, b) / d a
template <typename Scalar>
Tensor<Scalar> mse_grad(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require_same_shape(a, b, "mse_grad");
  return Tensor<Scalar>(a.shape(), (Scalar(2) / static_cast<Scalar>(a.size())) * (a.matrix() - b.matrix()));
}

// Sample-prediction relighting loss: || z_j - (z_A + z_E) ||^2, mean over elements.
template <typename Scalar>
Scalar loss_relight(const Tensor<Scalar>& target, const Decomposition<Scalar>& dec) {
  require_same_shape(dec.albedo, dec.lighting, "loss_relight");
  require_same_shape(target, dec.albedo, "loss_relight");
  return mse(dec.recompose(), target);
}

// Mean over unordered pairs of the mean squared difference between albedo latents.
template <typename Scalar>
Scalar loss_albedo(std::span<const Tensor<Scalar>> albedos) {
  if (albedos.size() < 2) throw ParameterError("loss_albedo needs at least two latents");
  Scalar sum(0);
  int pairs = 0;
  for (size_t i = 0; i < albedos.size(); ++i) {
    for (size_t j = i + 1; j < albedos.size(); ++j) {
      sum += mse(albedos[i], albedos[j]);
      ++pairs;
    }
  }
  return sum / static_cast<Scalar>(pairs);
}

template <typename Scalar>
std::vector<Tensor<Scalar>> loss_albedo_grad(std::span<const Tensor<Scalar>> albedos) {
  if (albedos.size() < 2) throw ParameterError("loss_albedo needs at least two latents");
  const auto n = albedos.size();
  const Scalar pairs = static_cast<Scalar>(n * (n - 1) / 2);
  std::vector<Tensor<Scalar>> grads;
  for (const auto& a : albedos) grads.emplace_back(a.shape());
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      const Tensor<Scalar> g = mse_grad(albedos[i], albedos[j]);
      grads[i].matrix() += g.matrix() / pairs;
      grads[j].matrix() -= g.matrix() / pairs;
    }
  }
  return grads;
}

// Cross-consistency: z_i against its own albedo latent plus the lighting latent
// predicted for condition i while conditioned on a different latent.
template <typename Scalar>
Scalar loss_consistency(const Tensor<Scalar>& z_i, const Tensor<Scalar>& albedo_i, const Tensor<Scalar>& lighting_i_cross) {
  require_same_shape(albedo_i, lighting_i_cross, "loss_consistency");
  require_same_shape(z_i, albedo_i, "loss_consistency");
  return mse(albedo_i + lighting_i_cross, z_i);
}

// Anchors the albedo latent to the image latent.
template <typename Scalar>
Scalar loss_invariant(const Tensor<Scalar>& z_j, const Tensor<Scalar>& albedo_i) {
  require_same_shape(z_j, albedo_i, "loss_invariant");
  return mse(albedo_i, z_j);
}

// Hinge on positive lighting-latent entries, mean over elements.
template <typename Scalar>
Scalar loss_reg(const Tensor<Scalar>& lighting) {
  if (!lighting.all_finite()) throw NumericError("loss_reg: non-finite lighting latent");
  if (lighting.size() == 0) return Scalar(0);
  return lighting.matrix().cwiseMax(Scalar(0)).sum() / static_cast<Scalar>(lighting.size());
}

template <typename Scalar>
Tensor<Scalar> loss_reg_grad(const Tensor<Scalar>& lighting) {
  const Scalar inv = Scalar(1) / static_cast<Scalar>(lighting.size());
  return Tensor<Scalar>(lighting.shape(),
                        lighting.matrix().unaryExpr([inv](Scalar v) { return v > Scalar(0) ? inv : Scalar(0); }));
}

template <typename Scalar>
struct LossParts {
  Scalar relight{0};
  Scalar albedo{0};
  Scalar consistency{0};
  Scalar invariant{0};
  Scalar reg{0};
};

// relight + albedo + consistency + lambda * (invariant + reg)
template <typename Scalar>
Scalar total_loss(const LossParts<Scalar>& parts, Scalar lambda) {
  const std::pair<const char*, Scalar> named[] = {{"relight", parts.relight},
                                                  {"albedo", parts.albedo},
                                                  {"consistency", parts.consistency},
                                                  {"invariant", parts.invariant},
                                                  {"reg", parts.reg}};
  for (const auto& [name, value] : named) {
    if (!std::isfinite(static_cast<double>(value))) throw NumericError(std::string("non-finite loss term: ") + name);
  }
  if (!(lambda >= Scalar(0))) throw ParameterError("total_loss: lambda must be non-negative");
  return parts.relight + parts.albedo + parts.consistency + lambda * (parts.invariant + parts.reg);
}

}  // namespace latsplit
