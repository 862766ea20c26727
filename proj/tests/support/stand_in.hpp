#pragma once

#include <vector>

#include "latsplit/losses.hpp"
#include "latsplit/nn/layers.hpp"

namespace test {

// Two-parameter linear denoiser: albedo = a * cond, lighting = b * noisy.
// Small enough that the full training loss can be differentiated numerically.
template <typename Scalar>
struct LinearStandIn {
  latsplit::nn::Parameter<Scalar> a{"a", latsplit::Mat<Scalar>::Constant(1, 1, Scalar(0.7))};
  latsplit::nn::Parameter<Scalar> b{"b", latsplit::Mat<Scalar>::Constant(1, 1, Scalar(-0.3))};
  mutable latsplit::Tensor<Scalar> last_noisy;
  mutable latsplit::Tensor<Scalar> last_cond;
  long steps_trained = 1;

  bool trained() const { return steps_trained > 0; }

  latsplit::Decomposition<Scalar> forward(const latsplit::Tensor<Scalar>& noisy, const std::vector<int>&,
                                      const latsplit::Tensor<Scalar>& cond, latsplit::nn::Tape<Scalar>*) const {
    last_noisy = noisy;
    last_cond = cond;
    return {latsplit::Tensor<Scalar>(cond.shape(), a.value(0, 0) * cond.matrix()),
            latsplit::Tensor<Scalar>(noisy.shape(), b.value(0, 0) * noisy.matrix())};
  }

  void backward(const latsplit::Decomposition<Scalar>& grad, latsplit::nn::Tape<Scalar>&) {
    a.grad(0, 0) += grad.albedo.matrix().cwiseProduct(last_cond.matrix()).sum();
    b.grad(0, 0) += grad.lighting.matrix().cwiseProduct(last_noisy.matrix()).sum();
  }

  latsplit::nn::ParameterList<Scalar> parameters() { return {&a, &b}; }
};

}  // namespace test
