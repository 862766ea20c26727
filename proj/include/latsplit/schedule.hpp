#pragma once

#include <cmath>
#include <vector>

#include "latsplit/errors.hpp"
#include "latsplit/tensor.hpp"

namespace latsplit {

// Variance-preserving schedule. Timesteps run 1..T; alpha_bar(0) is defined as 1.
class NoiseSchedule {
 public:
  NoiseSchedule() = default;

  // Linear betas from beta_start to beta_end over T steps.
  static NoiseSchedule linear(int timesteps, double beta_start = 1e-4, double beta_end = 2e-2) {
    if (timesteps < 1) throw ParameterError("make_schedule: T must be >= 1, got " + std::to_string(timesteps));
    NoiseSchedule s;
    s.betas_.resize(timesteps);
    s.alpha_bar_.resize(timesteps);
    double running = 1.0;
    for (int i = 0; i < timesteps; ++i) {
      const double frac = timesteps == 1 ? 0.0 : static_cast<double>(i) / (timesteps - 1);
      s.betas_[i] = beta_start + frac * (beta_end - beta_start);
      running *= 1.0 - s.betas_[i];
      s.alpha_bar_[i] = running;
    }
    return s;
  }

  // Builds a schedule from explicit cumulative products (must be strictly decreasing in (0, 1]).
  static NoiseSchedule from_alpha_bar(std::vector<double> alpha_bar) {
    if (alpha_bar.empty()) throw ParameterError("from_alpha_bar: empty schedule");
    NoiseSchedule s;
    double prev = 1.0;
    for (double a : alpha_bar) {
      if (!(a > 0.0 && a <= prev)) throw ParameterError("from_alpha_bar: alpha_bar must be non-increasing in (0, 1]");
      s.betas_.push_back(1.0 - a / prev);
      prev = a;
    }
    s.alpha_bar_ = std::move(alpha_bar);
    return s;
  }

  int timesteps() const { return static_cast<int>(alpha_bar_.size()); }
  double beta(int t) const { return betas_.at(check(t) - 1); }
  double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bar_.at(check(t) - 1); }
  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bar_; }

 private:
  int check(int t) const {
    if (t < 0 || t > timesteps()) {
      throw ParameterError("timestep " + std::to_string(t) + " outside [0, " + std::to_string(timesteps()) + "]");
    }
    return t;
  }

  std::vector<double> betas_;
  std::vector<double> alpha_bar_;
};

inline NoiseSchedule make_schedule(int timesteps) { return NoiseSchedule::linear(timesteps); }

// sqrt(alpha_bar_t) z + sqrt(1 - alpha_bar_t) eps, 1 <= t <= T.
template <typename Scalar>
Tensor<Scalar> add_noise(const Tensor<Scalar>& z, const Tensor<Scalar>& eps, int t, const NoiseSchedule& sched) {
  require_same_shape(z, eps, "add_noise");
  if (t < 1 || t > sched.timesteps()) {
    throw ParameterError("add_noise: t=" + std::to_string(t) + " outside [1, " + std::to_string(sched.timesteps()) + "]");
  }
  const double ab = sched.alpha_bar(t);
  return Tensor<Scalar>(z.shape(), static_cast<Scalar>(std::sqrt(ab)) * z.matrix() +
                                       static_cast<Scalar>(std::sqrt(1.0 - ab)) * eps.matrix());
}

// Batched variant: one timestep per batch element.
template <typename Scalar>
Tensor<Scalar> add_noise(const Tensor<Scalar>& z, const Tensor<Scalar>& eps, const std::vector<int>& t,
                         const NoiseSchedule& sched) {
  require_same_shape(z, eps, "add_noise");
  if (static_cast<int>(t.size()) != z.batch()) throw DimensionError("add_noise: one timestep per batch element");
  Tensor<Scalar> out(z.shape());
  for (int b = 0; b < z.batch(); ++b) out.set_slice(b, add_noise(z.sample(b), eps.sample(b), t[b], sched));
  return out;
}

}  // namespace latsplit
