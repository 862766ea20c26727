#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "latsplit/losses.hpp"
#include "latsplit/nn/layers.hpp"

namespace latsplit {

struct DenoiserConfig {
  int latent_channels = 4;
  int base_width = 32;
  int time_features = 32;   // sinusoidal features of t
  int time_embed_dim = 64;
  int timesteps = 1000;     // T of the schedule the model is trained with
  double cond_dropout_prob = 0.1;
  std::uint64_t seed = 2;

  void validate() const;
};

// Sinusoidal embedding of integer timesteps, one row per batch element.
template <typename Scalar>
Mat<Scalar> timestep_features(const std::vector<int>& t, int features) {
  Mat<Scalar> out(static_cast<Eigen::Index>(t.size()), features);
  const int half = features / 2;
  for (size_t b = 0; b < t.size(); ++b) {
    for (int k = 0; k < half; ++k) {
      const double freq = std::exp(-std::log(10000.0) * k / half);
      out(b, k) = static_cast<Scalar>(std::sin(t[b] * freq));
      out(b, half + k) = static_cast<Scalar>(std::cos(t[b] * freq));
    }
  }
  return out;
}

// Pre-activation residual block with an additive timestep bias.
template <typename Scalar>
class ResBlock {
 public:
  ResBlock() = default;
  ResBlock(const std::string& name, int channels, int embed_dim, Rng& rng)
      : conv1_(name + ".conv1", channels, channels, 3, 1, rng),
        conv2_(name + ".conv2", channels, channels, 3, 1, rng, 0.5),
        emb_(name + ".emb", embed_dim, channels, rng, 0.5) {}

  Tensor<Scalar> forward(const Tensor<Scalar>& x, const Mat<Scalar>& emb, nn::Tape<Scalar>* tape) const {
    Tensor<Scalar> h = conv1_.forward(nn::silu_forward(x, tape), tape);
    nn::add_sample_bias(h, emb_.forward(emb, tape));
    h = conv2_.forward(nn::silu_forward(h, tape), tape);
    return x + h;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy, nn::Tape<Scalar>& tape, Mat<Scalar>& d_emb) {
    Tensor<Scalar> dh = nn::silu_backward(conv2_.backward(dy, tape), tape);
    d_emb += emb_.backward(nn::sample_bias_backward(dh), tape);
    dh = nn::silu_backward(conv1_.backward(dh, tape), tape);
    return dy + dh;
  }

  void collect(nn::ParameterList<Scalar>& out) {
    conv1_.collect(out);
    conv2_.collect(out);
    emb_.collect(out);
  }

 private:
  nn::Conv2d<Scalar> conv1_;
  nn::Conv2d<Scalar> conv2_;
  nn::Linear<Scalar> emb_;
};

// Two-level UNet F(noisy, t, cond) -> {albedo latent, lighting latent}. The
// conditioning latent is concatenated to the noisy latent along channels; an
// all-zero condition is the unconditional branch.
template <typename Scalar>
class DenoiserNet {
 public:
  DenoiserNet() = default;

  DenoiserNet(const DenoiserConfig& config, Rng& rng)
      : channels_(config.latent_channels), time_features_(config.time_features) {
    const int w = config.base_width;
    const int e = config.time_embed_dim;
    time1_ = nn::Linear<Scalar>("time.fc1", config.time_features, e, rng);
    time2_ = nn::Linear<Scalar>("time.fc2", e, e, rng);
    conv_in_ = nn::Conv2d<Scalar>("in", 2 * channels_, w, 3, 1, rng);
    res1_ = ResBlock<Scalar>("res1", w, e, rng);
    down_ = nn::Conv2d<Scalar>("down", w, 2 * w, 3, 2, rng);
    res2_ = ResBlock<Scalar>("res2", 2 * w, e, rng);
    res3_ = ResBlock<Scalar>("res3", 2 * w, e, rng);
    up_ = nn::Conv2d<Scalar>("up", 2 * w, w, 3, 1, rng);
    merge_ = nn::Conv2d<Scalar>("merge", 2 * w, w, 3, 1, rng);
    res4_ = ResBlock<Scalar>("res4", w, e, rng);
    conv_out_ = nn::Conv2d<Scalar>("out", w, 2 * channels_, 3, 1, rng);
  }

  int latent_channels() const { return channels_; }

  Decomposition<Scalar> forward(const Tensor<Scalar>& noisy, const std::vector<int>& t, const Tensor<Scalar>& cond,
                                nn::Tape<Scalar>* tape) const {
    require_same_shape(noisy, cond, "denoise_decompose");
    if (noisy.channels() != channels_) {
      throw DimensionError("denoise_decompose: expected " + std::to_string(channels_) + " latent channels, got " +
                           std::to_string(noisy.channels()));
    }
    if (noisy.height() % 2 != 0 || noisy.width() % 2 != 0 || noisy.height() < 2 || noisy.width() < 2) {
      throw DimensionError("denoise_decompose: latent size must be even, got " + to_string(noisy.shape()));
    }
    if (static_cast<int>(t.size()) != noisy.batch()) throw DimensionError("denoise_decompose: one timestep per sample");

    Mat<Scalar> emb = nn::silu_forward(time1_.forward(timestep_features<Scalar>(t, time_features_), tape), tape);
    emb = nn::silu_forward(time2_.forward(emb, tape), tape);

    const Tensor<Scalar> h1 = res1_.forward(conv_in_.forward(concat_channels(noisy, cond), tape), emb, tape);
    Tensor<Scalar> h = res2_.forward(down_.forward(h1, tape), emb, tape);
    h = res3_.forward(h, emb, tape);
    const Tensor<Scalar> u = nn::silu_forward(up_.forward(nn::upsample2x(h), tape), tape);
    h = res4_.forward(merge_.forward(concat_channels(u, h1), tape), emb, tape);
    const Tensor<Scalar> out = conv_out_.forward(nn::silu_forward(h, tape), tape);
    return {channel_range(out, 0, channels_), channel_range(out, channels_, channels_)};
  }

  // Accumulates parameter gradients for d loss / d {albedo, lighting}.
  void backward(const Decomposition<Scalar>& grad, nn::Tape<Scalar>& tape) {
    const Tensor<Scalar> dout = concat_channels(grad.albedo, grad.lighting);
    Mat<Scalar> d_emb;
    Tensor<Scalar> d = nn::silu_backward(conv_out_.backward(dout, tape), tape);
    d_emb = Mat<Scalar>::Zero(d.batch(), time2_emb_dim());
    d = merge_.backward(res4_.backward(d, tape, d_emb), tape);
    const int w = d.channels() / 2;
    const Tensor<Scalar> d_u = channel_range(d, 0, w);
    const Tensor<Scalar> d_skip = channel_range(d, w, w);
    Tensor<Scalar> dh = nn::upsample2x_backward(up_.backward(nn::silu_backward(d_u, tape), tape));
    dh = res2_.backward(res3_.backward(dh, tape, d_emb), tape, d_emb);
    Tensor<Scalar> d_h1 = down_.backward(dh, tape) + d_skip;
    conv_in_.backward(res1_.backward(d_h1, tape, d_emb), tape);

    Mat<Scalar> de = time2_.backward(nn::silu_backward(d_emb, tape), tape);
    time1_.backward(nn::silu_backward(de, tape), tape);
  }

  nn::ParameterList<Scalar> parameters() {
    nn::ParameterList<Scalar> out;
    time1_.collect(out);
    time2_.collect(out);
    conv_in_.collect(out);
    res1_.collect(out);
    down_.collect(out);
    res2_.collect(out);
    res3_.collect(out);
    up_.collect(out);
    merge_.collect(out);
    res4_.collect(out);
    conv_out_.collect(out);
    return out;
  }

 private:
  int time2_emb_dim() { return static_cast<int>(time2_.output_dim()); }

  int channels_ = 0;
  int time_features_ = 0;
  nn::Linear<Scalar> time1_;
  nn::Linear<Scalar> time2_;
  nn::Conv2d<Scalar> conv_in_;
  ResBlock<Scalar> res1_;
  nn::Conv2d<Scalar> down_;
  ResBlock<Scalar> res2_;
  ResBlock<Scalar> res3_;
  nn::Conv2d<Scalar> up_;
  nn::Conv2d<Scalar> merge_;
  ResBlock<Scalar> res4_;
  nn::Conv2d<Scalar> conv_out_;
};

inline constexpr const char* kDenoiserVersion = "latsplit-denoiser/1";

// Trained denoiser parameters with the metadata inference needs.
struct Denoiser {
  DenoiserConfig config;
  DenoiserNet<float> net;
  long steps_trained = 0;
  // Divides autoencoder latents so the diffusion sees unit-order variance.
  double latent_scale = 1.0;

  Denoiser() = default;
  explicit Denoiser(const DenoiserConfig& cfg);

  bool trained() const { return steps_trained > 0; }

  Decomposition<float> forward(const Latent& noisy, const std::vector<int>& t, const Latent& cond,
                               nn::Tape<float>* tape) const {
    return net.forward(noisy, t, cond, tape);
  }
  void backward(const Decomposition<float>& grad, nn::Tape<float>& tape) { net.backward(grad, tape); }
  nn::ParameterList<float> parameters() { return net.parameters(); }
};

// Single-sample convenience: an empty `cond` selects the unconditional branch.
template <typename Model, typename Scalar>
Decomposition<Scalar> denoise_decompose(const Model& model, const Tensor<Scalar>& noisy, int t,
                                        const Tensor<Scalar>* cond) {
  const Tensor<Scalar> zero(noisy.shape());
  std::vector<int> ts(noisy.batch(), t);
  return model.forward(noisy, ts, cond ? *cond : zero, nullptr);
}

}  // namespace latsplit
