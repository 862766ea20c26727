#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "latsplit/nn/layers.hpp"
#include "latsplit/scene_gen.hpp"
#include "latsplit/tensor.hpp"

namespace latsplit {

struct AutoencoderConfig {
  int downsample_factor = 4;
  int latent_channels = 4;
  int base_width = 32;
  double kl_weight = 1e-6;
  int epochs = 12;
  double learning_rate = 2e-3;
  int batch_size = 8;
  std::uint64_t seed = 1;

  void validate() const;
};

// Convolutional VAE. The encoder emits a diagonal Gaussian posterior
// (mean, log-variance); inference uses the mean only.
template <typename Scalar>
class AutoencoderNet {
 public:
  AutoencoderNet() = default;

  AutoencoderNet(const AutoencoderConfig& config, Rng& rng) : latent_channels_(config.latent_channels) {
    int levels = 0;
    for (int f = config.downsample_factor; f > 1; f /= 2) ++levels;
    std::vector<int> width(levels + 1);
    // full resolution runs at half width; it dominates the cost
    for (int s = 0; s <= levels; ++s) width[s] = std::max(1, config.base_width * (1 << std::min(s, 2)) / 2);
    enc_in_ = nn::Conv2d<Scalar>("enc.in", 3, width[0], 3, 1, rng);
    for (int s = 0; s < levels; ++s) {
      const std::string name = "enc.down" + std::to_string(s);
      enc_down_.emplace_back(name, width[s], width[s + 1], 3, 2, rng);
      enc_mix_.emplace_back(name + ".mix", width[s + 1], width[s + 1], 3, 1, rng);
    }
    enc_out_ = nn::Conv2d<Scalar>("enc.out", width[levels], 2 * latent_channels_, 3, 1, rng, 0.5);
    // start with a narrow posterior so early sampling noise does not swamp the signal
    enc_out_.bias().value.rightCols(latent_channels_).setConstant(Scalar(-6));
    dec_in_ = nn::Conv2d<Scalar>("dec.in", latent_channels_, width[levels], 3, 1, rng);
    for (int s = levels - 1; s >= 0; --s) {
      const std::string name = "dec.up" + std::to_string(s);
      dec_up_.emplace_back(name, width[s + 1], width[s], 3, 1, rng);
      if (s > 0) dec_mix_.emplace_back(name + ".mix", width[s], width[s], 3, 1, rng);
    }
    dec_out_ = nn::Conv2d<Scalar>("dec.out", width[0], 3, 3, 1, rng, 0.5);
  }

  int latent_channels() const { return latent_channels_; }
  int downsample_factor() const { return 1 << static_cast<int>(enc_down_.size()); }

  // Returns the posterior statistics, 2c channels: [mean | log-variance].
  Tensor<Scalar> encode_stats(const Tensor<Scalar>& x, nn::Tape<Scalar>* tape) const {
    Tensor<Scalar> h = nn::silu_forward(enc_in_.forward(x, tape), tape);
    for (size_t s = 0; s < enc_down_.size(); ++s) {
      h = nn::silu_forward(enc_down_[s].forward(h, tape), tape);
      h = nn::silu_forward(enc_mix_[s].forward(h, tape), tape);
    }
    return enc_out_.forward(h, tape);
  }

  Tensor<Scalar> encode_stats_backward(const Tensor<Scalar>& dstats, nn::Tape<Scalar>& tape) {
    Tensor<Scalar> d = enc_out_.backward(dstats, tape);
    for (size_t s = enc_down_.size(); s-- > 0;) {
      d = enc_mix_[s].backward(nn::silu_backward(d, tape), tape);
      d = enc_down_[s].backward(nn::silu_backward(d, tape), tape);
    }
    return enc_in_.backward(nn::silu_backward(d, tape), tape);
  }

  Tensor<Scalar> decode(const Tensor<Scalar>& z, nn::Tape<Scalar>* tape) const {
    Tensor<Scalar> h = nn::silu_forward(dec_in_.forward(z, tape), tape);
    for (size_t s = 0; s < dec_up_.size(); ++s) {
      h = nn::silu_forward(dec_up_[s].forward(nn::upsample2x(h), tape), tape);
      if (s < dec_mix_.size()) h = nn::silu_forward(dec_mix_[s].forward(h, tape), tape);
    }
    return nn::sigmoid_forward(dec_out_.forward(h, tape), tape);
  }

  Tensor<Scalar> decode_backward(const Tensor<Scalar>& dimage, nn::Tape<Scalar>& tape) {
    Tensor<Scalar> d = dec_out_.backward(nn::sigmoid_backward(dimage, tape), tape);
    for (size_t s = dec_up_.size(); s-- > 0;) {
      if (s < dec_mix_.size()) d = dec_mix_[s].backward(nn::silu_backward(d, tape), tape);
      d = nn::upsample2x_backward(dec_up_[s].backward(nn::silu_backward(d, tape), tape));
    }
    return dec_in_.backward(nn::silu_backward(d, tape), tape);
  }

  nn::ParameterList<Scalar> parameters() {
    nn::ParameterList<Scalar> out;
    enc_in_.collect(out);
    for (size_t s = 0; s < enc_down_.size(); ++s) {
      enc_down_[s].collect(out);
      enc_mix_[s].collect(out);
    }
    enc_out_.collect(out);
    dec_in_.collect(out);
    for (size_t s = 0; s < dec_up_.size(); ++s) {
      dec_up_[s].collect(out);
      if (s < dec_mix_.size()) dec_mix_[s].collect(out);
    }
    dec_out_.collect(out);
    return out;
  }

 private:
  int latent_channels_ = 0;
  nn::Conv2d<Scalar> enc_in_;
  std::vector<nn::Conv2d<Scalar>> enc_down_;
  std::vector<nn::Conv2d<Scalar>> enc_mix_;
  nn::Conv2d<Scalar> enc_out_;
  nn::Conv2d<Scalar> dec_in_;
  std::vector<nn::Conv2d<Scalar>> dec_up_;
  std::vector<nn::Conv2d<Scalar>> dec_mix_;
  nn::Conv2d<Scalar> dec_out_;
};

struct AutoencoderHistory {
  std::vector<double> epoch_loss;  // mean training loss per epoch
};

inline constexpr const char* kAutoencoderVersion = "latsplit-autoencoder/1";

// Trained autoencoder parameters plus their metadata. Once frozen, training
// entry points refuse the object.
class Autoencoder {
 public:
  Autoencoder() = default;
  explicit Autoencoder(const AutoencoderConfig& config);

  const AutoencoderConfig& config() const { return config_; }
  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }
  const AutoencoderHistory& history() const { return history_; }
  AutoencoderHistory& history() { return history_; }

  // Posterior mean; images are N x H x W x 3 with H, W divisible by the factor.
  Latent encode(const Image& images) const;
  Image decode(const Latent& latents) const;

  AutoencoderNet<float>& net() { return net_; }
  const AutoencoderNet<float>& net() const { return net_; }

  // Bitwise digest of every parameter; used to assert the autoencoder stays untouched.
  std::uint64_t digest() const;

 private:
  void warn_if_unfrozen() const;

  AutoencoderConfig config_;
  AutoencoderNet<float> net_;
  AutoencoderHistory history_;
  bool frozen_ = false;
};

using EpochCallback = std::function<void(int epoch, double loss)>;

// Trains on every albedo and lit image of `dataset` and returns frozen parameters.
Autoencoder train_autoencoder(const std::vector<SceneSample>& dataset, const AutoencoderConfig& config,
                              const EpochCallback& on_epoch = {});

// One optimisation pass over `images` in the given order; rejects frozen models.
double train_autoencoder_epoch(Autoencoder& model, nn::Adam<float>& optimizer, const std::vector<const Image*>& images,
                               int batch_size, Rng& rng);

// Stacks single images into one batch tensor.
Image batch_images(const std::vector<const Image*>& images);

}  // namespace latsplit
