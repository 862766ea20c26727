#include "latsplit/autoencoder.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>

#include "latsplit/log.hpp"

namespace latsplit {

void AutoencoderConfig::validate() const {
  if (downsample_factor < 2 || (downsample_factor & (downsample_factor - 1)) != 0) {
    throw ParameterError("autoencoder.downsample_factor must be a power of 2 >= 2");
  }
  if (latent_channels < 1) throw ParameterError("autoencoder.latent_channels must be >= 1");
  if (base_width < 1) throw ParameterError("autoencoder.base_width must be >= 1");
  if (!(kl_weight >= 0.0)) throw ParameterError("autoencoder.kl_weight must be >= 0");
  if (epochs < 1) throw ParameterError("autoencoder.epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ParameterError("autoencoder.learning_rate must be > 0");
  if (batch_size < 1) throw ParameterError("autoencoder.batch_size must be >= 1");
}

Autoencoder::Autoencoder(const AutoencoderConfig& config) : config_(config) {
  config_.validate();
  Rng rng(mix_seed(config.seed, 0xAE));
  net_ = AutoencoderNet<float>(config_, rng);
}

void Autoencoder::warn_if_unfrozen() const {
  if (!frozen_) log_warn("autoencoder used for inference before being frozen");
}

Latent Autoencoder::encode(const Image& images) const {
  const int f = config_.downsample_factor;
  if (images.channels() != 3 || images.height() % f != 0 || images.width() % f != 0 || images.height() / f < 2 ||
      images.width() / f < 2) {
    throw DimensionError("encode: image " + to_string(images.shape()) + " incompatible with downsample factor " +
                         std::to_string(f));
  }
  warn_if_unfrozen();
  const Tensor<float> stats = net_.encode_stats(images, nullptr);
  return channel_range(stats, 0, config_.latent_channels);
}

Image Autoencoder::decode(const Latent& latents) const {
  if (latents.channels() != config_.latent_channels) {
    throw DimensionError("decode: latent " + to_string(latents.shape()) + " expects " +
                         std::to_string(config_.latent_channels) + " channels");
  }
  warn_if_unfrozen();
  return net_.decode(latents, nullptr);
}

std::uint64_t Autoencoder::digest() const {
  auto params = const_cast<AutoencoderNet<float>&>(net_).parameters();
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto* p : params) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
    for (size_t i = 0; i < p->value.size() * sizeof(float); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

Image batch_images(const std::vector<const Image*>& images) {
  if (images.empty()) throw ParameterError("batch_images: empty batch");
  Shape s = images.front()->shape();
  s.n = static_cast<int>(images.size());
  Image out(s);
  for (size_t i = 0; i < images.size(); ++i) out.set_slice(static_cast<int>(i), *images[i]);
  return out;
}

double train_autoencoder_epoch(Autoencoder& model, nn::Adam<float>& optimizer, const std::vector<const Image*>& images,
                               int batch_size, Rng& rng) {
  if (model.frozen()) throw StateError("train_autoencoder: parameters are frozen");
  const int c = model.config().latent_channels;
  const float kl_weight = static_cast<float>(model.config().kl_weight);
  auto params = model.net().parameters();
  double loss_sum = 0.0;
  int batches = 0;
  for (size_t first = 0; first < images.size(); first += batch_size) {
    const size_t last = std::min(images.size(), first + batch_size);
    const Image x = batch_images({images.begin() + first, images.begin() + last});

    nn::Tape<float> tape;
    nn::zero_grad(params);
    const Tensor<float> stats = model.net().encode_stats(x, &tape);
    const Tensor<float> mu = channel_range(stats, 0, c);
    const Tensor<float> logvar = channel_range(stats, c, c);
    const Tensor<float> eps = normal_tensor<float>(mu.shape(), rng);
    const Mat<float> stddev = (0.5f * logvar.array()).exp().matrix();
    const Tensor<float> z(mu.shape(), mu.matrix() + stddev.cwiseProduct(eps.matrix()));
    const Tensor<float> recon = model.net().decode(z, &tape);

    const float n_pix = static_cast<float>(recon.size());
    const float n_lat = static_cast<float>(mu.size());
    const Mat<float> diff = recon.matrix() - x.matrix();
    const double rec_loss = diff.squaredNorm() / n_pix;
    const double kl = 0.5 * (mu.array().square() + logvar.array().exp() - 1.0f - logvar.array()).sum() / n_lat;
    loss_sum += rec_loss + kl_weight * kl;
    ++batches;

    const Tensor<float> dz = model.net().decode_backward(Tensor<float>(recon.shape(), (2.0f / n_pix) * diff), tape);
    Mat<float> dmu = dz.matrix() + (kl_weight / n_lat) * mu.matrix();
    Mat<float> dlogvar = (0.5f * dz.array() * stddev.array() * eps.array()).matrix() +
                         ((kl_weight * 0.5f / n_lat) * (logvar.array().exp() - 1.0f)).matrix();
    Mat<float> dstats(stats.matrix().rows(), 2 * c);
    dstats << dmu, dlogvar;
    model.net().encode_stats_backward(Tensor<float>(stats.shape(), std::move(dstats)), tape);
    optimizer.step(params);
  }
  return batches ? loss_sum / batches : 0.0;
}

Autoencoder train_autoencoder(const std::vector<SceneSample>& dataset, const AutoencoderConfig& config,
                              const EpochCallback& on_epoch) {
  if (dataset.empty()) throw ParameterError("train_autoencoder: empty dataset");
  config.validate();
  Autoencoder model(config);
  std::vector<const Image*> images;
  for (const auto& scene : dataset) {
    images.push_back(&scene.albedo);
    for (const auto& img : scene.images) images.push_back(&img);
  }
  for (const Image* img : images) validate_image(*img, config.downsample_factor);

  Rng rng(mix_seed(config.seed, 0x7A1));
  nn::AdamOptions opts;
  opts.learning_rate = config.learning_rate;
  nn::Adam<float> optimizer(opts);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(images.begin(), images.end(), rng);
    // cosine decay keeps the last epochs from bouncing around
    const double progress = static_cast<double>(epoch) / config.epochs;
    optimizer.set_learning_rate(config.learning_rate * 0.5 * (1.0 + std::cos(M_PI * progress)));
    const double loss = train_autoencoder_epoch(model, optimizer, images, config.batch_size, rng);
    model.history().epoch_loss.push_back(loss);
    if (on_epoch) on_epoch(epoch, loss);
  }
  model.freeze();
  return model;
}

}  // namespace latsplit
