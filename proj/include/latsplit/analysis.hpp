#pragma once

#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "latsplit/autoencoder.hpp"
#include "latsplit/scene_gen.hpp"

namespace latsplit {

inline constexpr int kHistogramBins = 64;

struct ChannelStats {
  long count = 0;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  double positive_fraction = 0.0;
};

struct DistributionReport {
  std::vector<double> edges;  // bins + 1, spanning the observed [min, max]
  std::vector<long> counts;
  long count = 0;
  double mean = 0.0;
  double std = 0.0;
  double positive_fraction = 0.0;  // strictly positive entries
  double min = 0.0;
  double max = 0.0;
  std::vector<ChannelStats> per_channel;
};

// Welford accumulator.
class RunningStats {
 public:
  void add(double x) {
    ++count_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(count_);
    m2_ += d * (x - mean_);
    if (x > 0.0) ++positive_;
  }
  long count() const { return count_; }
  double mean() const { return mean_; }
  double variance() const { return count_ ? m2_ / static_cast<double>(count_) : 0.0; }
  long positive() const { return positive_; }

 private:
  long count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  long positive_ = 0;
};

// Streaming statistics of injected latents, bypassing any encoder.
DistributionReport analyze_latents(const Latent& latents, int bins = kHistogramBins);

// Reference statistics from an explicit two-pass computation (mean, then
// squared deviations); used to cross-check the streaming path.
ChannelStats two_pass_stats(const Latent& latents);

// Lighting latent of every image relative to its scene's ground truth:
// encode(image) - encode(albedo), aggregated over the dataset.
DistributionReport analyze_lighting_latents(const std::vector<SceneSample>& dataset, const Autoencoder& ae);

nlohmann::json to_json(const DistributionReport& report);
void write_distribution_report(const DistributionReport& report, const std::filesystem::path& json_path);

}  // namespace latsplit
