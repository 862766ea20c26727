#include "latsplit/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "latsplit/config_io.hpp"

namespace latsplit {

DistributionReport analyze_latents(const Latent& latents, int bins) {
  if (latents.size() == 0) throw ParameterError("analyze_latents: no entries");
  if (bins < 1) throw ParameterError("analyze_latents: bins must be >= 1");
  const Mat<float>& m = latents.matrix();
  DistributionReport out;
  RunningStats all;
  std::vector<RunningStats> channel(static_cast<size_t>(latents.channels()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      if (!std::isfinite(v)) throw NumericError("analyze_latents: non-finite entry");
      all.add(v);
      channel[c].add(v);
    }
  }
  out.count = all.count();
  out.mean = all.mean();
  out.std = std::sqrt(all.variance());
  out.positive_fraction = static_cast<double>(all.positive()) / static_cast<double>(all.count());
  for (const RunningStats& s : channel) {
    out.per_channel.push_back({s.count(), s.mean(), std::sqrt(s.variance()),
                               static_cast<double>(s.positive()) / static_cast<double>(s.count())});
  }

  out.min = m.minCoeff();
  out.max = m.maxCoeff();
  double lo = out.min, hi = out.max;
  if (hi <= lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  out.edges.resize(bins + 1);
  for (int i = 0; i <= bins; ++i) out.edges[i] = lo + (hi - lo) * i / bins;
  out.counts.assign(bins, 0);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double v = m.data()[i];
    const int b = std::clamp(static_cast<int>((v - lo) / (hi - lo) * bins), 0, bins - 1);
    ++out.counts[b];
  }
  return out;
}

ChannelStats two_pass_stats(const Latent& latents) {
  if (latents.size() == 0) throw ParameterError("two_pass_stats: no entries");
  const Eigen::ArrayXXd v = latents.matrix().cast<double>().array();
  ChannelStats s;
  s.count = static_cast<long>(v.size());
  s.mean = v.sum() / static_cast<double>(s.count);
  s.std = std::sqrt((v - s.mean).square().sum() / static_cast<double>(s.count));
  s.positive_fraction = static_cast<double>((v > 0.0).count()) / static_cast<double>(s.count);
  return s;
}

DistributionReport analyze_lighting_latents(const std::vector<SceneSample>& dataset, const Autoencoder& ae) {
  if (dataset.empty()) throw ParameterError("analyze_lighting_latents: empty dataset");
  std::vector<Latent> parts;
  int rows = 0;
  for (const SceneSample& scene : dataset) {
    const Latent albedo = ae.encode(scene.albedo);
    std::vector<const Image*> ptrs;
    for (const Image& img : scene.images) ptrs.push_back(&img);
    Latent lit = ae.encode(batch_images(ptrs));
    for (int k = 0; k < lit.batch(); ++k) lit.sample_rows(k) -= albedo.matrix();
    rows += lit.batch();
    parts.push_back(std::move(lit));
  }
  Shape s = parts.front().shape();
  s.n = rows;
  Latent all(s);
  int row = 0;
  for (const Latent& p : parts) {
    all.set_slice(row, p);
    row += p.batch();
  }
  return analyze_latents(all);
}

nlohmann::json to_json(const DistributionReport& report) {
  Json channels = Json::array();
  for (const ChannelStats& c : report.per_channel) {
    channels.push_back({{"count", c.count}, {"mean", c.mean}, {"std", c.std}, {"positive_fraction", c.positive_fraction}});
  }
  return Json{{"count", report.count},
              {"mean", report.mean},
              {"std", report.std},
              {"min", report.min},
              {"max", report.max},
              {"positive_fraction", report.positive_fraction},
              {"histogram", {{"edges", report.edges}, {"counts", report.counts}}},
              {"per_channel", channels}};
}

void write_distribution_report(const DistributionReport& report, const std::filesystem::path& json_path) {
  write_json_file(json_path, to_json(report));
}

}  // namespace latsplit
