#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "latsplit/tensor.hpp"

namespace latsplit {

inline constexpr double kPsnrCap = 99.0;

// Peak 1.0; identical inputs report the 99 dB cap.
template <typename Scalar>
double psnr(const Tensor<Scalar>& lhs, const Tensor<Scalar>& rhs) {
  require_same_shape(lhs, rhs, "psnr");
  const double mse = (lhs.matrix().template cast<double>() - rhs.matrix().template cast<double>()).squaredNorm() /
                     static_cast<double>(lhs.size());
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
};

namespace detail {

// Valid-region separable Gaussian filter.
inline Eigen::MatrixXd gaussian_filter_valid(const Eigen::MatrixXd& img, const std::vector<double>& taps) {
  const int n = static_cast<int>(taps.size());
  const int H = static_cast<int>(img.rows()), W = static_cast<int>(img.cols());
  Eigen::MatrixXd tmp(H, W - n + 1);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x + n <= W; ++x) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += taps[k] * img(y, x + k);
      tmp(y, x) = acc;
    }
  }
  Eigen::MatrixXd out(H - n + 1, W - n + 1);
  for (int y = 0; y + n <= H; ++y) {
    for (int x = 0; x < out.cols(); ++x) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += taps[k] * tmp(y + k, x);
      out(y, x) = acc;
    }
  }
  return out;
}

}  // namespace detail

// Per-channel SSIM with a Gaussian window over the valid region (no padding),
// averaged over positions, channels and batch.
template <typename Scalar>
double ssim(const Tensor<Scalar>& lhs, const Tensor<Scalar>& rhs, const SsimOptions& opt = {}) {
  require_same_shape(lhs, rhs, "ssim");
  if (lhs.height() < opt.window || lhs.width() < opt.window) {
    throw ParameterError("ssim: image smaller than the " + std::to_string(opt.window) + "px window");
  }
  const int r = opt.window / 2;
  std::vector<double> taps(opt.window);
  double sum = 0.0;
  for (int k = 0; k < opt.window; ++k) sum += taps[k] = std::exp(-0.5 * (k - r) * (k - r) / (opt.sigma * opt.sigma));
  for (double& v : taps) v /= sum;

  const int H = lhs.height(), W = lhs.width();
  double total = 0.0;
  long count = 0;
  for (int n = 0; n < lhs.batch(); ++n) {
    for (int ch = 0; ch < lhs.channels(); ++ch) {
      Eigen::MatrixXd x(H, W), y(H, W);
      for (int i = 0; i < H; ++i) {
        for (int j = 0; j < W; ++j) {
          x(i, j) = static_cast<double>(lhs(n, i, j, ch));
          y(i, j) = static_cast<double>(rhs(n, i, j, ch));
        }
      }
      const Eigen::ArrayXXd mx = detail::gaussian_filter_valid(x, taps).array();
      const Eigen::ArrayXXd my = detail::gaussian_filter_valid(y, taps).array();
      const Eigen::ArrayXXd sxx = detail::gaussian_filter_valid(x.cwiseProduct(x), taps).array() - mx * mx;
      const Eigen::ArrayXXd syy = detail::gaussian_filter_valid(y.cwiseProduct(y), taps).array() - my * my;
      const Eigen::ArrayXXd sxy = detail::gaussian_filter_valid(x.cwiseProduct(y), taps).array() - mx * my;
      const Eigen::ArrayXXd map = ((2.0 * mx * my + opt.c1) * (2.0 * sxy + opt.c2)) /
                                  ((mx * mx + my * my + opt.c1) * (sxx + syy + opt.c2));
      total += map.sum();
      count += map.size();
    }
  }
  return total / static_cast<double>(count);
}

struct ConsistencyReport {
  std::vector<double> scene_psnr;
  std::vector<double> scene_ssim;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

// Per scene: mean metric of every prediction against the scene's ground truth;
// then the plain mean over scenes.
ConsistencyReport consistency_eval(const std::vector<std::vector<Image>>& predictions, const std::vector<Image>& gts);

void write_consistency_report(const ConsistencyReport& report, const std::filesystem::path& csv_path,
                              const std::filesystem::path& json_path);

struct Pixel {
  int x = 0;
  int y = 0;
};

enum class Darker { kFirst, kSecond, kEqual };

struct Judgment {
  Pixel p1;
  Pixel p2;
  Darker darker = Darker::kEqual;
  double weight = 1.0;
};

using JudgmentSet = std::vector<Judgment>;

inline constexpr double kWhdrDelta = 0.10;
inline constexpr double kLuminanceFloor = 1e-6;

// Relation implied by an albedo for one point pair, using the WHDR threshold rule.
Darker predicted_relation(const Image& albedo, const Pixel& p1, const Pixel& p2, double delta = kWhdrDelta);

void validate_judgments(const JudgmentSet& judgments, int height, int width);

// Weighted fraction of judgments that the albedo's relative brightness contradicts.
double whdr(const Image& albedo, const JudgmentSet& judgments, double delta = kWhdrDelta);

// Random point pairs labelled from a ground-truth albedo by the rule whdr uses.
JudgmentSet synth_judgments(const Image& gt_albedo, int n, double delta, std::uint64_t seed);

// JSON list of {p1:[x,y], p2:[x,y], darker:"1"|"2"|"E", weight}.
void write_judgments(const JudgmentSet& judgments, const std::filesystem::path& path);
JudgmentSet read_judgments(const std::filesystem::path& path);

}  // namespace latsplit
