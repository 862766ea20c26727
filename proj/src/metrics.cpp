#include "latsplit/metrics.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "latsplit/random.hpp"

namespace latsplit {

using nlohmann::json;

ConsistencyReport consistency_eval(const std::vector<std::vector<Image>>& predictions, const std::vector<Image>& gts) {
  if (predictions.size() != gts.size()) {
    throw ParameterError("consistency_eval: " + std::to_string(predictions.size()) + " prediction sets but " +
                         std::to_string(gts.size()) + " ground truths");
  }
  ConsistencyReport report;
  for (size_t s = 0; s < gts.size(); ++s) {
    if (gts[s].empty()) throw ParameterError("consistency_eval: missing ground truth for scene " + std::to_string(s));
    if (predictions[s].empty()) throw ParameterError("consistency_eval: no predictions for scene " + std::to_string(s));
    double p = 0.0, q = 0.0;
    for (const Image& pred : predictions[s]) {
      p += psnr(pred, gts[s]);
      q += ssim(pred, gts[s]);
    }
    report.scene_psnr.push_back(p / predictions[s].size());
    report.scene_ssim.push_back(q / predictions[s].size());
  }
  if (!gts.empty()) {
    for (size_t s = 0; s < gts.size(); ++s) {
      report.mean_psnr += report.scene_psnr[s];
      report.mean_ssim += report.scene_ssim[s];
    }
    report.mean_psnr /= gts.size();
    report.mean_ssim /= gts.size();
  }
  return report;
}

void write_consistency_report(const ConsistencyReport& report, const std::filesystem::path& csv_path,
                              const std::filesystem::path& json_path) {
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot write " + csv_path.string());
  csv << "scene,psnr,ssim\n";
  csv.precision(10);
  for (size_t s = 0; s < report.scene_psnr.size(); ++s) {
    csv << s << "," << report.scene_psnr[s] << "," << report.scene_ssim[s] << "\n";
  }
  csv << "mean," << report.mean_psnr << "," << report.mean_ssim << "\n";

  std::ofstream js(json_path);
  if (!js) throw IoError("cannot write " + json_path.string());
  js << json{{"scene_psnr", report.scene_psnr},
             {"scene_ssim", report.scene_ssim},
             {"mean_psnr", report.mean_psnr},
             {"mean_ssim", report.mean_ssim}}
            .dump(2)
     << "\n";
}

namespace {

double luminance(const Image& img, const Pixel& p) {
  const double l = (static_cast<double>(img(p.y, p.x, 0)) + img(p.y, p.x, 1) + img(p.y, p.x, 2)) / 3.0;
  return std::max(l, kLuminanceFloor);
}

const char* label_name(Darker d) {
  switch (d) {
    case Darker::kFirst:
      return "1";
    case Darker::kSecond:
      return "2";
    case Darker::kEqual:
      return "E";
  }
  return "E";
}

}  // namespace

Darker predicted_relation(const Image& albedo, const Pixel& p1, const Pixel& p2, double delta) {
  const double l1 = luminance(albedo, p1);
  const double l2 = luminance(albedo, p2);
  const double ratio = l1 / l2;
  if (ratio >= 1.0 / (1.0 + delta) && ratio <= 1.0 + delta) return Darker::kEqual;
  return l1 < l2 ? Darker::kFirst : Darker::kSecond;
}

void validate_judgments(const JudgmentSet& judgments, int height, int width) {
  if (judgments.empty()) throw ParameterError("judgment set is empty");
  for (size_t i = 0; i < judgments.size(); ++i) {
    const Judgment& j = judgments[i];
    for (const Pixel& p : {j.p1, j.p2}) {
      if (p.x < 0 || p.y < 0 || p.x >= width || p.y >= height) {
        throw ParameterError("judgment " + std::to_string(i) + ": point out of bounds");
      }
    }
    if (!std::isfinite(j.weight) || j.weight < 0.0) {
      throw ParameterError("judgment " + std::to_string(i) + ": weight must be finite and non-negative");
    }
  }
}

double whdr(const Image& albedo, const JudgmentSet& judgments, double delta) {
  validate_judgments(judgments, albedo.height(), albedo.width());
  double wrong = 0.0, total = 0.0;
  for (const Judgment& j : judgments) {
    total += j.weight;
    if (predicted_relation(albedo, j.p1, j.p2, delta) != j.darker) wrong += j.weight;
  }
  if (total <= 0.0) throw ParameterError("whdr: total judgment weight is zero");
  return wrong / total;
}

JudgmentSet synth_judgments(const Image& gt_albedo, int n, double delta, std::uint64_t seed) {
  if (n < 1) throw ParameterError("synth_judgments: n must be >= 1");
  Rng rng(mix_seed(seed, 0x1177));
  JudgmentSet out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Judgment j;
    j.p1 = {uniform_int(rng, 0, gt_albedo.width() - 1), uniform_int(rng, 0, gt_albedo.height() - 1)};
    j.p2 = {uniform_int(rng, 0, gt_albedo.width() - 1), uniform_int(rng, 0, gt_albedo.height() - 1)};
    j.weight = uniform(rng, 0.5, 1.0);
    j.darker = predicted_relation(gt_albedo, j.p1, j.p2, delta);
    out.push_back(j);
  }
  return out;
}

void write_judgments(const JudgmentSet& judgments, const std::filesystem::path& path) {
  json list = json::array();
  for (const Judgment& j : judgments) {
    list.push_back({{"p1", {j.p1.x, j.p1.y}}, {"p2", {j.p2.x, j.p2.y}}, {"darker", label_name(j.darker)},
                    {"weight", j.weight}});
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << list.dump(2) << "\n";
}

JudgmentSet read_judgments(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  JudgmentSet out;
  try {
    const json list = json::parse(in);
    for (const auto& item : list) {
      Judgment j;
      const auto p1 = item.at("p1").get<std::vector<int>>();
      const auto p2 = item.at("p2").get<std::vector<int>>();
      if (p1.size() != 2 || p2.size() != 2) throw FormatError(path.string() + ": points must be [x, y]");
      j.p1 = {p1[0], p1[1]};
      j.p2 = {p2[0], p2[1]};
      const auto label = item.at("darker").get<std::string>();
      if (label == "1") {
        j.darker = Darker::kFirst;
      } else if (label == "2") {
        j.darker = Darker::kSecond;
      } else if (label == "E") {
        j.darker = Darker::kEqual;
      } else {
        throw FormatError(path.string() + ": darker must be \"1\", \"2\" or \"E\"");
      }
      j.weight = item.at("weight").get<double>();
      out.push_back(j);
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace latsplit
