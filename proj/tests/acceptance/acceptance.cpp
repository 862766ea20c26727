// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. The learning criteria (4-6) train an autoencoder and
// four denoisers on the toy dataset; expect tens of minutes on one core.
//
// Environment overrides: LATSPLIT_ACCEPT_STEPS (denoiser steps per variant),
// LATSPLIT_ACCEPT_DIR (work directory, default ./acceptance_run).

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "latsplit/analysis.hpp"
#include "latsplit/checkpoint.hpp"
#include "latsplit/config_io.hpp"
#include "latsplit/dataset.hpp"
#include "latsplit/image_io.hpp"
#include "latsplit/losses.hpp"
#include "latsplit/pipeline.hpp"
#include "latsplit/plot.hpp"
#include "latsplit/schedule.hpp"
#include "stand_in.hpp"

namespace fs = std::filesystem;
using namespace latsplit;
using T = Tensor<double>;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

const auto kStart = std::chrono::steady_clock::now();

void progress(const std::string& msg) {
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - kStart).count();
  std::cerr << "[" << std::fixed << std::setprecision(0) << s << " s] " << msg << std::endl;
}

T random_tensor(Shape s, unsigned seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  T t(s);
  for (long i = 0; i < t.size(); ++i) t.matrix().data()[i] = uniform(rng, lo, hi);
  return t;
}

T values(std::initializer_list<double> v) {
  T t(1, 1, static_cast<int>(v.size()), 1);
  int i = 0;
  for (double x : v) t(0, 0, i++, 0) = x;
  return t;
}

double max_abs(const T& a, const T& b) { return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff(); }

// ---- 1: loss identities ----------------------------------------------------

void loss_identities(Outcome& o) {
  const double tol = 1e-10;
  const T z = random_tensor({2, 4, 4, 4}, 1), a = random_tensor({2, 4, 4, 4}, 2);
  const T zero2 = values({0, 0});

  o.check(std::abs(loss_relight(z, Decomposition<double>{a, z - a})) < tol, "relight zero at exact recomposition");
  o.check(std::abs(loss_relight(values({1, 2}), Decomposition<double>{zero2, zero2}) - 2.5) < tol, "relight 2.5");

  const T same[] = {a, a, a};
  o.check(std::abs(loss_albedo<double>(same)) < tol, "albedo zero on identical latents");
  const T pair[] = {values({0}), values({2})};
  o.check(std::abs(loss_albedo<double>(pair) - 4.0) < tol, "albedo 4");

  o.check(std::abs(loss_consistency(z, a, z - a)) < tol, "consistency zero at exact recomposition");
  o.check(std::abs(loss_consistency(values({1}), values({0.5}), values({0})) - 0.25) < tol, "consistency 0.25");

  o.check(std::abs(loss_invariant(z, z)) < tol, "invariant zero when albedo equals image");
  o.check(std::abs(loss_invariant(values({2, 0}), zero2) - 2.0) < tol, "invariant 2.0");

  const T negative(z.shape(), -(z.matrix().cwiseAbs().array() + 0.1).matrix());
  o.check(std::abs(loss_reg(negative)) < tol, "reg zero on non-positive lighting");
  o.check(std::abs(loss_reg(values({-1, 2})) - 1.0) < tol, "reg 1.0");

  o.check(std::abs(total_loss(LossParts<double>{1, 1, 1, 1, 1}, 0.5) - 4.0) < tol, "total 4.0");
  o.detail << "five losses at 1e-10";
}

// ---- 2: gradients ----------------------------------------------------------

double rel_err(const T& a, const T& b) {
  return (a.matrix() - b.matrix()).norm() / std::max(1e-12, std::max(a.matrix().norm(), b.matrix().norm()));
}

T numeric_grad(T x, const std::function<double(const T&)>& f, double h = 1e-6) {
  T g(x.shape());
  for (long i = 0; i < x.size(); ++i) {
    const double keep = x.matrix().data()[i];
    x.matrix().data()[i] = keep + h;
    const double up = f(x);
    x.matrix().data()[i] = keep - h;
    const double down = f(x);
    x.matrix().data()[i] = keep;
    g.matrix().data()[i] = (up - down) / (2 * h);
  }
  return g;
}

void gradients(Outcome& o) {
  const double tol = 1e-4;
  double worst = 0.0;
  auto record = [&](double err, const std::string& what) {
    worst = std::max(worst, err);
    o.check(err <= tol, what);
  };
  const Shape s{1, 3, 3, 2};
  const T x = random_tensor(s, 3), y = random_tensor(s, 4), w = random_tensor(s, 5);

  record(rel_err(mse_grad(x, y), numeric_grad(x, [&](const T& v) { return mse(v, y); })), "mse");
  record(rel_err(mse_grad(x + y, w),
                 numeric_grad(x, [&](const T& v) { return loss_relight(w, Decomposition<double>{v, y}); })),
         "relight");
  const std::vector<T> albedos = {x, y, w};
  const auto g = loss_albedo_grad<double>(albedos);
  for (size_t k = 0; k < albedos.size(); ++k) {
    record(rel_err(g[k], numeric_grad(albedos[k],
                                      [&](const T& v) {
                                        std::vector<T> copy = albedos;
                                        copy[k] = v;
                                        return loss_albedo<double>(copy);
                                      })),
           "albedo");
  }
  record(rel_err(mse_grad(x + y, w), numeric_grad(x, [&](const T& v) { return loss_consistency(w, v, y); })),
         "consistency");
  record(rel_err(mse_grad(x, w), numeric_grad(x, [&](const T& v) { return loss_invariant(w, v); })), "invariant");
  // keep entries away from the hinge
  const T lighting(s, x.matrix().unaryExpr([](double v) { return v + (v >= 0 ? 0.2 : -0.2); }));
  record(rel_err(loss_reg_grad(lighting), numeric_grad(lighting, [](const T& v) { return loss_reg(v); })), "reg");

  // total loss through the stand-in denoiser, every variant of the objective
  const NoiseSchedule sched = make_schedule(1000);
  const Shape ls{2, 4, 4, 2};
  const PairBatch<double> batch{random_tensor(ls, 6), random_tensor(ls, 7)};
  for (double lambda : {0.5, 0.0}) {
    for (bool consistency : {true, false}) {
      TrainConfig cfg;
      cfg.lambda = lambda;
      cfg.use_consistency = consistency;
      cfg.blur_prob = 1.0;
      Rng rng(8);
      StepPlan<double> plan = draw_plan<double>(ls, cfg, 0.0, 1000, rng);
      plan.drop_cond[1] = true;
      test::LinearStandIn<double> model;
      for (auto* p : model.parameters()) p->grad.setZero();
      compute_losses(model, batch, plan, sched, cfg, true);
      T analytic(Shape{1, 1, 2, 1});
      analytic(0, 0, 0) = model.a.grad(0, 0);
      analytic(0, 1, 0) = model.b.grad(0, 0);
      T params = analytic;
      params(0, 0, 0) = model.a.value(0, 0);
      params(0, 1, 0) = model.b.value(0, 0);
      const T numeric = numeric_grad(params, [&](const T& p) {
        test::LinearStandIn<double> m;
        m.a.value(0, 0) = p(0, 0, 0);
        m.b.value(0, 0) = p(0, 1, 0);
        return static_cast<double>(compute_losses(m, batch, plan, sched, cfg, false).total);
      });
      record(rel_err(analytic, numeric), "total_loss lambda=" + std::to_string(lambda));
    }
  }
  o.detail << "max relative error " << std::scientific << std::setprecision(2) << worst << " (limit 1e-4)";
}

// ---- 3: sampler ------------------------------------------------------------

void sampler(Outcome& o) {
  const NoiseSchedule sched = make_schedule(1000);
  const T z = random_tensor({1, 4, 4, 2}, 9), x0 = random_tensor({1, 4, 4, 2}, 10);
  o.check(max_abs(ddim_step(z, x0, 20, 0, sched), x0) <= 1e-9, "endpoint");
  o.check(max_abs(ddim_step(z, z, 2, 1, NoiseSchedule::from_alpha_bar({0.5, 0.5})), z) <= 1e-9, "fixed point");
  const T one = T::constant({1, 1, 1, 1}, 1.0);
  const double expected = 0.9 + std::sqrt(0.19) * (0.5 / std::sqrt(0.75));
  o.check(std::abs(ddim_step(one, one, 2, 1, NoiseSchedule::from_alpha_bar({0.81, 0.25}))(0, 0, 0) - expected) <= 1e-9,
          "scalar step");

  const Decomposition<double> c{random_tensor({1, 3, 3, 2}, 11), random_tensor({1, 3, 3, 2}, 12)};
  const Decomposition<double> u{random_tensor({1, 3, 3, 2}, 13), random_tensor({1, 3, 3, 2}, 14)};
  const auto g = combine_guidance(c, u, 1.0);
  o.check(max_abs(g.albedo, c.albedo) <= 1e-12 && max_abs(g.lighting, c.lighting) <= 1e-12, "guidance scale 1");

  DenoiserConfig dc;
  dc.base_width = 8;
  dc.time_features = 8;
  dc.time_embed_dim = 16;
  Denoiser model(dc);
  model.steps_trained = 1;
  Rng rng(15);
  const Latent cond = normal_tensor<float>({2, 8, 8, 4}, rng);
  InferenceConfig cfg;
  cfg.ddim_steps = 10;
  cfg.n_samples = 3;
  const Latent first = sample_albedo_latents(model, cond, cfg, sched);
  const Latent second = sample_albedo_latents(model, cond, cfg, sched);
  o.check(first.matrix() == second.matrix(), "eta=0 bit reproducibility");
  o.detail << "endpoint, fixed point, scalar step, guidance identity, bitwise rerun";
}

// ---- 7: metric oracles -----------------------------------------------------

Image random_image(unsigned seed) { return random_tensor({1, 16, 16, 3}, seed, 0.0, 1.0).cast<float>(); }

void metric_oracles(Outcome& o) {
  double worst_ssim = 0.0, worst_whdr = 0.0;
  for (unsigned k = 0; k < 3; ++k) {
    const Image a = random_image(20 + k), b = random_image(30 + k);
    worst_ssim = std::max(worst_ssim, std::abs(ssim(a, b) - test::ssim_reference(a, b)));
    // a noisy copy exercises the high-similarity regime
    Image near = a;
    near.matrix() += 0.05f * random_image(40 + k).matrix();
    worst_ssim = std::max(worst_ssim, std::abs(ssim(a, near) - test::ssim_reference(a, near)));

    const JudgmentSet js = synth_judgments(a, 300, kWhdrDelta, k);
    worst_whdr = std::max(worst_whdr, std::abs(whdr(b, js) - test::whdr_reference(b, js)));
    worst_whdr = std::max(worst_whdr, std::abs(whdr(near, js) - test::whdr_reference(near, js)));
    o.check(whdr(a, js) == 0.0, "whdr(gt, synth(gt)) == 0");
    const Image doubled(b.shape(), 2.0f * b.matrix());
    o.check(whdr(doubled, js) == whdr(b, js), "scale invariance");
  }
  o.check(worst_ssim <= 1e-6, "ssim oracle");
  o.check(worst_whdr <= 1e-6, "whdr oracle");
  o.detail << std::scientific << std::setprecision(1) << "ssim diff " << worst_ssim << ", whdr diff " << worst_whdr;
}

// ---- 8: reproducibility through the CLI ------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(LATSPLIT_CLI_PATH) + " -q " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Every file under `a` has a byte-identical twin under `b` and vice versa.
bool same_tree(const fs::path& a, const fs::path& b, std::string& diff, int& files) {
  std::map<std::string, std::string> left, right;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) left[fs::relative(e.path(), a).string()] = slurp(e.path());
  }
  for (const auto& e : fs::recursive_directory_iterator(b)) {
    if (e.is_regular_file()) right[fs::relative(e.path(), b).string()] = slurp(e.path());
  }
  files = static_cast<int>(left.size());
  if (left.size() != right.size()) {
    diff = "file sets differ";
    return false;
  }
  for (const auto& [name, bytes] : left) {
    const auto it = right.find(name);
    if (it == right.end() || it->second != bytes) {
      diff = name;
      return false;
    }
  }
  return true;
}

void reproducibility(Outcome& o, const fs::path& work) {
  const fs::path dir = work / "repro";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path log = dir / "cli.log";
  auto p = [&](const std::string& name) { return (dir / name).string(); };
  const std::string tiny_den =
      " --denoiser.base_width 8 --denoiser.time_features 8 --denoiser.time_embed_dim 16 --train.batch_size 4";
  const std::string quick_inf = " --inference.ddim_steps 4 --inference.n_samples 2 --eval.judgments_per_scene 50";
  const std::string models = " --ae " + p("vae/autoencoder.ckpt") + " --denoiser " + p("train/denoiser.ckpt");
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"data", "gen-data --scenes 4 --lights 3 --size 32 --seed 3"},
      {"vae", "train-vae --data " + p("data") + " --autoencoder.base_width 8 --autoencoder.epochs 2"},
      {"train", "train --data " + p("data") + " --ae " + p("vae/autoencoder.ckpt") + tiny_den + " --train.steps 20"},
      {"eval", "eval --data " + p("data") + models + quick_inf},
      {"infer", "infer --input " + p("data") + models + quick_inf},
      {"analyze", "analyze --data " + p("data") + models + quick_inf},
      {"ablate", "ablate --data " + p("data") + " --test " + p("data") + " --ae " + p("vae/autoencoder.ckpt") +
                     tiny_den + " --train.steps 5" + quick_inf},
  };
  int compared = 0;
  for (const auto& [name, args] : runs) {
    const std::string command = args.substr(0, args.find(' '));
    if (run_cli(args + " --out " + p(name), log) != 0) {
      o.check(false, name + " run: " + slurp(log));
      return;
    }
    if (run_cli(command + " --config " + p(name + "/config.json") + " --out " + p(name + "_again"), log) != 0) {
      o.check(false, name + " rerun from snapshot: " + slurp(log));
      return;
    }
    std::string diff;
    int files = 0;
    o.check(same_tree(dir / name, dir / (name + "_again"), diff, files), name + " differs at " + diff);
    compared += files;
  }
  o.detail << runs.size() << " commands rerun from their snapshots, " << compared << " files byte-identical";
}

// ---- 4-6: learning on the toy dataset --------------------------------------

struct LearningSettings {
  int train_scenes = 200;
  int test_scenes = 20;
  int lights = 5;
  int size = 64;
  AutoencoderConfig ae;
  DenoiserConfig denoiser;
  TrainConfig train;
  InferenceConfig inference;

  LearningSettings() {
    ae.epochs = 8;
    denoiser.base_width = 32;
    train.steps = 2000;
    train.learning_rate = 1e-3;
    train.batch_size = 16;
    inference.ddim_steps = 10;
    inference.n_samples = 2;
    if (const char* s = std::getenv("LATSPLIT_ACCEPT_STEPS")) train.steps = std::atoi(s);
  }
};

struct VariantResult {
  std::string name;
  EvalReport report;
  DistributionReport lighting;
};

struct LearningResults {
  double ae_heldout_psnr = 0.0;
  EvalReport init;
  std::vector<VariantResult> variants;

  const VariantResult& get(const std::string& name) const {
    for (const auto& v : variants) {
      if (v.name == name) return v;
    }
    throw std::runtime_error("missing variant " + name);
  }
};

LearningResults learn(const fs::path& work) {
  const LearningSettings cfg;
  const fs::path dir = work / "learning";
  fs::create_directories(dir);
  LearningResults out;

  const auto train = generate_scenes(1, cfg.train_scenes, cfg.lights, cfg.size, cfg.size);
  const auto test = generate_scenes(2, cfg.test_scenes, cfg.lights, cfg.size, cfg.size);
  progress("training autoencoder (" + std::to_string(cfg.ae.epochs) + " epochs)");
  const Autoencoder ae = train_autoencoder(train, cfg.ae, [](int e, double l) {
    progress("  epoch " + std::to_string(e) + " loss " + std::to_string(l));
  });
  save_autoencoder(ae, dir / "autoencoder.ckpt");
  int n = 0;
  for (const auto& s : test) {
    for (const auto& img : s.images) {
      out.ae_heldout_psnr += psnr(ae.decode(ae.encode(img)), img);
      ++n;
    }
  }
  out.ae_heldout_psnr /= n;

  const NoiseSchedule sched = make_schedule(cfg.denoiser.timesteps);
  const SceneLatents latents = encode_scenes(train, ae);
  const double scale = compute_latent_scale(latents.latents);
  const SceneLatents scaled = scale_latents(latents, 1.0 / scale);

  EvalOptions eval_opts;
  eval_opts.predict.allow_untrained = true;
  {
    Denoiser init(cfg.denoiser);
    init.latent_scale = scale;
    out.init = evaluate(test, ae, init, cfg.inference, sched, eval_opts);
  }

  Json summary = Json::object();
  summary["settings"] = {{"train", to_json(cfg.train)},
                         {"denoiser", to_json(cfg.denoiser)},
                         {"autoencoder", to_json(cfg.ae)},
                         {"inference", to_json(cfg.inference)}};
  for (const AblationVariant& v : ablation_variants(cfg.train)) {
    progress("training variant " + v.name + " (" + std::to_string(v.config.steps) + " steps)");
    Denoiser model(cfg.denoiser);
    model.latent_scale = scale;
    train_denoiser(
        model, scaled, v.config,
        [&](int step, const LossReport<float>& r) {
          if (step % 500 == 0) progress("  step " + std::to_string(step) + " total " + std::to_string(r.total));
        },
        &ae);
    save_denoiser(model, v.config, dir / (v.name + ".ckpt"));
    VariantResult res{v.name, evaluate(test, ae, model, cfg.inference, sched, eval_opts), {}};
    res.lighting = analyze_latents(res.report.lighting_latents);
    write_distribution_report(res.lighting, dir / (v.name + "_lighting.json"));
    write_png(dir / (v.name + "_lighting_histogram.png"), plot_histogram(res.lighting));
    summary[v.name] = {{"albedo_psnr", res.report.accuracy.mean_psnr},
                       {"albedo_ssim", res.report.accuracy.mean_ssim},
                       {"baseline_psnr", res.report.baseline.mean_psnr},
                       {"pairwise_prediction_psnr", res.report.pairwise_pred_psnr},
                       {"pairwise_input_psnr", res.report.pairwise_input_psnr},
                       {"pairwise_albedo_latent_l2", res.report.pairwise_latent_l2},
                       {"whdr", res.report.mean_whdr},
                       {"lighting_positive_fraction", res.lighting.positive_fraction}};
    progress("  " + v.name + " albedo PSNR " + std::to_string(res.report.accuracy.mean_psnr));
    out.variants.push_back(std::move(res));
  }
  summary["init_pairwise_albedo_latent_l2"] = out.init.pairwise_latent_l2;
  summary["autoencoder_heldout_psnr"] = out.ae_heldout_psnr;
  write_json_file(dir / "summary.json", summary);
  return out;
}

void learning_signal(Outcome& o, const LearningResults& r) {
  const auto& full = r.get("full");
  const auto& no_blur = r.get("no_blur");
  const auto& no_cons = r.get("no_consistency");
  const auto& no_reg = r.get("no_reg");
  const double p_full = full.report.accuracy.mean_psnr, p_blur = no_blur.report.accuracy.mean_psnr;
  const double p_cons = no_cons.report.accuracy.mean_psnr, p_reg = no_reg.report.accuracy.mean_psnr;
  const double base = full.report.baseline.mean_psnr;
  o.check(p_full - base >= 1.5, "full exceeds input baseline by 1.5 dB");
  o.check(p_full >= p_blur, "full >= no_blur");
  o.check(p_blur >= p_cons, "no_blur >= no_consistency");
  o.check(p_cons >= p_reg, "no_consistency >= no_reg");
  o.check(p_full - p_reg >= 1.0, "full - no_reg >= 1 dB");
  o.detail << std::fixed << std::setprecision(2) << "PSNR full " << p_full << ", no_blur " << p_blur
           << ", no_consistency " << p_cons << ", no_reg " << p_reg << ", input baseline " << base;
}

void consistency(Outcome& o, const LearningResults& r) {
  const EvalReport& full = r.get("full").report;
  const double gain = full.pairwise_pred_psnr - full.pairwise_input_psnr;
  const double drop = 1.0 - full.pairwise_latent_l2 / r.init.pairwise_latent_l2;
  o.check(gain >= 3.0, "pairwise prediction PSNR exceeds inputs by 3 dB");
  o.check(drop >= 0.5, "pairwise latent L2 halves");
  o.detail << std::fixed << std::setprecision(2) << "pairwise PSNR " << full.pairwise_pred_psnr << " vs inputs "
           << full.pairwise_input_psnr << "; latent L2 " << r.init.pairwise_latent_l2 << " -> "
           << full.pairwise_latent_l2 << " (" << std::setprecision(1) << 100 * drop << "% lower)";
}

void regularizer(Outcome& o, const LearningResults& r) {
  const double with = r.get("full").lighting.positive_fraction;
  const double without = r.get("no_reg").lighting.positive_fraction;
  o.check(with < without, "positive fraction lower with the hinge");
  o.detail << std::fixed << std::setprecision(3) << "positive fraction of lighting latents " << with << " vs "
           << without << " without regularisers";
}

}  // namespace

int main() {
  const fs::path work = std::getenv("LATSPLIT_ACCEPT_DIR") ? fs::path(std::getenv("LATSPLIT_ACCEPT_DIR"))
                                                       : fs::current_path() / "acceptance_run";
  fs::create_directories(work);

  std::map<int, std::pair<std::string, Outcome>> results;
  auto run = [&](int id, const std::string& name, const std::function<void(Outcome&)>& body) {
    Outcome& o = results[id].second;
    results[id].first = name;
    progress("criterion " + std::to_string(id) + ": " + name);
    try {
      body(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
  };

  run(1, "loss identities", loss_identities);
  run(2, "gradients", gradients);
  run(3, "sampler", sampler);
  run(7, "metric oracles", metric_oracles);
  run(8, "reproducibility", [&](Outcome& o) { reproducibility(o, work); });

  LearningResults learned;
  bool learned_ok = false;
  std::string learn_error;
  try {
    learned = learn(work);
    learned_ok = true;
  } catch (const std::exception& e) {
    learn_error = e.what();
  }
  auto learning = [&](void (*fn)(Outcome&, const LearningResults&)) {
    return [&, fn](Outcome& o) {
      if (!learned_ok) throw std::runtime_error("training failed: " + learn_error);
      fn(o, learned);
    };
  };
  run(4, "learning signal and ablation order", learning(learning_signal));
  run(5, "cross-light consistency", learning(consistency));
  run(6, "regulariser effect", learning(regularizer));

  if (learned_ok) {
    std::cout << "info: autoencoder held-out reconstruction PSNR " << std::fixed << std::setprecision(2)
              << learned.ae_heldout_psnr << " dB; full-model WHDR " << std::setprecision(3)
              << learned.get("full").report.mean_whdr << "\n";
  }
  bool all = true;
  std::ofstream report(work / "acceptance.txt");
  for (const auto& [id, entry] : results) {
    const auto& [name, o] = entry;
    std::ostringstream line;
    line << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << name << "): " << o.detail.str();
    std::cout << line.str() << "\n";
    report << line.str() << "\n";
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
