#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "doctest.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kWork = fs::temp_directory_path() / "latsplit_cli_test";

// Runs the CLI with `args`, returns its exit status; output goes to last.log.
int latsplit(const std::string& args, const std::string& env = "") {
  const std::string cmd =
      env + " " + std::string(LATSPLIT_CLI_PATH) + " -q " + args + " > " + (kWork / "last.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::string path(const std::string& name) { return (kWork / name).string(); }

const std::string kTinyAe = " --autoencoder.base_width 4 --autoencoder.epochs 1";
const std::string kTinyDen =
    " --denoiser.base_width 4 --denoiser.time_features 8 --denoiser.time_embed_dim 8 --train.batch_size 2";

// Data, autoencoder and denoiser shared by the later cases; built once.
void ensure_models() {
  static bool done = false;
  if (done) return;
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  REQUIRE(latsplit("gen-data --scenes 3 --lights 2 --size 16 --seed 4 --out " + path("data")) == 0);
  REQUIRE(latsplit("train-vae --data " + path("data") + kTinyAe + " --out " + path("vae")) == 0);
  REQUIRE(latsplit("train --data " + path("data") + " --ae " + path("vae/autoencoder.ckpt") + kTinyDen +
               " --train.steps 3 --out " + path("train")) == 0);
  done = true;
}

}  // namespace

TEST_CASE("gen-data writes a deterministic dataset") {
  ensure_models();
  const fs::path data = kWork / "data";
  const json manifest = read_json(data / "manifest.json");
  CHECK(manifest.at("scene_count") == 3);
  CHECK(manifest.at("lights") == 2);
  CHECK(manifest.at("height") == 16);
  for (int s = 0; s < 3; ++s) {
    const fs::path scene = data / ("scene_" + std::to_string(s));
    CHECK(fs::exists(scene / "albedo.png"));
    CHECK(fs::exists(scene / "light_0.png"));
    CHECK(fs::exists(scene / "light_1.png"));
    CHECK(fs::exists(scene / "meta.json"));
  }
  CHECK(read_json(data / "config.json").at("data").at("seed") == 4);

  REQUIRE(latsplit("gen-data --scenes 3 --lights 2 --size 16 --seed 4 --out " + path("data2")) == 0);
  CHECK(slurp(data / "scene_2" / "light_1.png") == slurp(kWork / "data2" / "scene_2" / "light_1.png"));
  REQUIRE(latsplit("gen-data --scenes 3 --lights 2 --size 16 --seed 5 --force --out " + path("data2")) == 0);
  CHECK(slurp(data / "scene_2" / "light_1.png") != slurp(kWork / "data2" / "scene_2" / "light_1.png"));
}

TEST_CASE("usage and data errors map to exit codes") {
  ensure_models();
  CHECK(latsplit("") == 2);
  CHECK(latsplit("no-such-command") == 2);
  CHECK(latsplit("gen-data --lights 1 --out " + path("bad")) == 2);
  CHECK(latsplit("gen-data --bogus 3 --out " + path("bad")) == 2);
  CHECK(latsplit("gen-data --scenes 1 --size 16 --out " + path("data")) == 2);  // non-empty without --force
  CHECK(latsplit("train --data " + path("data") + " --ae " + path("missing.ckpt") + " --out " + path("t2")) == 3);
  CHECK(latsplit("train --data " + path("nowhere") + " --ae " + path("vae/autoencoder.ckpt") + " --out " + path("t3")) ==
        3);
  std::ofstream(kWork / "bad.json") << R"({"train": {"lamda": 1}})";
  CHECK(latsplit("train --config " + path("bad.json") + " --out " + path("t4")) == 3);
  CHECK(slurp(kWork / "last.log").find("train.lamda") != std::string::npos);
  CHECK(latsplit("--help") == 0);
}

TEST_CASE("train run directory and defaults") {
  ensure_models();
  const fs::path run = kWork / "train";
  for (const char* f : {"config.json", "train_log.csv", "denoiser.ckpt", "loss_curves.png", "report.json"}) {
    CHECK(fs::exists(run / f));
  }
  const json cfg = read_json(run / "config.json");
  CHECK(cfg.at("train").at("lambda") == 0.5);
  CHECK(cfg.at("train").at("blur_prob") == 0.5);
  CHECK(cfg.at("train").at("use_consistency") == true);
  std::ifstream log(run / "train_log.csv");
  std::string header;
  std::getline(log, header);
  CHECK(header == "step,L_relight,L_albedo,L_consistency,L_invariant,L_reg,total");
  CHECK(read_json(run / "report.json").at("steps") == 3);
  for (const char* f : {"autoencoder.ckpt", "ae_loss.csv", "ae_loss.png", "reconstructions.png", "config.json"}) {
    CHECK(fs::exists(kWork / "vae" / f));
  }
}

TEST_CASE("config file and flag precedence") {
  ensure_models();
  std::ofstream(kWork / "cfg.json") << R"({"train": {"lambda": 0.1, "steps": 2}})";
  REQUIRE(latsplit("train --config " + path("cfg.json") + " --data " + path("data") + " --ae " +
               path("vae/autoencoder.ckpt") + kTinyDen + " --train.steps 1 --out " + path("prec")) == 0);
  const json cfg = read_json(kWork / "prec" / "config.json");
  CHECK(cfg.at("train").at("lambda") == 0.1);
  CHECK(cfg.at("train").at("steps") == 1);
}

TEST_CASE("infer, eval, analyze and ablate") {
  ensure_models();
  const std::string models = " --ae " + path("vae/autoencoder.ckpt") + " --denoiser " + path("train/denoiser.ckpt");
  REQUIRE(latsplit("infer" + models + " --input " + path("data/scene_0/light_0.png") + " --out " + path("infer")) == 0);
  const json icfg = read_json(kWork / "infer" / "config.json");
  CHECK(icfg.at("inference").at("guidance_scale") == 1.5);
  CHECK(icfg.at("inference").at("ddim_steps") == 50);
  CHECK(icfg.at("inference").at("n_samples") == 10);
  CHECK(fs::exists(kWork / "infer" / "albedo.png"));
  CHECK(fs::exists(kWork / "infer" / "report.json"));

  const std::string quick = " --inference.ddim_steps 2 --inference.n_samples 1 --eval.judgments_per_scene 20";
  REQUIRE(latsplit("eval" + models + " --data " + path("data") + quick + " --out " + path("eval")) == 0);
  const json report = read_json(kWork / "eval" / "report.json");
  CHECK(report.contains("albedo_psnr"));
  CHECK(report.contains("whdr"));
  CHECK(fs::exists(kWork / "eval" / "metrics.csv"));

  REQUIRE(latsplit("analyze --ae " + path("vae/autoencoder.ckpt") + " --data " + path("data") + " --out " +
               path("analyze")) == 0);
  CHECK(read_json(kWork / "analyze" / "report.json").dump().find("positive_fraction") != std::string::npos);
  CHECK(fs::exists(kWork / "analyze" / "histogram.png"));

  REQUIRE(latsplit("ablate --data " + path("data") + " --test " + path("data") + " --ae " + path("vae/autoencoder.ckpt") +
               kTinyDen + " --train.steps 1" + quick + " --out " + path("ablate")) == 0);
  const json ab = read_json(kWork / "ablate" / "ablation.json");
  REQUIRE(ab.at("rows").size() == 4);
  CHECK(ab.at("rows")[1].at("variant") == "no_reg");
  CHECK(fs::exists(kWork / "ablate" / "no_blur" / "train_log.csv"));
}

TEST_CASE("default run root comes from the environment") {
  ensure_models();
  const fs::path root = kWork / "root";
  REQUIRE(latsplit("gen-data --scenes 1 --size 16", "LATSPLIT_RUN_ROOT=" + root.string()) == 0);
  int runs = 0;
  for (const auto& e : fs::directory_iterator(root)) runs += e.path().filename().string().rfind("gen-data-", 0) == 0;
  CHECK(runs == 1);
}
