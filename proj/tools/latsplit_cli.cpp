// latsplit: command-line driver for data generation, training, inference,
// evaluation, latent analysis and ablations.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "latsplit/analysis.hpp"
#include "latsplit/checkpoint.hpp"
#include "latsplit/config_io.hpp"
#include "latsplit/dataset.hpp"
#include "latsplit/image_io.hpp"
#include "latsplit/log.hpp"
#include "latsplit/pipeline.hpp"
#include "latsplit/plot.hpp"

namespace fs = std::filesystem;
using namespace latsplit;

namespace {

constexpr const char* kSchema = "latsplit-config/1";
constexpr const char* kRunRootEnv = "LATSPLIT_RUN_ROOT";

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kData = 3, kNumeric = 4 };

// Data generation and evaluation knobs that live outside the library configs.
struct DataConfig {
  int scenes = 200;
  int lights = 5;
  int size = 64;
  std::uint64_t seed = 0;
};

struct EvalConfig {
  int judgments_per_scene = 200;
  std::uint64_t judgment_seed = 11;
  int max_batch = 64;
  int grid_scenes = 4;
};

template <typename R>
void visit_fields(R& r, DataConfig& c) {
  r("scenes", c.scenes);
  r("lights", c.lights);
  r("size", c.size);
  r("seed", c.seed);
}

template <typename R>
void visit_fields(R& r, EvalConfig& c) {
  r("judgments_per_scene", c.judgments_per_scene);
  r("judgment_seed", c.judgment_seed);
  r("max_batch", c.max_batch);
  r("grid_scenes", c.grid_scenes);
}

const char* const kInputs[] = {"data", "test", "ae", "denoiser", "input"};

// Resolved settings of one invocation. Precedence: defaults < --config file < flags.
struct Settings {
  DataConfig data;
  AutoencoderConfig autoencoder;
  DenoiserConfig denoiser;
  TrainConfig train;
  InferenceConfig inference;
  EvalConfig eval;
  std::map<std::string, std::string> inputs;

  std::string input(const std::string& name) const {
    const auto it = inputs.find(name);
    if (it == inputs.end() || it->second.empty()) throw ParameterError("missing required input --" + name);
    return it->second;
  }
  bool has(const std::string& name) const {
    const auto it = inputs.find(name);
    return it != inputs.end() && !it->second.empty();
  }
};

struct JsonWriter {
  Json j = Json::object();
  template <typename T>
  void operator()(const char* name, T& field) {
    j[name] = field;
  }
};

struct JsonReader {
  const Json& j;
  std::string section;
  std::set<std::string> known;
  template <typename T>
  void operator()(const char* name, T& field) {
    known.insert(name);
    const auto it = j.find(name);
    if (it == j.end()) return;
    const std::string path = section + "." + name;
    if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw FormatError("config field '" + path + "' must be an integer");
      if (std::is_unsigned_v<T> && !it->is_number_unsigned()) {
        throw FormatError("config field '" + path + "' must be non-negative");
      }
    } else if (!it->is_number()) {
      throw FormatError("config field '" + path + "' must be a number");
    }
    field = it->template get<T>();
  }
};

template <typename Config>
Json section_json(Config c) {
  JsonWriter w;
  visit_fields(w, c);
  return w.j;
}

template <typename Config>
void read_section(const Json& j, const std::string& name, Config& c) {
  if (!j.is_object()) throw FormatError("config section '" + name + "' must be a JSON object");
  JsonReader r{j, name, {}};
  visit_fields(r, c);
  for (const auto& item : j.items()) {
    if (!r.known.count(item.key())) throw FormatError("unknown config field '" + name + "." + item.key() + "'");
  }
}

Json settings_json(const std::string& command, const Settings& s) {
  Json inputs = Json::object();
  for (const auto& [k, v] : s.inputs) inputs[k] = v;
  return Json{{"schema", kSchema},
              {"command", command},
              {"inputs", inputs},
              {"data", section_json(s.data)},
              {"autoencoder", to_json(s.autoencoder)},
              {"denoiser", to_json(s.denoiser)},
              {"train", to_json(s.train)},
              {"inference", to_json(s.inference)},
              {"eval", section_json(s.eval)}};
}

void apply_json(const Json& j, Settings& s) {
  if (!j.is_object()) throw FormatError("config must be a JSON object");
  for (const auto& item : j.items()) {
    const std::string& key = item.key();
    const Json& v = item.value();
    if (key == "schema") {
      if (v != kSchema) throw FormatError("config schema '" + v.dump() + "' is not " + kSchema);
    } else if (key == "command") {
      continue;
    } else if (key == "inputs") {
      if (!v.is_object()) throw FormatError("config section 'inputs' must be a JSON object");
      for (const auto& in : v.items()) {
        if (std::find(std::begin(kInputs), std::end(kInputs), in.key()) == std::end(kInputs)) {
          throw FormatError("unknown config field 'inputs." + in.key() + "'");
        }
        if (!in.value().is_string()) throw FormatError("config field 'inputs." + in.key() + "' must be a string");
        s.inputs[in.key()] = in.value().get<std::string>();
      }
    } else if (key == "data") {
      read_section(v, key, s.data);
    } else if (key == "eval") {
      read_section(v, key, s.eval);
    } else if (key == "autoencoder") {
      from_json(v, key, s.autoencoder);
    } else if (key == "denoiser") {
      from_json(v, key, s.denoiser);
    } else if (key == "train") {
      from_json(v, key, s.train);
    } else if (key == "inference") {
      from_json(v, key, s.inference);
    } else {
      throw FormatError("unknown config section '" + key + "'");
    }
  }
}

// Flag overrides: one string-valued option per config field, converted and
// written into a JSON patch after parsing so that flags and files share one
// validation path.
class Overrides {
 public:
  template <typename Config>
  void add_section(CLI::App* app, const std::string& section, const std::string& group) {
    Config defaults;
    Registrar<Config> r{this, app, section, group};
    visit_fields(r, defaults);
  }

  void add_alias(CLI::App* app, const std::string& flag, const std::string& section, const std::string& field,
                 const std::string& help) {
    auto& slot = storage_.emplace_back();
    app->add_option(flag, slot, help + " (same as --" + section + "." + field + ")");
    aliases_.push_back({flag, &slot, section, field});
  }

  void add_input(CLI::App* app, const std::string& name, const std::string& help) {
    auto& slot = storage_.emplace_back();
    app->add_option("--" + name, slot, help)->group("Inputs");
    inputs_.push_back({name, &slot});
  }

  void apply(Settings& s) const {
    Json patch = Json::object();
    for (const auto& alias : aliases_) {
      if (alias.slot->empty()) continue;
      const auto it = std::find_if(fields_.begin(), fields_.end(), [&](const Field& f) {
        return f.section == alias.section && f.name == alias.field;
      });
      patch[alias.section][alias.field] = it->convert(*alias.slot, alias.flag);
    }
    for (const Field& f : fields_) {
      if (f.slot->empty()) continue;
      patch[f.section][f.name] = f.convert(*f.slot, "--" + f.section + "." + f.name);
    }
    for (const auto& [name, slot] : inputs_) {
      if (!slot->empty()) s.inputs[name] = fs::absolute(*slot).lexically_normal().string();
    }
    apply_json(patch, s);
  }

 private:
  struct Field {
    std::string section;
    std::string name;
    std::string* slot;
    std::function<Json(const std::string&, const std::string&)> convert;
  };
  struct Alias {
    std::string flag;
    std::string* slot;
    std::string section;
    std::string field;
  };

  template <typename Config>
  struct Registrar {
    Overrides* self;
    CLI::App* app;
    std::string section;
    std::string group;
    template <typename T>
    void operator()(const char* name, T& field) {
      auto& slot = self->storage_.emplace_back();
      std::ostringstream def;
      def << std::boolalpha << field;
      app->add_option("--" + section + "." + name, slot, "default " + def.str())->group(group);
      self->fields_.push_back({section, name, &slot, [](const std::string& text, const std::string& flag) -> Json {
                                 return convert<T>(text, flag);
                               }});
    }
  };

  template <typename T>
  static Json convert(const std::string& text, const std::string& flag) {
    try {
      size_t used = 0;
      if constexpr (std::is_same_v<T, bool>) {
        if (text == "true" || text == "1") return true;
        if (text == "false" || text == "0") return false;
        throw std::invalid_argument("bool");
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!text.empty() && text[0] == '-') throw std::invalid_argument("negative");
        const unsigned long long v = std::stoull(text, &used);
        if (used != text.size()) throw std::invalid_argument("trailing");
        return static_cast<T>(v);
      } else if constexpr (std::is_integral_v<T>) {
        const long long v = std::stoll(text, &used);
        if (used != text.size()) throw std::invalid_argument("trailing");
        return static_cast<T>(v);
      } else {
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument("trailing");
        return v;
      }
    } catch (const std::logic_error&) {
      throw ParameterError("flag " + flag + ": cannot parse '" + text + "'");
    }
  }

  std::deque<std::string> storage_;
  std::vector<Field> fields_;
  std::vector<Alias> aliases_;
  std::vector<std::pair<std::string, std::string*>> inputs_;
};

struct Command {
  std::string name;
  CLI::App* app = nullptr;
  Overrides overrides;
  std::string config_path;
  std::string out;
  bool force = false;
};

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y%m%d-%H%M%S");
  return os.str();
}

fs::path run_root() {
  const char* env = std::getenv(kRunRootEnv);
  return env && *env ? fs::path(env) : fs::path("runs");
}

// Creates the run directory; a non-empty one is cleared only with --force.
fs::path prepare_dir(const Command& cmd) {
  const fs::path dir = cmd.out.empty() ? run_root() / (cmd.name + "-" + timestamp()) : fs::path(cmd.out);
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw ParameterError(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir)) {
      if (!cmd.force) throw ParameterError(dir.string() + " is not empty; pass --force to overwrite");
      for (const auto& entry : fs::directory_iterator(dir)) fs::remove_all(entry.path());
    }
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

Settings resolve(const Command& cmd) {
  Settings s;
  if (!cmd.config_path.empty()) apply_json(read_json_file(cmd.config_path), s);
  cmd.overrides.apply(s);
  s.autoencoder.validate();
  s.denoiser.validate();
  s.train.validate();
  s.inference.validate(s.denoiser.timesteps);
  if (s.eval.judgments_per_scene < 1) throw ParameterError("eval.judgments_per_scene must be >= 1");
  if (s.eval.max_batch < 1) throw ParameterError("eval.max_batch must be >= 1");
  return s;
}

void write_snapshot(const fs::path& dir, const Command& cmd, const Settings& s) {
  write_json_file(dir / "config.json", settings_json(cmd.name, s));
}

void save_png(const fs::path& path, const Image& img) { write_png(path, img); }

std::vector<double> moving_average(const std::vector<double>& v, size_t window) {
  std::vector<double> out(v.size());
  double acc = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    acc += v[i];
    if (i >= window) acc -= v[i - window];
    out[i] = acc / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

std::vector<SceneSample> load_data(const Settings& s, const std::string& which) {
  const std::string path = s.input(which);
  if (!fs::exists(path)) throw IoError("dataset not found: " + path);
  auto scenes = read_dataset(path);
  if (scenes.empty()) throw ParameterError("dataset " + path + " holds no scenes");
  return scenes;
}

Autoencoder load_ae(const Settings& s) {
  const std::string path = s.input("ae");
  if (!fs::exists(path)) throw IoError("autoencoder checkpoint not found: " + path);
  return load_autoencoder(path);
}

Denoiser load_model(const Settings& s) {
  const std::string path = s.input("denoiser");
  if (!fs::exists(path)) throw IoError("denoiser checkpoint not found: " + path);
  return load_denoiser(path).model;
}

// Trains one denoiser into `dir`: checkpoint, per-step CSV log, loss plot.
Denoiser train_into(const fs::path& dir, const std::vector<SceneSample>& scenes, const Autoencoder& ae,
                    const DenoiserConfig& dcfg, const TrainConfig& tcfg) {
  std::ofstream log(dir / "train_log.csv");
  if (!log) throw IoError("cannot write " + (dir / "train_log.csv").string());
  log << "step,L_relight,L_albedo,L_consistency,L_invariant,L_reg,total\n" << std::setprecision(9);
  std::vector<std::vector<double>> curves(6);
  const auto start = std::chrono::steady_clock::now();
  const int every = std::max(1, tcfg.steps / 20);
  const Denoiser model = train_diffusion(scenes, ae, dcfg, tcfg, [&](int step, const LossReport<float>& r) {
    const double v[6] = {r.parts.relight, r.parts.albedo, r.parts.consistency, r.parts.invariant, r.parts.reg, r.total};
    log << step;
    for (int i = 0; i < 6; ++i) {
      log << ',' << v[i];
      curves[i].push_back(v[i]);
    }
    log << '\n';
    if (step % every == 0 || step == tcfg.steps) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::ostringstream msg;
      msg << "step " << step << "/" << tcfg.steps << " total " << r.total << " (" << std::fixed
          << std::setprecision(0) << secs << " s)";
      log_info(msg.str());
    }
  });
  log.close();
  save_denoiser(model, tcfg, dir / "denoiser.ckpt");
  const size_t window = std::max<size_t>(1, curves[0].size() / 100);
  for (auto& c : curves) c = moving_average(c, window);
  PlotOptions opts;
  opts.log_y = true;
  save_png(dir / "loss_curves.png", plot_lines(curves, opts));
  return model;
}

Json train_summary(const fs::path& log_path) {
  // Mean of each term over the last tenth of the log.
  std::ifstream in(log_path);
  std::string line;
  std::getline(in, line);
  std::vector<std::array<double, 6>> rows;
  while (std::getline(in, line)) {
    std::array<double, 6> v{};
    std::istringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    for (double& x : v) {
      std::getline(ss, cell, ',');
      x = std::stod(cell);
    }
    rows.push_back(v);
  }
  const size_t tail = std::max<size_t>(1, rows.size() / 10);
  std::array<double, 6> mean{};
  for (size_t i = rows.size() - std::min(tail, rows.size()); i < rows.size(); ++i) {
    for (int k = 0; k < 6; ++k) mean[k] += rows[i][k] / static_cast<double>(tail);
  }
  return Json{{"steps", rows.size()},
              {"final_window", tail},
              {"L_relight", mean[0]},
              {"L_albedo", mean[1]},
              {"L_consistency", mean[2]},
              {"L_invariant", mean[3]},
              {"L_reg", mean[4]},
              {"total", mean[5]}};
}

EvalOptions eval_options(const Settings& s) {
  EvalOptions o;
  o.judgments_per_scene = s.eval.judgments_per_scene;
  o.judgment_seed = s.eval.judgment_seed;
  o.predict.max_batch = s.eval.max_batch;
  return o;
}

Json eval_json(const EvalReport& r, const DistributionReport& lighting) {
  return Json{{"albedo_psnr", r.accuracy.mean_psnr},
              {"albedo_ssim", r.accuracy.mean_ssim},
              {"baseline_psnr", r.baseline.mean_psnr},
              {"baseline_ssim", r.baseline.mean_ssim},
              {"pairwise_prediction_psnr", r.pairwise_pred_psnr},
              {"pairwise_input_psnr", r.pairwise_input_psnr},
              {"pairwise_albedo_latent_l2", r.pairwise_latent_l2},
              {"whdr", r.mean_whdr},
              {"lighting_positive_fraction", lighting.positive_fraction},
              {"scenes", r.accuracy.scene_psnr.size()}};
}

void write_grid(const fs::path& path, const std::vector<SceneSample>& scenes, const EvalReport& r, int max_scenes) {
  std::vector<std::vector<Image>> rows;
  for (int s = 0; s < std::min<int>(max_scenes, static_cast<int>(scenes.size())); ++s) {
    std::vector<Image> inputs = scenes[s].images;
    inputs.push_back(scenes[s].albedo);
    std::vector<Image> preds = r.predictions[s];
    preds.push_back(scenes[s].albedo);
    rows.push_back(std::move(inputs));
    rows.push_back(std::move(preds));
  }
  if (!rows.empty()) save_png(path, image_grid(rows));
}

// ---- commands --------------------------------------------------------------

int cmd_gen_data(const Command& cmd) {
  const Settings s = resolve(cmd);
  if (s.data.lights < 2) throw ParameterError("--lights must be >= 2, got " + std::to_string(s.data.lights));
  if (s.data.scenes < 0) throw ParameterError("--scenes must be >= 0");
  validate_dimensions(s.data.size, s.data.size);
  const fs::path dir = prepare_dir(cmd);
  const auto scenes = generate_scenes(s.data.seed, s.data.scenes, s.data.lights, s.data.size, s.data.size);
  write_dataset(scenes, dir);
  write_snapshot(dir, cmd, s);
  std::cout << "dataset " << dir.string() << ": " << s.data.scenes << " scenes x " << s.data.lights << " lights, "
            << s.data.size << "x" << s.data.size << ", seed " << s.data.seed << ", " << kGeneratorVersion << "\n";
  return kOk;
}

int cmd_train_vae(const Command& cmd) {
  const Settings s = resolve(cmd);
  const auto scenes = load_data(s, "data");
  const fs::path dir = prepare_dir(cmd);
  write_snapshot(dir, cmd, s);
  std::ofstream csv(dir / "ae_loss.csv");
  csv << "epoch,loss\n" << std::setprecision(9);
  const Autoencoder ae = train_autoencoder(scenes, s.autoencoder, [&](int epoch, double loss) {
    csv << epoch << ',' << loss << '\n';
    log_info("autoencoder epoch " + std::to_string(epoch) + " loss " + std::to_string(loss));
  });
  csv.close();
  save_autoencoder(ae, dir / "autoencoder.ckpt");
  save_png(dir / "ae_loss.png", plot_lines({ae.history().epoch_loss}, {640, 360, 24, true}));

  const int shown = std::min<int>(6, static_cast<int>(scenes.size()));
  double recon = 0.0;
  int count = 0;
  std::vector<std::vector<Image>> grid(2);
  for (int i = 0; i < std::min<int>(20, static_cast<int>(scenes.size())); ++i) {
    for (const Image& img : scenes[i].images) {
      const Image back = ae.decode(ae.encode(img));
      recon += psnr(back, img);
      ++count;
      if (i < shown && &img == &scenes[i].images.front()) {
        grid[0].push_back(img);
        grid[1].push_back(back);
      }
    }
  }
  save_png(dir / "reconstructions.png", image_grid(grid));
  const auto& losses = ae.history().epoch_loss;
  write_json_file(dir / "report.json", Json{{"epochs", losses.size()},
                                            {"first_epoch_loss", losses.front()},
                                            {"final_epoch_loss", losses.back()},
                                            {"reconstruction_psnr", recon / count},
                                            {"frozen", ae.frozen()}});
  std::cout << "autoencoder " << (dir / "autoencoder.ckpt").string() << ": reconstruction "
            << std::setprecision(4) << recon / count << " dB\n";
  return kOk;
}

int cmd_train(const Command& cmd) {
  const Settings s = resolve(cmd);
  const auto scenes = load_data(s, "data");
  const Autoencoder ae = load_ae(s);
  const fs::path dir = prepare_dir(cmd);
  write_snapshot(dir, cmd, s);
  const Denoiser model = train_into(dir, scenes, ae, s.denoiser, s.train);
  Json report = train_summary(dir / "train_log.csv");
  report["latent_scale"] = model.latent_scale;
  write_json_file(dir / "report.json", report);
  std::cout << "denoiser " << (dir / "denoiser.ckpt").string() << ": final total " << report["total"] << "\n";
  return kOk;
}

int cmd_infer(const Command& cmd) {
  const Settings s = resolve(cmd);
  const Autoencoder ae = load_ae(s);
  const Denoiser model = load_model(s);
  const NoiseSchedule sched = make_schedule(model.config.timesteps);
  const fs::path input = s.input("input");
  if (!fs::exists(input)) throw IoError("input not found: " + input.string());
  const fs::path dir = prepare_dir(cmd);
  write_snapshot(dir, cmd, s);
  Json outputs = Json::array();
  if (fs::is_directory(input)) {
    const auto scenes = read_dataset(input);
    std::vector<std::vector<Image>> grid;
    for (size_t i = 0; i < scenes.size(); ++i) {
      std::vector<const Image*> ptrs;
      for (const Image& img : scenes[i].images) ptrs.push_back(&img);
      PredictOptions po;
      po.max_batch = s.eval.max_batch;
      const AlbedoPrediction pred = predict_albedos(batch_images(ptrs), ae, model, s.inference, sched, po);
      std::vector<Image> row;
      for (int k = 0; k < pred.albedo.batch(); ++k) {
        const std::string name = "scene_" + std::to_string(i) + "_light_" + std::to_string(k) + "_albedo.png";
        save_png(dir / name, pred.albedo.sample(k));
        outputs.push_back(name);
        if (i < 4) row.push_back(pred.albedo.sample(k));
      }
      if (i < 4) {
        grid.push_back(scenes[i].images);
        grid.push_back(std::move(row));
      }
    }
    if (!grid.empty()) save_png(dir / "albedo_grid.png", image_grid(grid));
  } else {
    Image img = read_png(input);
    const Image albedo = predict_albedo(img, ae, model, s.inference, sched);
    save_png(dir / "albedo.png", albedo);
    outputs.push_back("albedo.png");
    save_png(dir / "albedo_grid.png", image_grid({{img, albedo}}));
  }
  write_json_file(dir / "report.json", Json{{"outputs", outputs}, {"inference", to_json(s.inference)}});
  std::cout << "wrote " << outputs.size() << " albedo image(s) to " << dir.string() << "\n";
  return kOk;
}

int cmd_eval(const Command& cmd) {
  const Settings s = resolve(cmd);
  const auto scenes = load_data(s, "data");
  const Autoencoder ae = load_ae(s);
  const Denoiser model = load_model(s);
  const NoiseSchedule sched = make_schedule(model.config.timesteps);
  const fs::path dir = prepare_dir(cmd);
  write_snapshot(dir, cmd, s);
  const EvalReport r = evaluate(scenes, ae, model, s.inference, sched, eval_options(s));
  write_consistency_report(r.accuracy, dir / "metrics.csv", dir / "metrics.json");
  write_consistency_report(r.baseline, dir / "baseline.csv", dir / "baseline.json");
  const DistributionReport lighting = analyze_latents(r.lighting_latents);
  write_json_file(dir / "report.json", eval_json(r, lighting));
  write_grid(dir / "albedo_grid.png", scenes, r, s.eval.grid_scenes);
  std::cout << std::setprecision(4) << "albedo PSNR " << r.accuracy.mean_psnr << " dB, SSIM " << r.accuracy.mean_ssim
            << " (input baseline " << r.baseline.mean_psnr << " dB), WHDR " << r.mean_whdr << "\n";
  return kOk;
}

int cmd_analyze(const Command& cmd) {
  const Settings s = resolve(cmd);
  const auto scenes = load_data(s, "data");
  const Autoencoder ae = load_ae(s);
  const fs::path dir = prepare_dir(cmd);
  write_snapshot(dir, cmd, s);
  DistributionReport report;
  std::string mode;
  if (s.has("denoiser")) {
    const Denoiser model = load_model(s);
    const NoiseSchedule sched = make_schedule(model.config.timesteps);
    report = analyze_latents(evaluate(scenes, ae, model, s.inference, sched, eval_options(s)).lighting_latents);
    mode = "predicted";
  } else {
    report = analyze_lighting_latents(scenes, ae);
    mode = "encoded";
  }
  Json j = to_json(report);
  j["mode"] = mode;
  write_json_file(dir / "report.json", j);
  save_png(dir / "histogram.png", plot_histogram(report));
  std::cout << "lighting latents (" << mode << "): mean " << report.mean << ", std " << report.std
            << ", positive fraction " << report.positive_fraction << "\n";
  return kOk;
}

int cmd_ablate(const Command& cmd) {
  const Settings s = resolve(cmd);
  const auto train = load_data(s, "data");
  const auto test = load_data(s, "test");
  const Autoencoder ae = load_ae(s);
  const NoiseSchedule sched = make_schedule(s.denoiser.timesteps);
  const fs::path dir = prepare_dir(cmd);
  write_snapshot(dir, cmd, s);

  std::ofstream csv(dir / "ablation.csv");
  csv << "variant,lambda,use_consistency,blur_prob,psnr,ssim,pairwise_psnr,whdr,lighting_positive_fraction\n"
      << std::setprecision(9);
  Json rows = Json::array();
  std::vector<double> bars;
  double baseline = 0.0;
  for (const AblationVariant& v : ablation_variants(s.train)) {
    log_info("ablation variant " + v.name);
    const fs::path sub = dir / v.name;
    fs::create_directories(sub);
    const Denoiser model = train_into(sub, train, ae, s.denoiser, v.config);
    const EvalReport r = evaluate(test, ae, model, s.inference, sched, eval_options(s));
    const DistributionReport lighting = analyze_latents(r.lighting_latents);
    write_json_file(sub / "report.json", eval_json(r, lighting));
    write_json_file(sub / "lighting_latents.json", to_json(lighting));
    save_png(sub / "lighting_histogram.png", plot_histogram(lighting));
    write_grid(sub / "albedo_grid.png", test, r, s.eval.grid_scenes);
    csv << v.name << ',' << v.config.lambda << ',' << (v.config.use_consistency ? 1 : 0) << ',' << v.config.blur_prob
        << ',' << r.accuracy.mean_psnr << ',' << r.accuracy.mean_ssim << ',' << r.pairwise_pred_psnr << ','
        << r.mean_whdr << ',' << lighting.positive_fraction << '\n';
    Json row = eval_json(r, lighting);
    row["variant"] = v.name;
    row["train"] = to_json(v.config);
    rows.push_back(row);
    bars.push_back(r.accuracy.mean_psnr);
    baseline = r.baseline.mean_psnr;
    std::cout << std::left << std::setw(16) << v.name << " PSNR " << std::setprecision(4) << r.accuracy.mean_psnr
              << "  SSIM " << r.accuracy.mean_ssim << std::endl;
  }
  write_json_file(dir / "ablation.json", Json{{"rows", rows}, {"baseline_psnr", baseline}});
  save_png(dir / "ablation_psnr.png", plot_bars(bars));
  return kOk;
}

void add_common(Command& cmd, bool needs_out = true) {
  cmd.app->add_option("--config", cmd.config_path, "JSON config; flags override its values")->check(CLI::ExistingFile);
  if (needs_out) {
    cmd.app->add_option("--out", cmd.out,
                        std::string("run directory (default $") + kRunRootEnv + "/<command>-<UTC time>, root ./runs)");
  }
  cmd.app->add_flag("--force", cmd.force, "overwrite a non-empty output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latsplit: self-supervised latent albedo estimation on toy multi-illumination scenes"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "only print warnings and results");

  std::deque<Command> commands;
  std::map<CLI::App*, std::function<int(const Command&)>> handlers;
  auto make = [&](const std::string& name, const std::string& help, int (*fn)(const Command&)) -> Command& {
    Command& c = commands.emplace_back();
    c.name = name;
    c.app = app.add_subcommand(name, help);
    handlers[c.app] = fn;
    return c;
  };

  {
    Command& c = make("gen-data", "generate a toy multi-illumination dataset", cmd_gen_data);
    add_common(c);
    c.overrides.add_alias(c.app, "--scenes", "data", "scenes", "number of scenes");
    c.overrides.add_alias(c.app, "--lights", "data", "lights", "lights per scene (>= 2)");
    c.overrides.add_alias(c.app, "--size", "data", "size", "image height and width");
    c.overrides.add_alias(c.app, "--seed", "data", "seed", "generator seed");
    c.overrides.add_section<DataConfig>(c.app, "data", "Data");
  }
  {
    Command& c = make("train-vae", "train and freeze the autoencoder", cmd_train_vae);
    add_common(c);
    c.overrides.add_input(c.app, "data", "training dataset directory");
    c.overrides.add_section<AutoencoderConfig>(c.app, "autoencoder", "Autoencoder");
  }
  {
    Command& c = make("train", "train the decomposition denoiser", cmd_train);
    add_common(c);
    c.overrides.add_input(c.app, "data", "training dataset directory");
    c.overrides.add_input(c.app, "ae", "autoencoder checkpoint");
    c.overrides.add_section<DenoiserConfig>(c.app, "denoiser", "Denoiser");
    c.overrides.add_section<TrainConfig>(c.app, "train", "Training");
  }
  {
    Command& c = make("infer", "predict albedo for an image or a dataset", cmd_infer);
    add_common(c);
    c.overrides.add_input(c.app, "ae", "autoencoder checkpoint");
    c.overrides.add_input(c.app, "denoiser", "denoiser checkpoint");
    c.overrides.add_input(c.app, "input", "PNG image or dataset directory");
    c.overrides.add_section<InferenceConfig>(c.app, "inference", "Inference");
    c.overrides.add_section<EvalConfig>(c.app, "eval", "Evaluation");
  }
  {
    Command& c = make("eval", "albedo accuracy, cross-light consistency and WHDR", cmd_eval);
    add_common(c);
    c.overrides.add_input(c.app, "data", "evaluation dataset directory");
    c.overrides.add_input(c.app, "ae", "autoencoder checkpoint");
    c.overrides.add_input(c.app, "denoiser", "denoiser checkpoint");
    c.overrides.add_section<InferenceConfig>(c.app, "inference", "Inference");
    c.overrides.add_section<EvalConfig>(c.app, "eval", "Evaluation");
  }
  {
    Command& c = make("analyze", "lighting-latent distribution study", cmd_analyze);
    add_common(c);
    c.overrides.add_input(c.app, "data", "dataset directory with ground-truth albedo");
    c.overrides.add_input(c.app, "ae", "autoencoder checkpoint");
    c.overrides.add_input(c.app, "denoiser", "optional denoiser checkpoint: analyse predicted lighting latents");
    c.overrides.add_section<InferenceConfig>(c.app, "inference", "Inference");
    c.overrides.add_section<EvalConfig>(c.app, "eval", "Evaluation");
  }
  {
    Command& c = make("ablate", "train and evaluate the four ablation variants", cmd_ablate);
    add_common(c);
    c.overrides.add_input(c.app, "data", "training dataset directory");
    c.overrides.add_input(c.app, "test", "held-out dataset directory");
    c.overrides.add_input(c.app, "ae", "autoencoder checkpoint");
    c.overrides.add_section<DenoiserConfig>(c.app, "denoiser", "Denoiser");
    c.overrides.add_section<TrainConfig>(c.app, "train", "Training");
    c.overrides.add_section<InferenceConfig>(c.app, "inference", "Inference");
    c.overrides.add_section<EvalConfig>(c.app, "eval", "Evaluation");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }
  if (quiet) log_level() = LogLevel::kWarn;

  for (const Command& c : commands) {
    if (!c.app->parsed()) continue;
    try {
      return handlers.at(c.app)(c);
    } catch (const ParameterError& e) {
      std::cerr << "latsplit " << c.name << ": " << e.what() << "\n";
      return kUsage;
    } catch (const DimensionError& e) {
      std::cerr << "latsplit " << c.name << ": " << e.what() << "\n";
      return kUsage;
    } catch (const FormatError& e) {
      std::cerr << "latsplit " << c.name << ": format error: " << e.what() << "\n";
      return kData;
    } catch (const IoError& e) {
      std::cerr << "latsplit " << c.name << ": " << e.what() << "\n";
      return kData;
    } catch (const NumericError& e) {
      std::cerr << "latsplit " << c.name << ": numeric failure: " << e.what() << "\n";
      return kNumeric;
    } catch (const std::exception& e) {
      std::cerr << "latsplit " << c.name << ": " << e.what() << "\n";
      return kFailure;
    }
  }
  return kUsage;
}
