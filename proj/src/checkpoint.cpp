#include "latsplit/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "latsplit/config_io.hpp"

namespace latsplit {

namespace {

constexpr char kMagic[8] = {'L', 'S', 'P', 'L', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void put_string(std::ofstream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot read checkpoint " + path.string());
  }

  template <typename T>
  T get() {
    T value;
    bytes(reinterpret_cast<char*>(&value), sizeof(T));
    return value;
  }

  std::string get_string() {
    const auto len = get<std::uint32_t>();
    if (len > (1u << 16)) fail("implausible string length");
    std::string s(len, '\0');
    bytes(s.data(), len);
    return s;
  }

  void bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (!in_) fail("truncated file");
  }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

  [[noreturn]] void fail(const std::string& why) const { throw FormatError(path_.string() + ": " + why); }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

void write_params(const nn::ParameterList<float>& params, const std::string& version,
                  const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointFormat);
  put_string(out, version);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    put_string(out, p->name);
    put<std::int64_t>(out, p->value.rows());
    put<std::int64_t>(out, p->value.cols());
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(float)));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void read_params(const nn::ParameterList<float>& params, const std::string& version,
                 const std::filesystem::path& path) {
  Reader in(path);
  char magic[sizeof(kMagic)];
  in.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) in.fail("not a checkpoint file");
  const auto format = in.get<std::uint32_t>();
  if (format != kCheckpointFormat) {
    in.fail("checkpoint format " + std::to_string(format) + ", expected " + std::to_string(kCheckpointFormat));
  }
  const std::string found = in.get_string();
  if (found != version) in.fail("model version '" + found + "', expected '" + version + "'");
  const auto count = in.get<std::uint32_t>();
  if (count != params.size()) {
    in.fail(std::to_string(count) + " tensors, model has " + std::to_string(params.size()));
  }
  for (auto* p : params) {
    const std::string name = in.get_string();
    if (name != p->name) in.fail("tensor '" + name + "' where '" + p->name + "' was expected");
    const auto rows = in.get<std::int64_t>();
    const auto cols = in.get<std::int64_t>();
    if (rows != p->value.rows() || cols != p->value.cols()) in.fail("tensor '" + name + "' has the wrong shape");
    in.bytes(reinterpret_cast<char*>(p->value.data()), p->value.size() * sizeof(float));
  }
  if (!in.at_end()) in.fail("trailing bytes");
}

void check_version(const Json& sidecar, const char* expected, const std::filesystem::path& path) {
  const std::string found = sidecar.value("version", std::string());
  if (found != expected) {
    throw FormatError(path.string() + ": version '" + found + "', expected '" + expected + "'");
  }
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  std::filesystem::path out = path;
  out += ".json";
  return out;
}

void save_autoencoder(const Autoencoder& ae, const std::filesystem::path& path) {
  auto params = const_cast<AutoencoderNet<float>&>(ae.net()).parameters();
  write_params(params, kAutoencoderVersion, path);
  write_json_file(sidecar_path(path), Json{{"version", kAutoencoderVersion},
                                           {"config", to_json(ae.config())},
                                           {"frozen", ae.frozen()},
                                           {"epoch_loss", ae.history().epoch_loss}});
}

Autoencoder load_autoencoder(const std::filesystem::path& path) {
  const auto side = sidecar_path(path);
  const Json meta = read_json_file(side);
  check_version(meta, kAutoencoderVersion, side);
  try {
    AutoencoderConfig config;
    from_json(meta.at("config"), "autoencoder", config);
    Autoencoder ae(config);
    read_params(ae.net().parameters(), kAutoencoderVersion, path);
    ae.history().epoch_loss = meta.value("epoch_loss", std::vector<double>{});
    if (meta.at("frozen").get<bool>()) ae.freeze();
    return ae;
  } catch (const Json::exception& e) {
    throw FormatError(side.string() + ": " + e.what());
  }
}

void save_denoiser(const Denoiser& model, const TrainConfig& train, const std::filesystem::path& path) {
  auto params = const_cast<Denoiser&>(model).parameters();
  write_params(params, kDenoiserVersion, path);
  write_json_file(sidecar_path(path), Json{{"version", kDenoiserVersion},
                                           {"denoiser", to_json(model.config)},
                                           {"train", to_json(train)},
                                           {"steps_trained", model.steps_trained},
                                           {"latent_scale", model.latent_scale},
                                           {"schedule", {{"kind", "linear"},
                                                         {"timesteps", model.config.timesteps},
                                                         {"beta_start", 1e-4},
                                                         {"beta_end", 2e-2}}}});
}

DenoiserCheckpoint load_denoiser(const std::filesystem::path& path) {
  const auto side = sidecar_path(path);
  const Json meta = read_json_file(side);
  check_version(meta, kDenoiserVersion, side);
  try {
    DenoiserConfig config;
    from_json(meta.at("denoiser"), "denoiser", config);
    DenoiserCheckpoint out{Denoiser(config), TrainConfig{}};
    from_json(meta.at("train"), "train", out.train);
    read_params(out.model.parameters(), kDenoiserVersion, path);
    out.model.steps_trained = meta.at("steps_trained").get<long>();
    out.model.latent_scale = meta.at("latent_scale").get<double>();
    if (!(out.model.latent_scale > 0.0)) throw FormatError(side.string() + ": latent_scale must be positive");
    return out;
  } catch (const Json::exception& e) {
    throw FormatError(side.string() + ": " + e.what());
  }
}

}  // namespace latsplit
