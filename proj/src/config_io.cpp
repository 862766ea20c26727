#include "latsplit/config_io.hpp"

#include <fstream>
#include <set>

namespace latsplit {

namespace {

class FieldReader {
 public:
  FieldReader(const Json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw FormatError("config section '" + section_ + "' must be a JSON object");
  }

  template <typename T>
  void operator()(const char* name, T& field) {
    known_.insert(name);
    const auto it = j_.find(name);
    if (it == j_.end()) return;
    const std::string path = section_ + "." + name;
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw FormatError("config field '" + path + "' must be a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw FormatError("config field '" + path + "' must be an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (!it->is_number_unsigned()) {
          throw FormatError("config field '" + path + "' must be non-negative");
        }
      }
    } else {
      if (!it->is_number()) throw FormatError("config field '" + path + "' must be a number");
    }
    field = it->template get<T>();
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!known_.count(item.key())) throw FormatError("unknown config field '" + section_ + "." + item.key() + "'");
    }
  }

 private:
  const Json& j_;
  std::string section_;
  std::set<std::string> known_;
};

template <typename Config, typename Visit>
void read_config(const Json& j, const std::string& section, Config& c, Visit visit) {
  FieldReader reader(j, section);
  visit(reader, c);
  reader.finish();
}

struct FieldWriter {
  Json j = Json::object();
  template <typename T>
  void operator()(const char* name, const T& field) {
    j[name] = field;
  }
};

template <typename Config>
Json write_config(const Config& c) {
  FieldWriter w;
  visit_fields(w, const_cast<Config&>(c));
  return w.j;
}

}  // namespace

Json to_json(const AutoencoderConfig& c) { return write_config(c); }
Json to_json(const DenoiserConfig& c) { return write_config(c); }
Json to_json(const TrainConfig& c) { return write_config(c); }
Json to_json(const InferenceConfig& c) { return write_config(c); }

void from_json(const Json& j, const std::string& section, AutoencoderConfig& c) {
  read_config(j, section, c, [](auto& r, auto& cfg) { visit_fields(r, cfg); });
}
void from_json(const Json& j, const std::string& section, DenoiserConfig& c) {
  read_config(j, section, c, [](auto& r, auto& cfg) { visit_fields(r, cfg); });
}
void from_json(const Json& j, const std::string& section, TrainConfig& c) {
  read_config(j, section, c, [](auto& r, auto& cfg) { visit_fields(r, cfg); });
}
void from_json(const Json& j, const std::string& section, InferenceConfig& c) {
  read_config(j, section, c, [](auto& r, auto& cfg) { visit_fields(r, cfg); });
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace latsplit
