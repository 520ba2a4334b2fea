#include "lungforge/config_file.hpp"

#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "lungforge/errors.hpp"

namespace lungforge {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T, typename Parse>
bool parse_whole(const std::string& s, T& out, Parse parse) {
  try {
    std::size_t used = 0;
    out = parse(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_double(const std::string& s, double& out) {
  return parse_whole(s, out, [](const std::string& v, std::size_t* u) { return std::stod(v, u); });
}

bool parse_u64(const std::string& s, std::uint64_t& out) {
  if (s.empty() || s[0] == '-') return false;
  return parse_whole(s, out, [](const std::string& v, std::size_t* u) {
    return static_cast<std::uint64_t>(std::stoull(v, u));
  });
}

}  // namespace

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

ConfigFile ConfigFile::parse(const std::string& text, const std::string& origin) {
  ConfigFile cfg;
  cfg.origin_ = origin;
  cfg.text_ = text;
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParameterError(origin + ": line " + std::to_string(e.line()) + ": " + e.message());
  }
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      cfg.values_[""][name] = trim(node.data());
    } else {
      auto& section = cfg.values_[name];
      for (const auto& [key, leaf] : node) section[key] = trim(leaf.data());
    }
  }
  return cfg;
}

const std::string* ConfigFile::find(const std::string& section, const std::string& key) const {
  const auto s = values_.find(section);
  if (s == values_.end()) return nullptr;
  const auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

void ConfigFile::bad_value(const std::string& section, const std::string& key,
                           const std::string& expected) const {
  throw ParameterError(origin_ + ": [" + section + "] " + key + " = '" + *find(section, key) +
                       "' is not " + expected);
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

bool ConfigFile::has_section(const std::string& section) const { return values_.count(section) > 0; }

std::vector<std::string> ConfigFile::sections() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : values_) out.push_back(name);
  return out;
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key,
                                   const std::string& fallback) const {
  const auto* v = find(section, key);
  return v != nullptr ? *v : fallback;
}

double ConfigFile::get_double(const std::string& section, const std::string& key, double fallback) const {
  const auto* v = find(section, key);
  if (v == nullptr) return fallback;
  double out = 0.0;
  if (!parse_double(*v, out)) bad_value(section, key, "a number");
  return out;
}

int ConfigFile::get_int(const std::string& section, const std::string& key, int fallback) const {
  const auto* v = find(section, key);
  if (v == nullptr) return fallback;
  int out = 0;
  if (!parse_whole(*v, out, [](const std::string& s, std::size_t* u) { return std::stoi(s, u); })) {
    bad_value(section, key, "an integer");
  }
  return out;
}

std::uint64_t ConfigFile::get_u64(const std::string& section, const std::string& key,
                                  std::uint64_t fallback) const {
  const auto* v = find(section, key);
  if (v == nullptr) return fallback;
  std::uint64_t out = 0;
  if (!parse_u64(*v, out)) bad_value(section, key, "a non-negative integer");
  return out;
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  const auto* v = find(section, key);
  if (v == nullptr) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  bad_value(section, key, "a boolean");
}

std::vector<std::string> ConfigFile::get_list(const std::string& section, const std::string& key,
                                              const std::vector<std::string>& fallback) const {
  const auto* v = find(section, key);
  return v != nullptr ? split_list(*v) : fallback;
}

std::vector<double> ConfigFile::get_doubles(const std::string& section, const std::string& key,
                                            const std::vector<double>& fallback) const {
  const auto* v = find(section, key);
  if (v == nullptr) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(*v)) {
    double d = 0.0;
    if (!parse_double(item, d)) bad_value(section, key, "a list of numbers");
    out.push_back(d);
  }
  return out;
}

std::vector<std::uint64_t> ConfigFile::get_u64s(const std::string& section, const std::string& key,
                                                const std::vector<std::uint64_t>& fallback) const {
  const auto* v = find(section, key);
  if (v == nullptr) return fallback;
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(*v)) {
    std::uint64_t u = 0;
    if (!parse_u64(item, u)) bad_value(section, key, "a list of non-negative integers");
    out.push_back(u);
  }
  return out;
}

void ConfigFile::require_known(const std::map<std::string, std::set<std::string>>& schema) const {
  for (const auto& [section, keys] : values_) {
    const auto s = schema.find(section);
    if (s == schema.end()) {
      throw ParameterError(origin_ + ": unknown section [" + section + "]");
    }
    for (const auto& [key, _] : keys) {
      if (s->second.count(key) == 0) {
        throw ParameterError(origin_ + ": unknown key '" + key + "' in [" + section + "]");
      }
    }
  }
}

std::set<std::string> train_config_keys() {
  return {"learning_rate", "weight_decay", "lr_decay", "batch_size", "epochs", "seed",
          "w_adaptive", "w_local", "w_region", "ts", "kernel_size", "temperature",
          "x_shift", "y_shift", "unet_levels", "unet_base", "force"};
}

std::set<std::string> pretrain_config_keys() {
  return {"learning_rate", "weight_decay", "lr_decay", "batch_size", "epochs", "seed", "tau", "force"};
}

std::set<std::string> domain_config_keys() {
  return {"preset", "name", "brightness_offset", "contrast_gain", "noise_sigma",
          "text_probability", "text_intensity", "artifact_probability", "artifact_intensity",
          "background_intensity", "body_intensity", "lung_intensity", "lesion_contrast"};
}

TrainConfig read_train_config(const ConfigFile& cfg, const std::string& s, TrainConfig c) {
  c.learning_rate = cfg.get_double(s, "learning_rate", c.learning_rate);
  c.weight_decay = cfg.get_double(s, "weight_decay", c.weight_decay);
  c.lr_decay = cfg.get_double(s, "lr_decay", c.lr_decay);
  c.batch_size = cfg.get_int(s, "batch_size", c.batch_size);
  c.epochs = cfg.get_int(s, "epochs", c.epochs);
  c.seed = cfg.get_u64(s, "seed", c.seed);
  c.weights.adaptive = cfg.get_double(s, "w_adaptive", c.weights.adaptive);
  c.weights.local = cfg.get_double(s, "w_local", c.weights.local);
  c.weights.region = cfg.get_double(s, "w_region", c.weights.region);
  c.ts = cfg.get_double(s, "ts", c.ts);
  c.kernel_size = cfg.get_int(s, "kernel_size", c.kernel_size);
  c.temperature = cfg.get_double(s, "temperature", c.temperature);
  c.shift.x_shift = cfg.get_double(s, "x_shift", c.shift.x_shift);
  c.shift.y_shift = cfg.get_double(s, "y_shift", c.shift.y_shift);
  c.unet.levels = cfg.get_int(s, "unet_levels", c.unet.levels);
  c.unet.base_channels = cfg.get_int(s, "unet_base", c.unet.base_channels);
  c.force = cfg.get_bool(s, "force", c.force);
  c.validate();
  return c;
}

PretrainConfig read_pretrain_config(const ConfigFile& cfg, const std::string& s, PretrainConfig c) {
  c.learning_rate = cfg.get_double(s, "learning_rate", c.learning_rate);
  c.weight_decay = cfg.get_double(s, "weight_decay", c.weight_decay);
  c.lr_decay = cfg.get_double(s, "lr_decay", c.lr_decay);
  c.batch_size = cfg.get_int(s, "batch_size", c.batch_size);
  c.epochs = cfg.get_int(s, "epochs", c.epochs);
  c.seed = cfg.get_u64(s, "seed", c.seed);
  c.tau = cfg.get_double(s, "tau", c.tau);
  c.force = cfg.get_bool(s, "force", c.force);
  c.validate();
  return c;
}

DomainConfig read_domain_config(const ConfigFile& cfg, const std::string& s) {
  DomainConfig d = DomainConfig::preset(cfg.get_string(s, "preset", "A"));
  d.name = cfg.get_string(s, "name", d.name);
  d.brightness_offset = cfg.get_double(s, "brightness_offset", d.brightness_offset);
  d.contrast_gain = cfg.get_double(s, "contrast_gain", d.contrast_gain);
  d.noise_sigma = cfg.get_double(s, "noise_sigma", d.noise_sigma);
  d.text_probability = cfg.get_double(s, "text_probability", d.text_probability);
  d.text_intensity = cfg.get_double(s, "text_intensity", d.text_intensity);
  d.artifact_probability = cfg.get_double(s, "artifact_probability", d.artifact_probability);
  d.artifact_intensity = cfg.get_double(s, "artifact_intensity", d.artifact_intensity);
  d.background_intensity = cfg.get_double(s, "background_intensity", d.background_intensity);
  d.body_intensity = cfg.get_double(s, "body_intensity", d.body_intensity);
  d.lung_intensity = cfg.get_double(s, "lung_intensity", d.lung_intensity);
  d.lesion_contrast = cfg.get_double(s, "lesion_contrast", d.lesion_contrast);
  d.validate();
  return d;
}

}  // namespace lungforge
