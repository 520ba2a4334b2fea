#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lungforge/contrastive.hpp"
#include "lungforge/dce_trainer.hpp"
#include "lungforge/phantom.hpp"

namespace lungforge {

/// INI-style `key = value` file with `[section]` headers; lines starting
/// with '#' or ';' are comments. Keys outside a section live in section "".
class ConfigFile {
 public:
  /// Throws IoError when unreadable and ParameterError on a syntax error.
  static ConfigFile load(const std::filesystem::path& path);
  static ConfigFile parse(const std::string& text, const std::string& origin = "<string>");

  [[nodiscard]] bool has(const std::string& section, const std::string& key) const;
  [[nodiscard]] bool has_section(const std::string& section) const;
  [[nodiscard]] std::vector<std::string> sections() const;

  /// Typed getters return `fallback` when the key is absent and throw
  /// ParameterError when the value does not parse.
  [[nodiscard]] std::string get_string(const std::string& section, const std::string& key,
                                       const std::string& fallback) const;
  [[nodiscard]] double get_double(const std::string& section, const std::string& key, double fallback) const;
  [[nodiscard]] int get_int(const std::string& section, const std::string& key, int fallback) const;
  [[nodiscard]] std::uint64_t get_u64(const std::string& section, const std::string& key,
                                      std::uint64_t fallback) const;
  [[nodiscard]] bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  /// Comma-separated lists.
  [[nodiscard]] std::vector<std::string> get_list(const std::string& section, const std::string& key,
                                                  const std::vector<std::string>& fallback) const;
  [[nodiscard]] std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                                const std::vector<double>& fallback) const;
  [[nodiscard]] std::vector<std::uint64_t> get_u64s(const std::string& section, const std::string& key,
                                                    const std::vector<std::uint64_t>& fallback) const;

  /// Throws ParameterError naming the first section or key not in `schema`.
  void require_known(const std::map<std::string, std::set<std::string>>& schema) const;

  /// Raw text the file was parsed from (hashed into run manifests).
  [[nodiscard]] const std::string& text() const { return text_; }

 private:
  std::string origin_;
  std::string text_;
  std::map<std::string, std::map<std::string, std::string>> values_;

  [[nodiscard]] const std::string* find(const std::string& section, const std::string& key) const;
  [[noreturn]] void bad_value(const std::string& section, const std::string& key,
                              const std::string& expected) const;
};

/// Reads [dce] keys: learning_rate, weight_decay, lr_decay, batch_size,
/// epochs, seed, w_adaptive, w_local, w_region, ts, kernel_size,
/// temperature, x_shift, y_shift, unet_levels, unet_base, force. Missing
/// keys keep the values in `base`.
TrainConfig read_train_config(const ConfigFile& cfg, const std::string& section, TrainConfig base = {});
/// Reads [pretrain] keys: learning_rate, weight_decay, lr_decay, batch_size,
/// epochs, seed, tau, force.
PretrainConfig read_pretrain_config(const ConfigFile& cfg, const std::string& section,
                                    PretrainConfig base = {});
/// Reads [domain] keys named after the DomainConfig fields, starting from
/// the preset named by `preset` (default A).
DomainConfig read_domain_config(const ConfigFile& cfg, const std::string& section);

std::set<std::string> train_config_keys();
std::set<std::string> pretrain_config_keys();
std::set<std::string> domain_config_keys();

}  // namespace lungforge
