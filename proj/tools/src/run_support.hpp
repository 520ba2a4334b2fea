#pragma once

#include <chrono>
#include <stdexcept>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace lungforge::cli {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Exclusive ownership of an output directory through a lockfile created
/// with O_EXCL. Throws LockError when another process holds it.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path path_;
};

class LockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kLockName[] = ".lungforge.lock";

/// Provenance record written beside every output. Timing and wall-clock
/// fields live here only, so all other outputs stay byte-reproducible.
class Manifest {
 public:
  Manifest(std::string command, std::vector<std::string> argv);
  void set_config(nlohmann::json config) { config_ = std::move(config); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void add_output(const std::filesystem::path& p) { outputs_.push_back(p.string()); }
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  std::vector<std::string> argv_;
  nlohmann::json config_ = nlohmann::json::object();
  std::optional<std::uint64_t> seed_;
  std::vector<std::string> outputs_;
  std::chrono::system_clock::time_point started_;
  std::chrono::steady_clock::time_point t0_;
};

/// Writes `text` through a temporary file and a rename.
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace lungforge::cli
