#include "run_support.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <ctime>
#include <fstream>

#include <openssl/evp.h>

#include "lungforge/errors.hpp"
#include "lungforge/parallel.hpp"

namespace lungforge::cli {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 15];
  }
  return out;
}

DirectoryLock::DirectoryLock(const std::filesystem::path& dir) : path_(dir / kLockName) {
  std::filesystem::create_directories(dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw LockError("output directory " + dir.string() + " is in use (remove " + path_.string() +
                    " if no other run is active)");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

DirectoryLock::~DirectoryLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

Manifest::Manifest(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)),
      argv_(std::move(argv)),
      started_(std::chrono::system_clock::now()),
      t0_(std::chrono::steady_clock::now()) {}

void Manifest::write(const std::filesystem::path& path) const {
  const std::time_t t = std::chrono::system_clock::to_time_t(started_);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
  std::string line;
  for (const auto& a : argv_) line += (line.empty() ? "" : " ") + a;
  nlohmann::json j;
  j["tool"] = "lungforge";
  j["version"] = LUNGFORGE_VERSION;
  j["command"] = command_;
  j["command_line"] = line;
  j["config"] = config_;
  j["config_hash"] = "sha256:" + sha256_hex(config_.dump());
  j["seed"] = seed_ ? nlohmann::json(*seed_) : nlohmann::json(nullptr);
  j["outputs"] = outputs_;
  j["threads"] = worker_count();
  j["started_at"] = stamp;
  j["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  write_file(path, j.dump(2) + "\n");
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp);
    out << text;
    if (!out) throw IoError("cannot write " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace lungforge::cli
