#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lungforge {

struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;

  [[nodiscard]] std::size_t numel() const;
};

/// Ordered collection of named weight tensors. Gradients use the same type.
class ModelParams {
 public:
  ModelParams() = default;

  NamedTensor& add(std::string name, std::vector<int> shape, double fill = 0.0);

  [[nodiscard]] const NamedTensor& at(std::string_view name) const;
  [[nodiscard]] NamedTensor& at(std::string_view name);
  [[nodiscard]] bool contains(std::string_view name) const;
  [[nodiscard]] std::span<const double> values(std::string_view name) const { return at(name).values; }
  [[nodiscard]] std::span<double> values(std::string_view name) { return at(name).values; }

  [[nodiscard]] const std::vector<NamedTensor>& tensors() const { return tensors_; }
  [[nodiscard]] std::vector<NamedTensor>& tensors() { return tensors_; }
  [[nodiscard]] std::size_t parameter_count() const;

  /// Same names and shapes, all zeros.
  [[nodiscard]] ModelParams zeros_like() const;
  /// Removes every tensor whose name starts with `prefix`.
  void erase_prefix(std::string_view prefix);

  /// Adds `scale * other` element-wise (identical layout required).
  void add_scaled(const ModelParams& other, double scale);
  void scale(double factor);
  /// Rounds every value to the nearest float32 so checkpoints are exact.
  void round_to_float();
  [[nodiscard]] bool all_finite() const;

  friend bool operator==(const ModelParams&, const ModelParams&);

 private:
  std::vector<NamedTensor> tensors_;
};

/// Contents of a checkpoint container.
struct Checkpoint {
  std::string magic;                     // four ASCII bytes, e.g. "DCE1"
  std::vector<std::uint8_t> config;      // model-specific configuration block
  std::string metadata;                  // UTF-8 JSON text
  ModelParams params;
};

/// Byte layout (all integers little-endian):
///   magic[4] | u32 version=1 | u32 config_len | config bytes |
///   u32 metadata_len | metadata bytes | u32 tensor_count |
///   per tensor: u32 name_len | name | u32 rank | u32 dims[rank] | f32 values
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);

/// Throws IoError when unreadable and FormatError on a bad magic, version
/// or truncated content.
Checkpoint read_checkpoint(const std::filesystem::path& path, std::string_view expected_magic);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, std::string_view expected_magic);

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Little-endian helpers for configuration blocks.
class ByteWriter {
 public:
  void u32(std::uint32_t v);
  void f32(float v);
  void f64(double v);
  void bytes(std::span<const std::uint8_t> b);
  void str(std::string_view s);  // u32 length + bytes
  [[nodiscard]] std::vector<std::uint8_t> take() && { return std::move(buf_); }
  [[nodiscard]] const std::vector<std::uint8_t>& data() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}
  std::uint32_t u32();
  float f32();
  double f64();
  std::span<const std::uint8_t> bytes(std::size_t n);
  std::string str();
  [[nodiscard]] bool done() const { return pos_ == data_.size(); }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace lungforge
