#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "lungforge/errors.hpp"
#include "lungforge/params.hpp"

namespace lungforge {

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::f64(double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

void ByteWriter::bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.insert(buf_.end(), s.begin(), s.end());
}

std::span<const std::uint8_t> ByteReader::bytes(std::size_t n) {
  if (data_.size() - pos_ < n) throw FormatError("checkpoint truncated");
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint32_t ByteReader::u32() {
  const auto b = bytes(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

double ByteReader::f64() {
  const auto b = bytes(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

std::string ByteReader::str() {
  const auto n = u32();
  const auto b = bytes(n);
  return {b.begin(), b.end()};
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.magic.size() != 4) throw_parameter("checkpoint magic must be four bytes");
  ByteWriter w;
  w.bytes({reinterpret_cast<const std::uint8_t*>(ckpt.magic.data()), 4});
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(ckpt.config.size()));
  w.bytes(ckpt.config);
  w.str(ckpt.metadata);
  w.u32(static_cast<std::uint32_t>(ckpt.params.tensors().size()));
  for (const auto& t : ckpt.params.tensors()) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.values) w.f32(static_cast<float>(v));
  }
  return std::move(w).take();
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, std::string_view expected_magic) {
  ByteReader r(bytes);
  Checkpoint ckpt;
  const auto magic = r.bytes(4);
  ckpt.magic.assign(magic.begin(), magic.end());
  if (ckpt.magic != expected_magic) {
    throw FormatError("expected checkpoint magic " + std::string(expected_magic) + ", found " +
                      ckpt.magic);
  }
  if (const auto version = r.u32(); version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto config_len = r.u32();
  const auto config = r.bytes(config_len);
  ckpt.config.assign(config.begin(), config.end());
  ckpt.metadata = r.str();
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const auto rank = r.u32();
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(r.u32());
    auto& t = ckpt.params.add(std::move(name), std::move(shape));
    for (double& v : t.values) v = static_cast<double>(r.f32());
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint tensors");
  return ckpt;
}

Checkpoint read_checkpoint(const std::filesystem::path& path, std::string_view expected_magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, expected_magic);
}

}  // namespace lungforge
