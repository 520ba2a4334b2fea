#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lungforge/image.hpp"

namespace lungforge {

/// Loads an 8/16-bit grayscale (or RGB, converted to luma) PNG or a JPEG and
/// maps raw values linearly from [0, max_raw] to [-1, 1].
///
/// Throws IoError when the file cannot be read, FormatError for unsupported
/// encodings or bit depths and DimensionError for images below 8x8.
GrayImage load_image(const std::filesystem::path& path);

/// Writes a 16-bit grayscale PNG, mapping [-1, 1] linearly onto [0, 65535].
void save_png16(const std::filesystem::path& path, const GrayImage& img);

/// Writes an 8-bit grayscale PNG from raw bytes (masks, test fixtures).
void save_png8(const std::filesystem::path& path, int width, int height,
               const std::vector<std::uint8_t>& bytes);

/// Binary mask: nonzero entries are masked.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  [[nodiscard]] bool masked(int x, int y) const {
    return bits[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(x)] != 0;
  }
};

/// Reads an 8-bit PNG mask; any nonzero pixel is masked.
Mask load_mask(const std::filesystem::path& path);

/// True for file extensions load_image understands (.png, .jpg, .jpeg).
bool is_image_file(const std::filesystem::path& path);

/// Image files directly inside `dir`, sorted by file name.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace lungforge
