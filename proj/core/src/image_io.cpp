#include "lungforge/image_io.hpp"

#include <png.h>

// jpeglib.h expects FILE and size_t to be declared first.
#include <cstdio>
#include <jpeglib.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <memory>
#include <string>

#include "lungforge/errors.hpp"

namespace lungforge {

namespace {

using FilePtr = std::unique_ptr<std::FILE, int (*)(std::FILE*)>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr fp(std::fopen(path.c_str(), mode), &std::fclose);
  if (!fp) throw IoError("cannot open " + path.string());
  return fp;
}

/// Decoded raster in raw sample units, before normalization. Lives in the
/// caller's frame so the setjmp-based decoders below only own POD state.
struct RawRaster {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> bytes;
  std::vector<std::uint8_t*> rows;
};

struct ErrorSlot {
  std::jmp_buf jump;
  char message[256];
  bool format_error;
};

// ---------------------------------------------------------------- PNG

void png_error_cb(png_structp png, png_const_charp msg) {
  auto* slot = static_cast<ErrorSlot*>(png_get_error_ptr(png));
  std::snprintf(slot->message, sizeof(slot->message), "%s", msg);
  std::longjmp(slot->jump, 1);
}

void png_warning_cb(png_structp, png_const_charp) {}

// Returns false and fills slot->message on failure. Only POD locals here.
bool decode_png(std::FILE* fp, RawRaster& out, ErrorSlot* slot) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, slot, png_error_cb,
                                           png_warning_cb);
  if (png == nullptr) {
    std::snprintf(slot->message, sizeof(slot->message), "png_create_read_struct failed");
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    std::snprintf(slot->message, sizeof(slot->message), "png_create_info_struct failed");
    return false;
  }
  if (setjmp(slot->jump)) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }

  png_init_io(png, fp);
  png_read_info(png, info);
  const int color_type = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
  } else if (depth != 8 && depth != 16) {
    slot->format_error = true;
    std::snprintf(slot->message, sizeof(slot->message), "unsupported PNG bit depth %d", depth);
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.bytes.resize(stride * static_cast<std::size_t>(out.height));
  out.rows.resize(static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y) out.rows[y] = out.bytes.data() + stride * y;
  png_read_image(png, out.rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

// ---------------------------------------------------------------- JPEG

struct JpegErrorManager {
  jpeg_error_mgr base;
  ErrorSlot* slot;
};

void jpeg_error_exit_cb(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, mgr->slot->message);
  std::longjmp(mgr->slot->jump, 1);
}

bool decode_jpeg(std::FILE* fp, RawRaster& out, ErrorSlot* slot) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit_cb;
  err.slot = slot;
  if (setjmp(slot->jump)) {
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, fp);
  jpeg_read_header(&cinfo, TRUE);
  // libjpeg's own YCbCr -> luma conversion.
  cinfo.out_color_space = JCS_GRAYSCALE;
  jpeg_start_decompress(&cinfo);
  out.width = static_cast<int>(cinfo.output_width);
  out.height = static_cast<int>(cinfo.output_height);
  out.channels = 1;
  out.bit_depth = 8;
  const std::size_t stride = static_cast<std::size_t>(out.width);
  out.bytes.resize(stride * static_cast<std::size_t>(out.height));
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.bytes.data() + stride * cinfo.output_scanline;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

// ---------------------------------------------------------------- helpers

double raw_sample(const RawRaster& r, int x, int y, int c) {
  const std::uint8_t* row = r.rows.empty()
                                ? r.bytes.data() + static_cast<std::size_t>(y) * r.width * r.channels
                                : r.rows[y];
  if (r.bit_depth == 16) {
    const std::uint8_t* p = row + 2 * (static_cast<std::size_t>(x) * r.channels + c);
    return static_cast<double>((p[0] << 8) | p[1]);
  }
  return static_cast<double>(row[static_cast<std::size_t>(x) * r.channels + c]);
}

double raw_luma(const RawRaster& r, int x, int y) {
  if (r.channels < 3) return raw_sample(r, x, y, 0);
  return 0.299 * raw_sample(r, x, y, 0) + 0.587 * raw_sample(r, x, y, 1) +
         0.114 * raw_sample(r, x, y, 2);
}

bool has_png_signature(std::FILE* fp) {
  std::array<unsigned char, 8> sig{};
  const std::size_t n = std::fread(sig.data(), 1, sig.size(), fp);
  std::rewind(fp);
  return n == sig.size() && png_sig_cmp(sig.data(), 0, sig.size()) == 0;
}

bool has_jpeg_signature(std::FILE* fp) {
  std::array<unsigned char, 3> sig{};
  const std::size_t n = std::fread(sig.data(), 1, sig.size(), fp);
  std::rewind(fp);
  return n == sig.size() && sig[0] == 0xFF && sig[1] == 0xD8 && sig[2] == 0xFF;
}

RawRaster decode_file(const std::filesystem::path& path) {
  auto fp = open_file(path, "rb");
  RawRaster raster;
  ErrorSlot slot{};
  bool ok = false;
  if (has_png_signature(fp.get())) {
    ok = decode_png(fp.get(), raster, &slot);
  } else if (has_jpeg_signature(fp.get())) {
    ok = decode_jpeg(fp.get(), raster, &slot);
  } else {
    throw FormatError(path.string() + ": neither PNG nor JPEG");
  }
  if (!ok) {
    if (slot.format_error) throw FormatError(path.string() + ": " + slot.message);
    throw IoError(path.string() + ": " + slot.message);
  }
  return raster;
}

void write_png(const std::filesystem::path& path, int width, int height, int depth,
               const std::vector<std::uint8_t>& bytes) {
  auto fp = open_file(path, "wb");
  ErrorSlot slot{};
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &slot, png_error_cb,
                                            png_warning_cb);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("cannot allocate PNG writer for " + path.string());
  }
  const std::size_t stride = static_cast<std::size_t>(width) * (depth / 8);
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(bytes.data() + stride * y);
  }
  if (setjmp(slot.jump)) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path.string() + ": " + slot.message);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), depth,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

GrayImage load_image(const std::filesystem::path& path) {
  const RawRaster raster = decode_file(path);
  if (raster.width < GrayImage::kMinSide || raster.height < GrayImage::kMinSide) {
    throw DimensionError(path.string() + ": image smaller than 8x8");
  }
  const double max_raw = raster.bit_depth == 16 ? 65535.0 : 255.0;
  Plane plane(raster.width, raster.height);
  for (int y = 0; y < raster.height; ++y) {
    for (int x = 0; x < raster.width; ++x) {
      plane.at(x, y) = 2.0 * (raw_luma(raster, x, y) / max_raw) - 1.0;
    }
  }
  return GrayImage::from_clamped(std::move(plane));
}

void save_png16(const std::filesystem::path& path, const GrayImage& img) {
  std::vector<std::uint8_t> bytes(img.size() * 2);
  std::size_t i = 0;
  for (double v : img.pixels()) {
    const auto q = static_cast<std::uint16_t>(std::lround((std::clamp(v, -1.0, 1.0) + 1.0) * 0.5 * 65535.0));
    bytes[i++] = static_cast<std::uint8_t>(q >> 8);
    bytes[i++] = static_cast<std::uint8_t>(q & 0xFF);
  }
  write_png(path, img.width(), img.height(), 16, bytes);
}

void save_png8(const std::filesystem::path& path, int width, int height,
               const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw_dimension("byte count does not match image size");
  }
  write_png(path, width, height, 8, bytes);
}

Mask load_mask(const std::filesystem::path& path) {
  const RawRaster raster = decode_file(path);
  Mask mask;
  mask.width = raster.width;
  mask.height = raster.height;
  mask.bits.resize(static_cast<std::size_t>(raster.width) * raster.height);
  for (int y = 0; y < raster.height; ++y) {
    for (int x = 0; x < raster.width; ++x) {
      mask.bits[static_cast<std::size_t>(y) * raster.width + x] = raw_luma(raster, x, y) != 0.0;
    }
  }
  return mask;
}

bool is_image_file(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace lungforge
