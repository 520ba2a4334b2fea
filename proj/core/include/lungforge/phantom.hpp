#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lungforge/image.hpp"

namespace lungforge {

/// Acquisition-style distortions applied on top of the clean phantom.
struct DomainConfig {
  std::string name = "A";
  double brightness_offset = 0.0;
  double contrast_gain = 1.0;
  double noise_sigma = 0.02;         // additive Gaussian noise
  double text_probability = 0.0;     // chance of a burned-in corner label
  double text_intensity = 0.95;
  double artifact_probability = 0.0; // chance of tube/electrode strokes
  double artifact_intensity = 0.9;
  double background_intensity = -0.9;
  double body_intensity = 0.2;
  double lung_intensity = -0.45;
  double lesion_contrast = 0.5;

  /// Throws ParameterError for probabilities outside [0, 1], a non-positive
  /// gain, negative noise or non-finite values.
  void validate() const;

  /// Stock presets: "A" clean, "B" bright with corner text, "C" noisy with
  /// artifacts. Throws ParameterError for other names.
  static DomainConfig preset(const std::string& name);
};

/// Inclusive pixel rectangle.
struct Box {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;
  [[nodiscard]] bool contains(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
  friend bool operator==(const Box&, const Box&) = default;
};

/// Axis-aligned ellipse in pixel coordinates.
struct Ellipse {
  double cx = 0.0;
  double cy = 0.0;
  double rx = 1.0;
  double ry = 1.0;
  [[nodiscard]] bool contains(double x, double y) const {
    const double u = (x - cx) / rx;
    const double v = (y - cy) / ry;
    return u * u + v * v <= 1.0;
  }
};

struct PhantomSample {
  GrayImage image;
  int label = 0;
  std::optional<Box> lesion_box;  // present iff label == 1
  double lesion_cx = 0.0;         // lesion centroid (meaningful when label == 1)
  double lesion_cy = 0.0;
  Ellipse lungs[2];
  std::string domain;
  std::uint64_t seed = 0;
};

inline constexpr int kPhantomSize = 224;

/// Deterministic synthetic chest: dark background, body ellipse, two darker
/// lung fields, spine and rib bands, an optional bright lesion inside one
/// lung, then the domain distortions. 224 x 224 pixels.
PhantomSample generate_phantom(std::uint64_t seed, const DomainConfig& domain, int label);

/// `n` samples; the first round(n * positive_fraction) positions (after a
/// seeded shuffle) are positive. Sample i uses derive_seed(seed, i).
std::vector<PhantomSample> generate_corpus(int n, std::uint64_t seed, const DomainConfig& domain,
                                           double positive_fraction);

/// File name of sample i inside a written corpus.
std::string phantom_file_name(std::size_t index);

/// Writes PNGs plus manifest.csv (file,label,x_min,y_min,x_max,y_max,domain).
void write_corpus(const std::filesystem::path& dir, const std::vector<PhantomSample>& samples);

struct ManifestRow {
  std::string file;
  int label = 0;
  std::optional<Box> box;
  std::string domain;
};

/// Reads a manifest written by write_corpus. Throws IoError or FormatError.
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

}  // namespace lungforge
