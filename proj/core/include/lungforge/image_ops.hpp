#pragma once

#include <cstdint>
#include <vector>

#include "lungforge/image.hpp"
#include "lungforge/image_io.hpp"

namespace lungforge {

/// Crop -> resize -> rotate augmentation.
struct AugmentConfig {
  double crop_ratio_min = 0.6;   // side-length ratio of the crop window
  double crop_ratio_max = 1.0;
  double max_rotation_deg = 15.0;
  int output_width = 224;
  int output_height = 224;

  /// Configuration that returns its input unchanged.
  static AugmentConfig identity(int width, int height) {
    return {1.0, 1.0, 0.0, width, height};
  }
};

/// Bilinear sample with edge clamping; (x, y) in pixel-center coordinates.
double sample_bilinear(PlaneView src, double x, double y);

/// Bilinear resize; pixel centers are aligned (half-pixel convention).
Plane resize_bilinear(PlaneView src, int width, int height);

/// Random crop (side ratio drawn from [crop_ratio_min, crop_ratio_max],
/// uniform position), bilinear resize to the output size and rotation by an
/// angle drawn from [-max_rotation_deg, max_rotation_deg] about the center.
/// Deterministic in (img, seed, config). Output pixels are clamped to [-1, 1].
///
/// Throws ParameterError for ranges outside [0.6, 1.0], rotations beyond 15
/// degrees or a crop window narrower than one pixel.
GrayImage augment(const GrayImage& img, std::uint64_t seed, const AugmentConfig& config);

/// Replaces masked cells by Gauss-Seidel iteration of the 4-neighbour mean
/// until the largest per-sweep change drops below `tolerance`. Unmasked cells
/// are never written. Works on any grid size; `mask` holds one byte per cell.
Plane inpaint_grid(PlaneView grid, const std::vector<std::uint8_t>& mask,
                   double tolerance = 1e-4, int max_sweeps = 100000);

/// Mask-driven text removal: inpaint_grid over an image.
/// Throws DimensionError on a size mismatch and ParameterError when every
/// pixel is masked.
GrayImage inpaint_mask(const GrayImage& img, const Mask& mask);

}  // namespace lungforge
