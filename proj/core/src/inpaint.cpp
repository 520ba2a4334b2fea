#include <algorithm>
#include <cmath>

#include "lungforge/errors.hpp"
#include "lungforge/image_ops.hpp"

namespace lungforge {

Plane inpaint_grid(PlaneView grid, const std::vector<std::uint8_t>& mask, double tolerance,
                   int max_sweeps) {
  if (mask.size() != grid.size()) throw_dimension("mask and grid differ in size");
  Plane out(grid.width, grid.height, std::vector<double>(grid.values.begin(), grid.values.end()));

  double sum = 0.0;
  std::size_t known = 0;
  std::vector<std::size_t> holes;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) {
      holes.push_back(i);
    } else {
      sum += grid.values[i];
      ++known;
    }
  }
  if (holes.empty()) return out;
  if (known == 0) throw_parameter("mask covers the entire image");

  // Start from the mean of the known cells; constant inputs stay constant.
  const double fill = sum / static_cast<double>(known);
  auto values = out.values();
  for (auto i : holes) values[i] = fill;

  const int w = grid.width;
  const int h = grid.height;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (auto i : holes) {
      const int x = static_cast<int>(i % static_cast<std::size_t>(w));
      const int y = static_cast<int>(i / static_cast<std::size_t>(w));
      double acc = 0.0;
      int n = 0;
      if (x > 0) acc += values[i - 1], ++n;
      if (x + 1 < w) acc += values[i + 1], ++n;
      if (y > 0) acc += values[i - w], ++n;
      if (y + 1 < h) acc += values[i + w], ++n;
      if (n == 0) continue;
      const double next = acc / n;
      max_change = std::max(max_change, std::abs(next - values[i]));
      values[i] = next;
    }
    if (max_change < tolerance) break;
  }
  return out;
}

GrayImage inpaint_mask(const GrayImage& img, const Mask& mask) {
  if (mask.width != img.width() || mask.height != img.height()) {
    throw_dimension("mask size differs from image size");
  }
  return GrayImage::from_clamped(inpaint_grid(img.view(), mask.bits));
}

}  // namespace lungforge
