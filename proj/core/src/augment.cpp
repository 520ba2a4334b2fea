#include <algorithm>
#include <cmath>
#include <numbers>

#include "lungforge/errors.hpp"
#include "lungforge/image_ops.hpp"
#include "lungforge/rng.hpp"

namespace lungforge {

double sample_bilinear(PlaneView src, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(src.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(src.height - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, src.width - 1);
  const int y1 = std::min(y0 + 1, src.height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = src.at(x0, y0) * (1.0 - fx) + src.at(x1, y0) * fx;
  const double bottom = src.at(x0, y1) * (1.0 - fx) + src.at(x1, y1) * fx;
  return top * (1.0 - fy) + bottom * fy;
}

namespace {

Plane crop_resize(PlaneView src, double ox, double oy, double cw, double ch, int out_w, int out_h) {
  Plane out(out_w, out_h);
  const double sx = cw / out_w;
  const double sy = ch / out_h;
  for (int v = 0; v < out_h; ++v) {
    const double y = oy + (v + 0.5) * sy - 0.5;
    for (int u = 0; u < out_w; ++u) {
      out.at(u, v) = sample_bilinear(src, ox + (u + 0.5) * sx - 0.5, y);
    }
  }
  return out;
}

Plane rotate(PlaneView src, double radians) {
  Plane out(src.width, src.height);
  const double cx = (src.width - 1) * 0.5;
  const double cy = (src.height - 1) * 0.5;
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  for (int v = 0; v < src.height; ++v) {
    for (int u = 0; u < src.width; ++u) {
      const double dx = u - cx;
      const double dy = v - cy;
      out.at(u, v) = sample_bilinear(src, cx + c * dx + s * dy, cy - s * dx + c * dy);
    }
  }
  return out;
}

void validate(const AugmentConfig& cfg) {
  if (!(cfg.crop_ratio_min >= 0.6 && cfg.crop_ratio_max <= 1.0 &&
        cfg.crop_ratio_min <= cfg.crop_ratio_max)) {
    throw_parameter("crop ratio range must lie within [0.6, 1.0]");
  }
  if (!(cfg.max_rotation_deg >= 0.0 && cfg.max_rotation_deg <= 15.0)) {
    throw_parameter("rotation limit must lie within [0, 15] degrees");
  }
  if (cfg.output_width < GrayImage::kMinSide || cfg.output_height < GrayImage::kMinSide) {
    throw_parameter("augmentation output must be at least 8x8");
  }
}

}  // namespace

Plane resize_bilinear(PlaneView src, int width, int height) {
  return crop_resize(src, 0.0, 0.0, src.width, src.height, width, height);
}

GrayImage augment(const GrayImage& img, std::uint64_t seed, const AugmentConfig& config) {
  validate(config);
  Rng rng(seed);
  const double ratio = rng.uniform(config.crop_ratio_min, config.crop_ratio_max);
  const double cw = ratio * img.width();
  const double ch = ratio * img.height();
  if (cw < 1.0 || ch < 1.0) throw_parameter("crop window smaller than one pixel");
  const double ox = rng.uniform(0.0, img.width() - cw);
  const double oy = rng.uniform(0.0, img.height() - ch);
  const double degrees = rng.uniform(-config.max_rotation_deg, config.max_rotation_deg);

  Plane out = crop_resize(img.view(), ox, oy, cw, ch, config.output_width, config.output_height);
  if (degrees != 0.0) out = rotate(out.view(), degrees * std::numbers::pi / 180.0);
  return GrayImage::from_clamped(std::move(out));
}

}  // namespace lungforge
