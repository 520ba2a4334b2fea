#include "lungforge/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lungforge/errors.hpp"

namespace lungforge {

Plane::Plane(int width, int height, double fill)
    : width_(width), height_(height) {
  if (width < 0 || height < 0) throw_dimension("negative plane dimensions");
  values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

Plane::Plane(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (width < 0 || height < 0) throw_dimension("negative plane dimensions");
  if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw_dimension("pixel count " + std::to_string(values_.size()) + " does not match " +
                    std::to_string(width) + "x" + std::to_string(height));
  }
}

namespace {

void validate_image(const Plane& p) {
  if (p.width() < GrayImage::kMinSide || p.height() < GrayImage::kMinSide) {
    throw_dimension("image " + std::to_string(p.width()) + "x" + std::to_string(p.height()) +
                    " is smaller than the 8x8 minimum");
  }
  for (double v : p.values()) {
    if (!(v >= -1.0 && v <= 1.0)) throw_parameter("pixel value outside [-1, 1]");
  }
}

}  // namespace

GrayImage::GrayImage(int width, int height, std::vector<double> pixels)
    : plane_(width, height, std::move(pixels)) {
  validate_image(plane_);
}

GrayImage::GrayImage(Plane plane) : plane_(std::move(plane)) { validate_image(plane_); }

GrayImage GrayImage::filled(int width, int height, double value) {
  return GrayImage(Plane(width, height, value));
}

GrayImage GrayImage::from_clamped(Plane plane) {
  for (double& v : plane.values()) {
    v = std::isnan(v) ? -1.0 : std::clamp(v, -1.0, 1.0);
  }
  return GrayImage(std::move(plane));
}

ImageBatch::ImageBatch(std::vector<GrayImage> images) : images_(std::move(images)) {
  if (images_.empty()) throw_parameter("image batch must hold at least one image");
  for (const auto& img : images_) {
    if (img.width() != images_.front().width() || img.height() != images_.front().height()) {
      throw_dimension("batch images differ in size");
    }
  }
}

std::vector<PlaneView> ImageBatch::views() const {
  std::vector<PlaneView> out;
  out.reserve(images_.size());
  for (const auto& img : images_) out.push_back(img.view());
  return out;
}

std::uint64_t Histogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

Histogram histogram(PlaneView img, int bins) {
  if (bins < 2) throw_parameter("histogram needs at least 2 bins");
  Histogram h;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) h.edges[i] = -1.0 + 2.0 * i / bins;
  for (double v : img.values) {
    const double t = (std::clamp(v, -1.0, 1.0) + 1.0) * 0.5 * bins;
    const int b = std::min(bins - 1, static_cast<int>(std::floor(t)));
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

double histogram_entropy(const Histogram& h) {
  const auto total = h.total();
  if (total == 0) throw_parameter("entropy of an empty histogram");
  double entropy = 0.0;
  for (auto c : h.counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    entropy -= p * std::log(p);
  }
  return entropy;
}

}  // namespace lungforge
