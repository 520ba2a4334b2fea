#pragma once

#include <cstddef>
#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

namespace lungforge {

/// Read-only row-major view of a 2-D grid of doubles. No value-range
/// invariants: used for images, α maps, gradients and intermediate results.
struct PlaneView {
  int width = 0;
  int height = 0;
  std::span<const double> values;

  [[nodiscard]] double at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(x)];
  }
  [[nodiscard]] std::size_t size() const { return values.size(); }
};

/// Owning row-major 2-D grid of doubles.
class Plane {
 public:
  Plane() = default;
  Plane(int width, int height, double fill = 0.0);
  Plane(int width, int height, std::vector<double> values);

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }

  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::span<double> values() { return values_; }
  [[nodiscard]] std::vector<double> release() && { return std::move(values_); }

  [[nodiscard]] double at(int x, int y) const { return values_[index(x, y)]; }
  double& at(int x, int y) { return values_[index(x, y)]; }

  [[nodiscard]] PlaneView view() const { return {width_, height_, values_}; }

 private:
  [[nodiscard]] std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

/// Single-channel image with pixels in [-1, 1] and at least 8x8 pixels.
class GrayImage {
 public:
  static constexpr int kMinSide = 8;

  GrayImage() = default;
  /// Throws DimensionError for sides below kMinSide or a size mismatch and
  /// ParameterError for pixels outside [-1, 1] or non-finite.
  GrayImage(int width, int height, std::vector<double> pixels);
  explicit GrayImage(Plane plane);

  static GrayImage filled(int width, int height, double value);
  /// Clamps every value into [-1, 1] (NaN becomes -1) before validating size.
  static GrayImage from_clamped(Plane plane);

  [[nodiscard]] int width() const { return plane_.width(); }
  [[nodiscard]] int height() const { return plane_.height(); }
  [[nodiscard]] std::size_t size() const { return plane_.size(); }
  [[nodiscard]] bool empty() const { return plane_.size() == 0; }
  [[nodiscard]] std::span<const double> pixels() const { return plane_.values(); }
  [[nodiscard]] double at(int x, int y) const { return plane_.at(x, y); }
  [[nodiscard]] const Plane& plane() const { return plane_; }
  [[nodiscard]] PlaneView view() const { return plane_.view(); }

  friend bool operator==(const GrayImage& a, const GrayImage& b) {
    return a.width() == b.width() && a.height() == b.height() &&
           std::equal(a.pixels().begin(), a.pixels().end(), b.pixels().begin());
  }

 private:
  Plane plane_;
};

/// Images of identical size, one channel each.
class ImageBatch {
 public:
  explicit ImageBatch(std::vector<GrayImage> images);

  [[nodiscard]] std::size_t count() const { return images_.size(); }
  [[nodiscard]] int channels() const { return 1; }
  [[nodiscard]] int width() const { return images_.front().width(); }
  [[nodiscard]] int height() const { return images_.front().height(); }
  [[nodiscard]] const GrayImage& operator[](std::size_t i) const { return images_[i]; }
  [[nodiscard]] const std::vector<GrayImage>& images() const { return images_; }
  [[nodiscard]] std::vector<PlaneView> views() const;

 private:
  std::vector<GrayImage> images_;
};

struct Histogram {
  std::vector<double> edges;            // bin_count + 1 uniform edges over [-1, 1]
  std::vector<std::uint64_t> counts;

  [[nodiscard]] int bin_count() const { return static_cast<int>(counts.size()); }
  [[nodiscard]] std::uint64_t total() const;
};

/// Uniform bins over [-1, 1]; the value 1 falls in the last bin.
Histogram histogram(PlaneView img, int bins);

/// Shannon entropy in nats of the normalized bin frequencies.
double histogram_entropy(const Histogram& h);

}  // namespace lungforge
