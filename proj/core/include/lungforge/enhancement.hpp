#pragma once

#include <vector>

#include "lungforge/image.hpp"

namespace lungforge {

/// Per-pixel curve sensitivities α, one per image pixel, all strictly
/// positive and finite.
class TransformMatrix {
 public:
  TransformMatrix() = default;
  /// Throws DimensionError on a size mismatch, ParameterError for α <= 0 or
  /// non-finite α.
  TransformMatrix(int width, int height, std::vector<double> alphas);
  explicit TransformMatrix(Plane alphas);

  static TransformMatrix constant(int width, int height, double alpha);

  [[nodiscard]] int width() const { return alphas_.width(); }
  [[nodiscard]] int height() const { return alphas_.height(); }
  [[nodiscard]] std::size_t size() const { return alphas_.size(); }
  [[nodiscard]] std::span<const double> alphas() const { return alphas_.values(); }
  [[nodiscard]] double at(int x, int y) const { return alphas_.at(x, y); }
  [[nodiscard]] PlaneView view() const { return alphas_.view(); }
  [[nodiscard]] const Plane& plane() const { return alphas_; }

 private:
  Plane alphas_;
};

/// Horizontal and vertical offsets of the enhancement curve.
struct CurveShift {
  double x_shift = 0.0;
  double y_shift = 0.0;
};

/// y_shift + tanh(alpha * (x + x_shift)). Throws ParameterError for alpha <= 0.
double le_curve(double x, double alpha, CurveShift shift = {});

/// d le_curve / d alpha.
double le_curve_dalpha(double x, double alpha, CurveShift shift = {});

/// Applies le_curve pixel by pixel. The result is returned as a Plane because
/// non-zero shifts may leave [-1, 1]; use enhance() for a validated image.
Plane apply_transform(PlaneView img, const TransformMatrix& a, CurveShift shift = {});

/// apply_transform followed by conversion to a GrayImage (values clamped to
/// [-1, 1], a no-op for zero shifts).
GrayImage enhance(const GrayImage& img, const TransformMatrix& a, CurveShift shift = {});

/// Chain rule through apply_transform: given dL/dY returns dL/dA.
Plane apply_transform_backward(PlaneView img, PlaneView alphas, PlaneView grad_output,
                               CurveShift shift = {});

}  // namespace lungforge
