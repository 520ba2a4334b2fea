#include "lungforge/enhancement.hpp"

#include <cmath>

#include "lungforge/errors.hpp"

namespace lungforge {

namespace {

void validate_alphas(const Plane& p) {
  for (double a : p.values()) {
    if (!(a > 0.0) || !std::isfinite(a)) throw_parameter("transform alpha must be positive and finite");
  }
}

void check_same_shape(PlaneView a, PlaneView b) {
  if (a.width != b.width || a.height != b.height) throw_dimension("image and transform shapes differ");
}

}  // namespace

TransformMatrix::TransformMatrix(int width, int height, std::vector<double> alphas)
    : alphas_(width, height, std::move(alphas)) {
  validate_alphas(alphas_);
}

TransformMatrix::TransformMatrix(Plane alphas) : alphas_(std::move(alphas)) {
  validate_alphas(alphas_);
}

TransformMatrix TransformMatrix::constant(int width, int height, double alpha) {
  return TransformMatrix(Plane(width, height, alpha));
}

double le_curve(double x, double alpha, CurveShift shift) {
  if (!(alpha > 0.0)) throw_parameter("le_curve alpha must be positive");
  return shift.y_shift + std::tanh(alpha * (x + shift.x_shift));
}

double le_curve_dalpha(double x, double alpha, CurveShift shift) {
  const double u = x + shift.x_shift;
  const double t = std::tanh(alpha * u);
  return u * (1.0 - t * t);
}

Plane apply_transform(PlaneView img, const TransformMatrix& a, CurveShift shift) {
  check_same_shape(img, a.view());
  Plane out(img.width, img.height);
  auto dst = out.values();
  const auto alphas = a.alphas();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = shift.y_shift + std::tanh(alphas[i] * (img.values[i] + shift.x_shift));
  }
  return out;
}

GrayImage enhance(const GrayImage& img, const TransformMatrix& a, CurveShift shift) {
  return GrayImage::from_clamped(apply_transform(img.view(), a, shift));
}

Plane apply_transform_backward(PlaneView img, PlaneView alphas, PlaneView grad_output,
                               CurveShift shift) {
  check_same_shape(img, alphas);
  check_same_shape(img, grad_output);
  Plane out(img.width, img.height);
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = grad_output.values[i] * le_curve_dalpha(img.values[i], alphas.values[i], shift);
  }
  return out;
}

}  // namespace lungforge
