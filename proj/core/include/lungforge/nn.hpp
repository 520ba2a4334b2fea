#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lungforge::nn {

/// Channel-major activation volume (C x H x W, row-major per channel).
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {}

  [[nodiscard]] std::size_t plane_size() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  [[nodiscard]] std::span<double> channel(int c) {
    return {data.data() + static_cast<std::size_t>(c) * plane_size(), plane_size()};
  }
  [[nodiscard]] std::span<const double> channel(int c) const {
    return {data.data() + static_cast<std::size_t>(c) * plane_size(), plane_size()};
  }
};

/// Stride-1 "same" convolution with a square odd kernel (zero padding).
/// weight: [out, in, k, k]; bias: [out].
FeatureMap conv2d(const FeatureMap& in, std::span<const double> weight,
                  std::span<const double> bias, int out_channels, int kernel);

/// Accumulates dL/dweight and dL/dbias; writes dL/din when `grad_in` is set.
void conv2d_backward(const FeatureMap& in, std::span<const double> weight, int out_channels,
                     int kernel, const FeatureMap& grad_out, FeatureMap* grad_in,
                     std::span<double> grad_weight, std::span<double> grad_bias);

FeatureMap leaky_relu(const FeatureMap& pre, double slope);
/// dL/dpre from dL/dout, evaluated at the pre-activation.
FeatureMap leaky_relu_backward(const FeatureMap& pre, const FeatureMap& grad_out, double slope);

/// 2x2 max pooling with stride 2 (sides must be even). `argmax` receives the
/// flat input index of each output's maximum.
FeatureMap max_pool2(const FeatureMap& in, std::vector<std::size_t>& argmax);
FeatureMap max_pool2_backward(const FeatureMap& in_shape, const std::vector<std::size_t>& argmax,
                              const FeatureMap& grad_out);

/// Nearest-neighbour 2x upsampling.
FeatureMap upsample2(const FeatureMap& in);
FeatureMap upsample2_backward(const FeatureMap& grad_out);

/// Stacks channels of a then b.
FeatureMap concat_channels(const FeatureMap& a, const FeatureMap& b);
/// Splits a gradient produced by concat_channels back into its two parts.
void split_channels(const FeatureMap& grad, int first_channels, FeatureMap& grad_a,
                    FeatureMap& grad_b);

/// Mean over each channel plane.
std::vector<double> global_average_pool(const FeatureMap& in);
FeatureMap global_average_pool_backward(const FeatureMap& in_shape, std::span<const double> grad);

/// y = W x + b with W: [out, in].
std::vector<double> linear(std::span<const double> x, std::span<const double> weight,
                           std::span<const double> bias, int out);
/// Accumulates weight/bias gradients and returns dL/dx.
std::vector<double> linear_backward(std::span<const double> x, std::span<const double> weight,
                                    int out, std::span<const double> grad_out,
                                    std::span<double> grad_weight, std::span<double> grad_bias);

double softplus(double z);
double logistic(double z);

}  // namespace lungforge::nn
