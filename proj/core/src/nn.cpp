#include "lungforge/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <vector>

#include "lungforge/errors.hpp"

namespace lungforge::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

// Per-thread scratch storage reused across calls; slot 0 holds im2col
// columns, slot 1 their gradient.
double* scratch(int slot, std::size_t n) {
  thread_local std::vector<double> buffers[2];
  auto& b = buffers[slot];
  if (b.size() < n) b.resize(n);
  return b.data();
}

// Column matrix of shape (C*k*k) x (H*W); row index = c*k*k + ky*k + kx.
MutMap im2col(const FeatureMap& in, int k) {
  const int pad = k / 2;
  const int h = in.height;
  const int w = in.width;
  const Eigen::Index rows = static_cast<Eigen::Index>(in.channels) * k * k;
  const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;
  MutMap cols(scratch(0, static_cast<std::size_t>(rows * hw)), rows, hw);
  for (int c = 0; c < in.channels; ++c) {
    const auto src = in.channel(c);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* dst = cols.row((static_cast<Eigen::Index>(c) * k + ky) * k + kx).data();
        const int dy = ky - pad;
        const int dx = kx - pad;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          double* row = dst + static_cast<std::size_t>(y) * w;
          if (sy < 0 || sy >= h) {
            std::fill(row, row + w, 0.0);
            continue;
          }
          const double* srow = src.data() + static_cast<std::size_t>(sy) * w;
          const int x_begin = std::max(0, -dx);
          const int x_end = std::min(w, w - dx);
          std::fill(row, row + x_begin, 0.0);
          std::copy(srow + x_begin + dx, srow + x_end + dx, row + x_begin);
          std::fill(row + x_end, row + w, 0.0);
        }
      }
    }
  }
  return cols;
}

void col2im_add(const MutMap& cols, int k, FeatureMap& out) {
  const int pad = k / 2;
  const int h = out.height;
  const int w = out.width;
  for (int c = 0; c < out.channels; ++c) {
    auto dst = out.channel(c);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* src = cols.row((static_cast<Eigen::Index>(c) * k + ky) * k + kx).data();
        const int dy = ky - pad;
        const int dx = kx - pad;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          const double* row = src + static_cast<std::size_t>(y) * w;
          double* drow = dst.data() + static_cast<std::size_t>(sy) * w;
          const int x_begin = std::max(0, -dx);
          const int x_end = std::min(w, w - dx);
          for (int x = x_begin; x < x_end; ++x) drow[x + dx] += row[x];
        }
      }
    }
  }
}

void check_conv(const FeatureMap& in, std::size_t weight_size, int out_channels, int kernel) {
  if (kernel < 1 || kernel % 2 == 0) throw_parameter("convolution kernel must be odd");
  const std::size_t expected =
      static_cast<std::size_t>(out_channels) * in.channels * kernel * kernel;
  if (weight_size != expected) throw_dimension("convolution weight does not match input channels");
}

}  // namespace

FeatureMap conv2d(const FeatureMap& in, std::span<const double> weight,
                  std::span<const double> bias, int out_channels, int kernel) {
  check_conv(in, weight.size(), out_channels, kernel);
  FeatureMap out(out_channels, in.height, in.width);
  const Eigen::Index hw = static_cast<Eigen::Index>(in.plane_size());
  const Eigen::Index depth = static_cast<Eigen::Index>(in.channels) * kernel * kernel;
  ConstMap wmat(weight.data(), out_channels, depth);
  MutMap omat(out.data.data(), out_channels, hw);
  if (kernel == 1) {
    omat.noalias() = wmat * ConstMap(in.data.data(), in.channels, hw);
  } else {
    omat.noalias() = wmat * im2col(in, kernel);
  }
  for (int o = 0; o < out_channels; ++o) omat.row(o).array() += bias[o];
  return out;
}

void conv2d_backward(const FeatureMap& in, std::span<const double> weight, int out_channels,
                     int kernel, const FeatureMap& grad_out, FeatureMap* grad_in,
                     std::span<double> grad_weight, std::span<double> grad_bias) {
  check_conv(in, weight.size(), out_channels, kernel);
  const Eigen::Index hw = static_cast<Eigen::Index>(in.plane_size());
  const Eigen::Index depth = static_cast<Eigen::Index>(in.channels) * kernel * kernel;
  ConstMap gout(grad_out.data.data(), out_channels, hw);
  ConstMap wmat(weight.data(), out_channels, depth);
  MutMap gw(grad_weight.data(), out_channels, depth);
  // Plain loop: Eigen's vectorized sum depends on the buffer alignment.
  for (int o = 0; o < out_channels; ++o) {
    const double* row = grad_out.data.data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(hw);
    double s = 0.0;
    for (Eigen::Index i = 0; i < hw; ++i) s += row[i];
    grad_bias[o] += s;
  }

  if (kernel == 1) {
    ConstMap cols(in.data.data(), in.channels, hw);
    gw.noalias() += gout * cols.transpose();
    if (grad_in != nullptr) {
      *grad_in = FeatureMap(in.channels, in.height, in.width);
      MutMap(grad_in->data.data(), in.channels, hw).noalias() = wmat.transpose() * gout;
    }
    return;
  }
  const MutMap cols = im2col(in, kernel);
  gw.noalias() += gout * cols.transpose();
  if (grad_in != nullptr) {
    MutMap gcols(scratch(1, static_cast<std::size_t>(depth * hw)), depth, hw);
    gcols.noalias() = wmat.transpose() * gout;
    *grad_in = FeatureMap(in.channels, in.height, in.width);
    col2im_add(gcols, kernel, *grad_in);
  }
}

FeatureMap leaky_relu(const FeatureMap& pre, double slope) {
  FeatureMap out = pre;
  for (double& v : out.data) v = v > 0.0 ? v : slope * v;
  return out;
}

FeatureMap leaky_relu_backward(const FeatureMap& pre, const FeatureMap& grad_out, double slope) {
  FeatureMap g = grad_out;
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    if (!(pre.data[i] > 0.0)) g.data[i] *= slope;
  }
  return g;
}

FeatureMap max_pool2(const FeatureMap& in, std::vector<std::size_t>& argmax) {
  if (in.height % 2 != 0 || in.width % 2 != 0) throw_dimension("max pooling needs even sides");
  FeatureMap out(in.channels, in.height / 2, in.width / 2);
  argmax.assign(out.data.size(), 0);
  std::size_t o = 0;
  for (int c = 0; c < in.channels; ++c) {
    const std::size_t base = static_cast<std::size_t>(c) * in.plane_size();
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x, ++o) {
        std::size_t best = base + static_cast<std::size_t>(2 * y) * in.width + 2 * x;
        const std::size_t candidates[3] = {best + 1, best + in.width, best + in.width + 1};
        for (auto idx : candidates) {
          if (in.data[idx] > in.data[best]) best = idx;
        }
        out.data[o] = in.data[best];
        argmax[o] = best;
      }
    }
  }
  return out;
}

FeatureMap max_pool2_backward(const FeatureMap& in_shape, const std::vector<std::size_t>& argmax,
                              const FeatureMap& grad_out) {
  FeatureMap g(in_shape.channels, in_shape.height, in_shape.width);
  for (std::size_t o = 0; o < argmax.size(); ++o) g.data[argmax[o]] += grad_out.data[o];
  return g;
}

FeatureMap upsample2(const FeatureMap& in) {
  FeatureMap out(in.channels, in.height * 2, in.width * 2);
  for (int c = 0; c < in.channels; ++c) {
    const auto src = in.channel(c);
    auto dst = out.channel(c);
    for (int y = 0; y < out.height; ++y) {
      const double* srow = src.data() + static_cast<std::size_t>(y / 2) * in.width;
      double* drow = dst.data() + static_cast<std::size_t>(y) * out.width;
      for (int x = 0; x < out.width; ++x) drow[x] = srow[x / 2];
    }
  }
  return out;
}

FeatureMap upsample2_backward(const FeatureMap& grad_out) {
  FeatureMap g(grad_out.channels, grad_out.height / 2, grad_out.width / 2);
  for (int c = 0; c < grad_out.channels; ++c) {
    const auto src = grad_out.channel(c);
    auto dst = g.channel(c);
    for (int y = 0; y < grad_out.height; ++y) {
      const double* srow = src.data() + static_cast<std::size_t>(y) * grad_out.width;
      double* drow = dst.data() + static_cast<std::size_t>(y / 2) * g.width;
      for (int x = 0; x < grad_out.width; ++x) drow[x / 2] += srow[x];
    }
  }
  return g;
}

FeatureMap concat_channels(const FeatureMap& a, const FeatureMap& b) {
  if (a.height != b.height || a.width != b.width) throw_dimension("concatenated maps differ in size");
  FeatureMap out(a.channels + b.channels, a.height, a.width);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
  return out;
}

void split_channels(const FeatureMap& grad, int first_channels, FeatureMap& grad_a,
                    FeatureMap& grad_b) {
  grad_a = FeatureMap(first_channels, grad.height, grad.width);
  grad_b = FeatureMap(grad.channels - first_channels, grad.height, grad.width);
  const auto split = grad.data.begin() + static_cast<std::ptrdiff_t>(grad_a.data.size());
  std::copy(grad.data.begin(), split, grad_a.data.begin());
  std::copy(split, grad.data.end(), grad_b.data.begin());
}

std::vector<double> global_average_pool(const FeatureMap& in) {
  std::vector<double> out(static_cast<std::size_t>(in.channels));
  const double n = static_cast<double>(in.plane_size());
  for (int c = 0; c < in.channels; ++c) {
    double s = 0.0;
    for (double v : in.channel(c)) s += v;
    out[c] = s / n;
  }
  return out;
}

FeatureMap global_average_pool_backward(const FeatureMap& in_shape, std::span<const double> grad) {
  FeatureMap g(in_shape.channels, in_shape.height, in_shape.width);
  const double n = static_cast<double>(in_shape.plane_size());
  for (int c = 0; c < in_shape.channels; ++c) {
    auto dst = g.channel(c);
    std::fill(dst.begin(), dst.end(), grad[c] / n);
  }
  return g;
}

std::vector<double> linear(std::span<const double> x, std::span<const double> weight,
                           std::span<const double> bias, int out) {
  const std::size_t in = x.size();
  if (weight.size() != in * static_cast<std::size_t>(out)) throw_dimension("linear weight shape");
  std::vector<double> y(static_cast<std::size_t>(out));
  for (int o = 0; o < out; ++o) {
    double s = bias[o];
    const double* w = weight.data() + static_cast<std::size_t>(o) * in;
    for (std::size_t i = 0; i < in; ++i) s += w[i] * x[i];
    y[o] = s;
  }
  return y;
}

std::vector<double> linear_backward(std::span<const double> x, std::span<const double> weight,
                                    int out, std::span<const double> grad_out,
                                    std::span<double> grad_weight, std::span<double> grad_bias) {
  const std::size_t in = x.size();
  std::vector<double> gx(in, 0.0);
  for (int o = 0; o < out; ++o) {
    const double g = grad_out[o];
    grad_bias[o] += g;
    const double* w = weight.data() + static_cast<std::size_t>(o) * in;
    double* gw = grad_weight.data() + static_cast<std::size_t>(o) * in;
    for (std::size_t i = 0; i < in; ++i) {
      gw[i] += g * x[i];
      gx[i] += g * w[i];
    }
  }
  return gx;
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace lungforge::nn
