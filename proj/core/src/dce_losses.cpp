#include "lungforge/dce_losses.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "lungforge/errors.hpp"

namespace lungforge {

namespace {

void check_batch(std::span<const PlaneView> a, std::span<const PlaneView> b) {
  if (a.empty()) throw_parameter("loss batch must not be empty");
  if (a.size() != b.size()) throw_dimension("loss batches differ in size");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].width != b[i].width || a[i].height != b[i].height) {
      throw_dimension("loss operands differ in shape");
    }
  }
}

const AdaptiveLossParams& params_for(std::span<const AdaptiveLossParams> params, std::size_t i) {
  return params.size() == 1 ? params[0] : params[i];
}

void check_params(std::span<const AdaptiveLossParams> params, std::size_t batch) {
  if (params.size() != 1 && params.size() != batch) {
    throw_parameter("adaptive loss needs one parameter set or one per image");
  }
  for (const auto& p : params) {
    if (!(p.ts > 0.0)) throw_parameter("transformation strength must be positive");
  }
}

double total_pixels(std::span<const PlaneView> batch) {
  double n = 0.0;
  for (const auto& v : batch) n += static_cast<double>(v.size());
  return n;
}

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Directed neighbour offsets: up, down, left, right.
constexpr int kDx[4] = {0, 0, -1, 1};
constexpr int kDy[4] = {-1, 1, 0, 0};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMatrix> as_eigen(const Matrix& m) {
  return {m.data.data(), static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols)};
}

struct RegionTerms {
  double value;
  Matrix grad;  // w.r.t. FY, empty unless requested
};

// ||FY FY^T - FX FX^T||^2 = ||FY^T FY||^2 - 2 ||FX^T FY||^2 + ||FX^T FX||^2.
RegionTerms region_single(const Matrix& fx, const Matrix& fy, bool with_grad) {
  const auto x = as_eigen(fx);
  const auto y = as_eigen(fy);
  const Eigen::MatrixXd yy = y.transpose() * y;
  const Eigen::MatrixXd xy = x.transpose() * y;
  const Eigen::MatrixXd xx = x.transpose() * x;
  const double n = static_cast<double>(fx.rows);
  const double m = static_cast<double>(fx.cols);
  const double scale = 4.0 * n * n * m * m;
  const double raw = yy.squaredNorm() - 2.0 * xy.squaredNorm() + xx.squaredNorm();
  RegionTerms out{std::max(0.0, raw) / scale, {}};
  if (with_grad) {
    // d/dFY = 4 (FY (FY^T FY) - FX (FX^T FY)) / scale
    out.grad = Matrix(fy.rows, fy.cols);
    Eigen::Map<RowMatrix> g(out.grad.data.data(), static_cast<Eigen::Index>(fy.rows),
                            static_cast<Eigen::Index>(fy.cols));
    g.noalias() = (4.0 / scale) * (y * yy - x * xy);
  }
  return out;
}

}  // namespace

Plane gaussian_weight_map(PlaneView img, double sigma, double width) {
  if (!(width > 0.0)) throw_parameter("Gaussian width must be positive");
  Plane out(img.width, img.height);
  auto dst = out.values();
  const double inv = 1.0 / (2.0 * width * width);
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double d = img.values[i] - sigma;
    dst[i] = std::exp(-d * d * inv);
  }
  return out;
}

BatchLoss adaptive_loss_grad(std::span<const PlaneView> alphas, std::span<const PlaneView> images,
                             std::span<const AdaptiveLossParams> params) {
  check_batch(alphas, images);
  check_params(params, alphas.size());
  const double denom = total_pixels(images);  // B * C * W * H
  BatchLoss out;
  double sum = 0.0;
  for (std::size_t b = 0; b < alphas.size(); ++b) {
    const auto& p = params_for(params, b);
    const Plane target = gaussian_weight_map(images[b], p.sigma, p.theta);
    Plane g(alphas[b].width, alphas[b].height);
    auto gv = g.values();
    const auto tv = target.values();
    for (std::size_t i = 0; i < gv.size(); ++i) {
      const double r = alphas[b].values[i] - p.ts * tv[i];
      sum += r * r;
      gv[i] = r / denom;
    }
    out.grad.push_back(std::move(g));
  }
  out.value = sum / (2.0 * denom);
  return out;
}

double adaptive_loss(std::span<const PlaneView> alphas, std::span<const PlaneView> images,
                     std::span<const AdaptiveLossParams> params) {
  return adaptive_loss_grad(alphas, images, params).value;
}

double local_conflict_loss_exact(std::span<const PlaneView> enhanced,
                                 std::span<const PlaneView> original) {
  check_batch(enhanced, original);
  std::size_t conflicts = 0;
  for (std::size_t b = 0; b < enhanced.size(); ++b) {
    const auto& y = enhanced[b];
    const auto& x = original[b];
    for (int r = 0; r < y.height; ++r) {
      for (int c = 0; c < y.width; ++c) {
        for (int d = 0; d < 4; ++d) {
          const int nc = c + kDx[d];
          const int nr = r + kDy[d];
          if (nc < 0 || nr < 0 || nc >= y.width || nr >= y.height) continue;
          const bool gy = y.at(c, r) > y.at(nc, nr);
          const bool gx = x.at(c, r) > x.at(nc, nr);
          conflicts += gy != gx;
        }
      }
    }
  }
  return static_cast<double>(conflicts) / (4.0 * total_pixels(enhanced));
}

BatchLoss local_conflict_loss_smooth_grad(std::span<const PlaneView> enhanced,
                                          std::span<const PlaneView> original,
                                          double temperature) {
  if (!(temperature > 0.0)) throw_parameter("temperature must be positive");
  check_batch(enhanced, original);
  const double denom = 4.0 * total_pixels(enhanced);
  BatchLoss out;
  double sum = 0.0;
  for (std::size_t b = 0; b < enhanced.size(); ++b) {
    const auto& y = enhanced[b];
    const auto& x = original[b];
    Plane g(y.width, y.height);
    for (int r = 0; r < y.height; ++r) {
      for (int c = 0; c < y.width; ++c) {
        for (int d = 0; d < 4; ++d) {
          const int nc = c + kDx[d];
          const int nr = r + kDy[d];
          if (nc < 0 || nr < 0 || nc >= y.width || nr >= y.height) continue;
          const double py = logistic((y.at(c, r) - y.at(nc, nr)) / temperature);
          const double px = logistic((x.at(c, r) - x.at(nc, nr)) / temperature);
          sum += py + px - 2.0 * py * px;
          const double dpy = (1.0 - 2.0 * px) * py * (1.0 - py) / temperature / denom;
          g.at(c, r) += dpy;
          g.at(nc, nr) -= dpy;
        }
      }
    }
    out.grad.push_back(std::move(g));
  }
  out.value = sum / denom;
  return out;
}

double local_conflict_loss_smooth(std::span<const PlaneView> enhanced,
                                  std::span<const PlaneView> original, double temperature) {
  return local_conflict_loss_smooth_grad(enhanced, original, temperature).value;
}

Matrix square_flatten(PlaneView img, int kernel_size) {
  const int k = kernel_size;
  if (k < 1 || img.width % k != 0 || img.height % k != 0) {
    throw_dimension("kernel size " + std::to_string(k) + " does not divide " +
                    std::to_string(img.width) + "x" + std::to_string(img.height));
  }
  const int tiles_x = img.width / k;
  const int tiles_y = img.height / k;
  Matrix out(static_cast<std::size_t>(tiles_x) * tiles_y, static_cast<std::size_t>(k) * k);
  for (int ty = 0; ty < tiles_y; ++ty) {
    for (int tx = 0; tx < tiles_x; ++tx) {
      const std::size_t row = static_cast<std::size_t>(ty) * tiles_x + tx;
      for (int dy = 0; dy < k; ++dy) {
        for (int dx = 0; dx < k; ++dx) {
          out(row, static_cast<std::size_t>(dy) * k + dx) = img.at(tx * k + dx, ty * k + dy);
        }
      }
    }
  }
  return out;
}

Plane square_unflatten(const Matrix& tiles, int width, int height, int kernel_size) {
  const int k = kernel_size;
  if (k < 1 || width % k != 0 || height % k != 0 ||
      tiles.rows != static_cast<std::size_t>(width / k) * (height / k) ||
      tiles.cols != static_cast<std::size_t>(k) * k) {
    throw_dimension("tile matrix does not match the requested image shape");
  }
  const int tiles_x = width / k;
  Plane out(width, height);
  for (std::size_t row = 0; row < tiles.rows; ++row) {
    const int tx = static_cast<int>(row % tiles_x);
    const int ty = static_cast<int>(row / tiles_x);
    for (int dy = 0; dy < k; ++dy) {
      for (int dx = 0; dx < k; ++dx) {
        out.at(tx * k + dx, ty * k + dy) = tiles(row, static_cast<std::size_t>(dy) * k + dx);
      }
    }
  }
  return out;
}

Matrix gram(const Matrix& m) {
  if (m.rows == 0 || m.cols == 0) throw_parameter("gram of an empty matrix");
  Matrix out(m.rows, m.rows);
  Eigen::Map<RowMatrix> g(out.data.data(), static_cast<Eigen::Index>(m.rows),
                          static_cast<Eigen::Index>(m.rows));
  const auto a = as_eigen(m);
  g.noalias() = a * a.transpose();
  return out;
}

BatchLoss region_conflict_loss_grad(std::span<const PlaneView> original,
                                    std::span<const PlaneView> enhanced, int kernel_size) {
  check_batch(original, enhanced);
  const double batch = static_cast<double>(original.size());
  BatchLoss out;
  for (std::size_t b = 0; b < original.size(); ++b) {
    const Matrix fx = square_flatten(original[b], kernel_size);
    const Matrix fy = square_flatten(enhanced[b], kernel_size);
    RegionTerms t = region_single(fx, fy, true);
    out.value += t.value / batch;
    for (double& v : t.grad.data) v /= batch;
    out.grad.push_back(square_unflatten(t.grad, enhanced[b].width, enhanced[b].height, kernel_size));
  }
  return out;
}

double region_conflict_loss(std::span<const PlaneView> original,
                            std::span<const PlaneView> enhanced, int kernel_size) {
  check_batch(original, enhanced);
  double value = 0.0;
  for (std::size_t b = 0; b < original.size(); ++b) {
    value += region_single(square_flatten(original[b], kernel_size),
                           square_flatten(enhanced[b], kernel_size), false)
                 .value;
  }
  return value / static_cast<double>(original.size());
}

namespace {

void check_weights(const LossWeights& w, double temperature) {
  if (w.adaptive < 0.0 || w.local < 0.0 || w.region < 0.0) {
    throw_parameter("loss weights must be non-negative");
  }
  if (!(temperature > 0.0)) throw_parameter("temperature must be positive");
}

}  // namespace

LossBreakdown dce_total_loss(std::span<const PlaneView> alphas, std::span<const PlaneView> images,
                             std::span<const PlaneView> enhanced,
                             std::span<const AdaptiveLossParams> params, const LossWeights& weights,
                             int kernel_size, double temperature) {
  check_weights(weights, temperature);
  LossBreakdown out;
  out.weights = weights;
  out.adaptive = adaptive_loss(alphas, images, params);
  out.local_conflict = local_conflict_loss_smooth(enhanced, images, temperature);
  out.region_conflict = region_conflict_loss(images, enhanced, kernel_size);
  out.total = weights.adaptive * out.adaptive + weights.local * out.local_conflict +
              weights.region * out.region_conflict;
  return out;
}

DceLossGrad dce_total_loss_grad(std::span<const PlaneView> alphas,
                                std::span<const PlaneView> images,
                                std::span<const AdaptiveLossParams> params,
                                const LossWeights& weights, int kernel_size, double temperature,
                                CurveShift shift) {
  check_weights(weights, temperature);
  check_batch(alphas, images);

  std::vector<Plane> enhanced;
  enhanced.reserve(images.size());
  for (std::size_t b = 0; b < images.size(); ++b) {
    enhanced.push_back(apply_transform(images[b], TransformMatrix(Plane(
                                                      alphas[b].width, alphas[b].height,
                                                      {alphas[b].values.begin(), alphas[b].values.end()})),
                                       shift));
  }
  std::vector<PlaneView> y_views;
  for (const auto& p : enhanced) y_views.push_back(p.view());

  const BatchLoss adapt = adaptive_loss_grad(alphas, images, params);
  const BatchLoss local = local_conflict_loss_smooth_grad(y_views, images, temperature);
  const BatchLoss region = region_conflict_loss_grad(images, y_views, kernel_size);

  DceLossGrad out;
  out.loss.weights = weights;
  out.loss.adaptive = adapt.value;
  out.loss.local_conflict = local.value;
  out.loss.region_conflict = region.value;
  out.loss.total = weights.adaptive * adapt.value + weights.local * local.value +
                   weights.region * region.value;

  for (std::size_t b = 0; b < images.size(); ++b) {
    Plane dy(images[b].width, images[b].height);
    auto dyv = dy.values();
    const auto lv = local.grad[b].values();
    const auto rv = region.grad[b].values();
    for (std::size_t i = 0; i < dyv.size(); ++i) {
      dyv[i] = weights.local * lv[i] + weights.region * rv[i];
    }
    Plane da = apply_transform_backward(images[b], alphas[b], dy.view(), shift);
    auto dav = da.values();
    const auto av = adapt.grad[b].values();
    for (std::size_t i = 0; i < dav.size(); ++i) dav[i] += weights.adaptive * av[i];
    out.grad_alpha.push_back(std::move(da));
  }
  return out;
}

}  // namespace lungforge
