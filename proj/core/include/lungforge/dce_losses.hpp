#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lungforge/enhancement.hpp"
#include "lungforge/image.hpp"

namespace lungforge {

// ---------------------------------------------------------------- K-means

struct KmeansResult {
  std::vector<double> centers;       // ascending
  std::vector<int> assignments;      // index into centers, one per input value
  std::vector<double> inertia;       // within-cluster SSE after each Lloyd update
  int iterations = 0;
};

/// Lloyd's algorithm on scalar values. Centers start at the 10/30/50/70/90th
/// percentiles (generally the (2j+1)/2k quantiles); coinciding seeds fall back
/// to evenly spaced distinct values. Stops when no center moves by 1e-6 or
/// after 100 iterations. An emptied cluster is re-seeded at the value farthest
/// from its center, ties broken by a draw from `seed`.
///
/// Throws DegenerateInputError when fewer than k distinct values exist.
KmeansResult kmeans_1d(std::span<const double> values, int k = 5, std::uint64_t seed = 0);

// ---------------------------------------------------------------- adaptive loss

/// Mean and width of the anatomy Gaussian derived from sorted cluster centers.
struct GaussianParams {
  double sigma = 0.0;          // third center (1-based)
  double theta_literal = 0.0;  // min(second, fourth) as literally written
  double width = 0.0;          // max(1e-3, |theta_literal - sigma|)
};

inline constexpr double kGaussianWidthFloor = 1e-3;

/// Requires at least five centers.
GaussianParams resolve_gaussian_params(const KmeansResult& km);

struct AdaptiveLossParams {
  double ts = 1.0;     // transformation strength
  double sigma = 0.0;  // Gaussian mean, pixel units
  double theta = 0.1;  // Gaussian width (standard deviation), pixel units

  static AdaptiveLossParams from_image(PlaneView img, double ts, std::uint64_t seed = 0);
};

/// exp(-(x - sigma)^2 / (2 width^2)) per pixel. Throws ParameterError for width <= 0.
Plane gaussian_weight_map(PlaneView img, double sigma, double width);

/// Loss value together with its gradient, one plane per batch member.
struct BatchLoss {
  double value = 0.0;
  std::vector<Plane> grad;
};

/// ||A - TS * G(X)||^2 / (2 B C W H). `params` holds one entry per image or a
/// single entry shared by the batch.
double adaptive_loss(std::span<const PlaneView> alphas, std::span<const PlaneView> images,
                     std::span<const AdaptiveLossParams> params);
BatchLoss adaptive_loss_grad(std::span<const PlaneView> alphas, std::span<const PlaneView> images,
                             std::span<const AdaptiveLossParams> params);

// ---------------------------------------------------------------- local conflict

/// Fraction of directed 4-neighbour pairs whose strict ordering differs
/// between `enhanced` and `original`, normalized by 4 B C W H.
double local_conflict_loss_exact(std::span<const PlaneView> enhanced,
                                 std::span<const PlaneView> original);

/// Differentiable surrogate: indicator(a > b) becomes logistic((a - b) / t)
/// and XOR(p, q) becomes p + q - 2pq. Gradient is taken w.r.t. `enhanced`.
double local_conflict_loss_smooth(std::span<const PlaneView> enhanced,
                                  std::span<const PlaneView> original, double temperature);
BatchLoss local_conflict_loss_smooth_grad(std::span<const PlaneView> enhanced,
                                          std::span<const PlaneView> original,
                                          double temperature);

// ---------------------------------------------------------------- region conflict

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// Non-overlapping k x k tiles in row-major tile order, each flattened
/// row-major into one row. Throws DimensionError when k does not divide both
/// sides (or k < 1).
Matrix square_flatten(PlaneView img, int kernel_size);

/// Inverse of square_flatten.
Plane square_unflatten(const Matrix& tiles, int width, int height, int kernel_size);

/// M * M^T.
Matrix gram(const Matrix& m);

/// Per image ||gram(FX) - gram(FY)||_F^2 / (4 N^2 M^2) with FX, FY the
/// square-flattened images (N rows of length M = k^2), averaged over the
/// batch. Evaluated through the k^2 x k^2 moment matrices, so the N x N gram
/// matrices are never formed.
double region_conflict_loss(std::span<const PlaneView> original,
                            std::span<const PlaneView> enhanced, int kernel_size);
/// Gradient w.r.t. `enhanced`.
BatchLoss region_conflict_loss_grad(std::span<const PlaneView> original,
                                    std::span<const PlaneView> enhanced, int kernel_size);

// ---------------------------------------------------------------- combined

struct LossWeights {
  double adaptive = 1.0;
  double local = 1.0;
  double region = 1.0;
};

struct LossBreakdown {
  double adaptive = 0.0;
  double local_conflict = 0.0;  // smooth surrogate value
  double region_conflict = 0.0;
  double total = 0.0;
  LossWeights weights;
};

/// Weighted sum of the three objectives for given A, X and Y.
/// Throws ParameterError for negative weights or temperature <= 0.
LossBreakdown dce_total_loss(std::span<const PlaneView> alphas, std::span<const PlaneView> images,
                             std::span<const PlaneView> enhanced,
                             std::span<const AdaptiveLossParams> params, const LossWeights& weights,
                             int kernel_size, double temperature);

struct DceLossGrad {
  LossBreakdown loss;
  std::vector<Plane> grad_alpha;  // dL/dA per image
};

/// dce_total_loss with Y = apply_transform(X, A, shift), differentiated
/// w.r.t. A through the curve.
DceLossGrad dce_total_loss_grad(std::span<const PlaneView> alphas,
                                std::span<const PlaneView> images,
                                std::span<const AdaptiveLossParams> params,
                                const LossWeights& weights, int kernel_size, double temperature,
                                CurveShift shift = {});

}  // namespace lungforge
