#pragma once

// Independent reference implementations and numeric helpers shared by the
// unit and acceptance tests. Everything here is written from the textbook
// definitions, without reusing library internals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "lungforge/dce_losses.hpp"
#include "lungforge/encoder.hpp"
#include "lungforge/image.hpp"
#include "lungforge/rng.hpp"
#include "lungforge/unet.hpp"

namespace lungforge::testing {

inline Plane random_plane(int w, int h, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Plane p(w, h);
  for (double& v : p.values()) v = rng.uniform(lo, hi);
  return p;
}

inline GrayImage random_image(int w, int h, std::uint64_t seed) {
  return GrayImage(random_plane(w, h, seed, -0.95, 0.95));
}

/// Central difference (f(x+h) - f(x-h)) / 2h of `f` w.r.t. `x[i]`.
inline double central_difference(const std::function<double()>& f, double& x, double h) {
  const double keep = x;
  x = keep + h;
  const double up = f();
  x = keep - h;
  const double down = f();
  x = keep;
  return (up - down) / (2.0 * h);
}

/// Relative error with a small absolute floor so that exactly-zero
/// components compare on an absolute scale.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Pairwise-count AUC: P(score_pos > score_neg) + 0.5 P(equal).
inline double brute_force_auc(std::span<const double> s, std::span<const int> y) {
  double num = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return num / pairs;
}

/// Brute-force symmetric normalized GLCM from already-quantized levels.
inline std::vector<double> brute_force_glcm(const std::vector<int>& q, int w, int h, int levels, int dx,
                                            int dy) {
  std::vector<double> m(static_cast<std::size_t>(levels * levels), 0.0);
  double total = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int x2 = x + dx;
      const int y2 = y + dy;
      if (x2 < 0 || x2 >= w || y2 < 0 || y2 >= h) continue;
      const int a = q[static_cast<std::size_t>(y * w + x)];
      const int b = q[static_cast<std::size_t>(y2 * w + x2)];
      m[static_cast<std::size_t>(a * levels + b)] += 1.0;
      m[static_cast<std::size_t>(b * levels + a)] += 1.0;
      total += 2.0;
    }
  }
  for (double& v : m) v /= total;
  return m;
}

/// Biased (V-statistic) squared MMD with a Gaussian kernel, by definition.
inline double brute_force_mmd(const std::vector<std::vector<double>>& a,
                              const std::vector<std::vector<double>>& b, double bw) {
  const auto k = [bw](const std::vector<double>& u, const std::vector<double>& v) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) d2 += (u[i] - v[i]) * (u[i] - v[i]);
    return std::exp(-d2 / (2.0 * bw * bw));
  };
  const auto mean_k = [&](const auto& p, const auto& q) {
    double s = 0.0;
    for (const auto& u : p) {
      for (const auto& v : q) s += k(u, v);
    }
    return s / static_cast<double>(p.size() * q.size());
  };
  return mean_k(a, a) + mean_k(b, b) - 2.0 * mean_k(a, b);
}

/// Activation pattern of a U-Net forward pass: leaky-ReLU signs and pooling
/// winners. Finite differences are only meaningful when the pattern does not
/// change between the two probe points.
inline std::vector<std::uint64_t> unet_pattern(const DceModel& model, PlaneView img) {
  UNetCache cache;
  forward(model, img, &cache);
  std::vector<std::uint64_t> out;
  for (const auto& rec : cache.convs) {
    for (double v : rec.pre.data) out.push_back(v > 0.0 ? 1 : 0);
  }
  for (const auto& p : cache.pool_argmax) out.insert(out.end(), p.begin(), p.end());
  return out;
}

/// Same as unet_pattern for the contrastive encoder.
inline std::vector<std::uint64_t> encoder_pattern(const Encoder& enc, PlaneView img) {
  EncoderCache cache;
  encode(enc, img, &cache);
  std::vector<std::uint64_t> out;
  for (const auto& rec : cache.convs) {
    for (double v : rec.pre.data) out.push_back(v > 0.0 ? 1 : 0);
  }
  for (const auto& p : cache.pool_argmax) out.insert(out.end(), p.begin(), p.end());
  return out;
}

/// Full DCE objective as a function of the U-Net parameters: alpha map from
/// the network, enhanced image through the curve, then the weighted losses.
inline double composite_loss(const DceModel& model, PlaneView img, const AdaptiveLossParams& prm,
                             const LossWeights& w, int kernel, double temperature) {
  const auto a = forward(model, img);
  const auto y = apply_transform(img, a);
  const PlaneView av = a.view();
  const PlaneView yv = y.view();
  return dce_total_loss({&av, 1}, {&img, 1}, {&yv, 1}, {&prm, 1}, w, kernel, temperature).total;
}

/// Analytic gradient of composite_loss: loss gradient w.r.t. alpha pulled
/// back through the network.
inline ModelParams composite_grad(const DceModel& model, PlaneView img, const AdaptiveLossParams& prm,
                                  const LossWeights& w, int kernel, double temperature) {
  UNetCache cache;
  const auto a = forward(model, img, &cache);
  const PlaneView av = a.view();
  const auto g = dce_total_loss_grad({&av, 1}, {&img, 1}, {&prm, 1}, w, kernel, temperature);
  return backward(model, cache, g.grad_alpha[0].view());
}

}  // namespace lungforge::testing
