#include <algorithm>
#include <cmath>
#include <numeric>

#include "lungforge/dce_losses.hpp"
#include "lungforge/errors.hpp"
#include "lungforge/rng.hpp"

namespace lungforge {

namespace {

constexpr int kMaxIterations = 100;
constexpr double kDriftTolerance = 1e-6;

std::vector<double> seed_centers(std::vector<double> sorted, int k) {
  const std::size_t n = sorted.size();
  std::vector<double> centers(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    const double q = (2.0 * j + 1.0) / (2.0 * k);
    centers[j] = sorted[static_cast<std::size_t>(std::floor(q * static_cast<double>(n - 1)))];
  }
  if (std::adjacent_find(centers.begin(), centers.end()) == centers.end()) return centers;

  // Percentiles coincide on heavily repeated values: spread over distinct ones.
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  const std::size_t m = sorted.size();
  for (int j = 0; j < k; ++j) {
    centers[j] = sorted[(static_cast<std::size_t>(2 * j + 1) * m) / static_cast<std::size_t>(2 * k)];
  }
  return centers;
}

int nearest(const std::vector<double>& centers, double v) {
  int best = 0;
  double best_d = std::abs(v - centers[0]);
  for (int c = 1; c < static_cast<int>(centers.size()); ++c) {
    const double d = std::abs(v - centers[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

double sse(std::span<const double> values, const std::vector<int>& assign,
           const std::vector<double>& centers) {
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - centers[assign[i]];
    s += d * d;
  }
  return s;
}

}  // namespace

KmeansResult kmeans_1d(std::span<const double> values, int k, std::uint64_t seed) {
  if (k < 1) throw_parameter("k-means needs k >= 1");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::size_t distinct = sorted.empty() ? 0 : 1;
  for (std::size_t i = 1; i < sorted.size(); ++i) distinct += sorted[i] != sorted[i - 1];
  if (distinct < static_cast<std::size_t>(k)) {
    throw DegenerateInputError("k-means needs at least " + std::to_string(k) +
                               " distinct values, got " + std::to_string(distinct));
  }

  KmeansResult result;
  std::vector<double> centers = seed_centers(std::move(sorted), k);
  std::vector<int> assign(values.size(), 0);
  Rng rng(seed);

  for (int iter = 0; iter < kMaxIterations; ++iter) {
    for (std::size_t i = 0; i < values.size(); ++i) assign[i] = nearest(centers, values[i]);

    std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
    std::vector<std::size_t> count(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      sum[assign[i]] += values[i];
      ++count[assign[i]];
    }

    std::vector<double> next = centers;
    for (int c = 0; c < k; ++c) {
      if (count[c] > 0) next[c] = sum[c] / static_cast<double>(count[c]);
    }
    for (int c = 0; c < k; ++c) {
      if (count[c] != 0) continue;
      // Re-seed an empty cluster at the worst-fit value.
      double worst = -1.0;
      std::vector<std::size_t> candidates;
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double d = std::abs(values[i] - next[assign[i]]);
        if (d > worst) {
          worst = d;
          candidates.assign(1, i);
        } else if (d == worst) {
          candidates.push_back(i);
        }
      }
      const std::size_t pick = candidates[rng.index(candidates.size())];
      next[c] = values[pick];
      assign[pick] = c;
    }

    double drift = 0.0;
    for (int c = 0; c < k; ++c) drift = std::max(drift, std::abs(next[c] - centers[c]));
    centers = std::move(next);
    result.inertia.push_back(sse(values, assign, centers));
    result.iterations = iter + 1;
    if (drift < kDriftTolerance) break;
  }

  // Final assignment against the converged centers, then sort ascending.
  for (std::size_t i = 0; i < values.size(); ++i) assign[i] = nearest(centers, values[i]);
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return centers[a] < centers[b]; });
  std::vector<int> rank(static_cast<std::size_t>(k));
  result.centers.resize(static_cast<std::size_t>(k));
  for (int r = 0; r < k; ++r) {
    rank[order[r]] = r;
    result.centers[r] = centers[order[r]];
  }
  for (auto& a : assign) a = rank[a];
  result.assignments = std::move(assign);
  return result;
}

GaussianParams resolve_gaussian_params(const KmeansResult& km) {
  if (km.centers.size() < 5) throw_parameter("Gaussian parameters need five cluster centers");
  GaussianParams g;
  g.sigma = km.centers[2];
  g.theta_literal = std::min(km.centers[1], km.centers[3]);
  g.width = std::max(kGaussianWidthFloor, std::abs(g.theta_literal - g.sigma));
  return g;
}

AdaptiveLossParams AdaptiveLossParams::from_image(PlaneView img, double ts, std::uint64_t seed) {
  const auto g = resolve_gaussian_params(kmeans_1d(img.values, 5, seed));
  return {ts, g.sigma, g.width};
}

}  // namespace lungforge
