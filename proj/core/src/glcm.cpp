#include <algorithm>
#include <cmath>

#include "lungforge/domain_gap.hpp"
#include "lungforge/errors.hpp"

namespace lungforge {

namespace {

constexpr double kDegenerateVariance = 1e-15;

std::pair<int, int> offset(GlcmDirection dir, int d) {
  switch (dir) {
    case GlcmDirection::Deg0: return {d, 0};
    case GlcmDirection::Deg45: return {d, -d};
    case GlcmDirection::Deg90: return {0, -d};
    case GlcmDirection::Deg135: return {-d, -d};
  }
  throw_parameter("unknown GLCM direction");
}

}  // namespace

int quantize_level(double value, int levels) {
  const double t = (std::clamp(value, -1.0, 1.0) + 1.0) * 0.5 * levels;
  return std::min(levels - 1, static_cast<int>(std::floor(t)));
}

Glcm glcm(PlaneView img, int levels, GlcmDirection direction, int distance) {
  if (levels < 2) throw_parameter("GLCM needs at least two levels");
  if (distance < 1) throw_parameter("GLCM distance must be at least 1");
  const auto [dx, dy] = offset(direction, distance);
  if (std::abs(dx) >= img.width || std::abs(dy) >= img.height) {
    throw_dimension("GLCM offset does not fit inside the image");
  }
  std::vector<int> q(img.values.size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = quantize_level(img.values[i], levels);

  const auto l = static_cast<std::size_t>(levels);
  std::vector<double> counts(l * l, 0.0);
  double total = 0.0;
  for (int y = 0; y < img.height; ++y) {
    const int y2 = y + dy;
    if (y2 < 0 || y2 >= img.height) continue;
    for (int x = 0; x < img.width; ++x) {
      const int x2 = x + dx;
      if (x2 < 0 || x2 >= img.width) continue;
      const auto a = static_cast<std::size_t>(q[static_cast<std::size_t>(y) * img.width + x]);
      const auto b = static_cast<std::size_t>(q[static_cast<std::size_t>(y2) * img.width + x2]);
      counts[a * l + b] += 1.0;
      counts[b * l + a] += 1.0;
      total += 2.0;
    }
  }
  for (double& c : counts) c /= total;
  return {levels, std::move(counts)};
}

GlcmFeatures glcm_features(const Glcm& m) {
  GlcmFeatures f;
  double mu = 0.0;
  for (int i = 0; i < m.levels; ++i) {
    for (int j = 0; j < m.levels; ++j) {
      const double p = m.at(i, j);
      const double diff = i - j;
      f.asm_ += p * p;
      f.homogeneity += p / (1.0 + std::abs(diff));
      f.contrast += p * diff * diff;
      mu += i * p;
    }
  }
  // The matrix is symmetric, so both marginals share mean and variance.
  double var = 0.0;
  double cov = 0.0;
  for (int i = 0; i < m.levels; ++i) {
    for (int j = 0; j < m.levels; ++j) {
      const double p = m.at(i, j);
      var += (i - mu) * (i - mu) * p;
      cov += (i - mu) * (j - mu) * p;
    }
  }
  if (var < kDegenerateVariance) {
    f.correlation = 0.0;
    f.correlation_defined = false;
  } else {
    f.correlation = std::clamp(cov / var, -1.0, 1.0);
  }
  return f;
}

const std::array<std::string, kDomainFeatureCount>& DomainFeatureVector::names() {
  static const auto names = [] {
    std::array<std::string, kDomainFeatureCount> n;
    n[0] = "mean";
    n[1] = "std";
    const char* angles[] = {"0", "45", "90", "135"};
    for (std::size_t d = 0; d < 4; ++d) {
      n[2 + 4 * d] = std::string("asm_") + angles[d];
      n[3 + 4 * d] = std::string("homog_") + angles[d];
      n[4 + 4 * d] = std::string("contrast_") + angles[d];
      n[5 + 4 * d] = std::string("corr_") + angles[d];
    }
    return n;
  }();
  return names;
}

DomainFeatureVector feature_vector(PlaneView img, int levels, int distance) {
  if (img.values.empty()) throw_dimension("feature vector of an empty image");
  DomainFeatureVector v;
  double mean = 0.0;
  for (double x : img.values) mean += x;
  mean /= static_cast<double>(img.values.size());
  double var = 0.0;
  for (double x : img.values) var += (x - mean) * (x - mean);
  v.values[0] = mean;
  v.values[1] = std::sqrt(var / static_cast<double>(img.values.size()));
  for (std::size_t d = 0; d < 4; ++d) {
    const auto f = glcm_features(glcm(img, levels, kGlcmDirections[d], distance));
    v.values[2 + 4 * d] = f.asm_;
    v.values[3 + 4 * d] = f.homogeneity;
    v.values[4 + 4 * d] = f.contrast;
    v.values[5 + 4 * d] = f.correlation;
    v.correlation_degenerate[d] = !f.correlation_defined;
  }
  return v;
}

}  // namespace lungforge
