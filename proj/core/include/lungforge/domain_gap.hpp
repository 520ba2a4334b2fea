#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lungforge/image.hpp"

namespace lungforge {

// ---------------------------------------------------------------- GLCM

/// Pixel offsets with y pointing down: 0° = (d, 0), 45° = (d, -d),
/// 90° = (0, -d), 135° = (-d, -d).
enum class GlcmDirection { Deg0 = 0, Deg45 = 1, Deg90 = 2, Deg135 = 3 };

inline constexpr std::array<GlcmDirection, 4> kGlcmDirections{
    GlcmDirection::Deg0, GlcmDirection::Deg45, GlcmDirection::Deg90, GlcmDirection::Deg135};

/// Normalized, symmetric co-occurrence matrix (levels x levels, row-major).
struct Glcm {
  int levels = 0;
  std::vector<double> p;
  [[nodiscard]] double at(int i, int j) const {
    return p[static_cast<std::size_t>(i) * static_cast<std::size_t>(levels) + static_cast<std::size_t>(j)];
  }
};

/// Uniform quantization of [-1, 1] into `levels` bins (1 falls in the last).
int quantize_level(double value, int levels);

/// Counts both orderings of every in-bounds pixel pair at the offset and
/// normalizes to sum 1. Throws ParameterError for levels < 2 or distance < 1
/// and DimensionError when the offset does not fit inside the image.
Glcm glcm(PlaneView img, int levels, GlcmDirection direction, int distance);

struct GlcmFeatures {
  double asm_ = 0.0;  // angular second moment
  double homogeneity = 0.0;
  double contrast = 0.0;
  double correlation = 0.0;  // 0 when undefined
  bool correlation_defined = true;
};

GlcmFeatures glcm_features(const Glcm& m);

// ---------------------------------------------------------------- features

inline constexpr std::size_t kDomainFeatureCount = 18;

/// mean, std, then (asm, homogeneity, contrast, correlation) for 0°, 45°,
/// 90° and 135°.
struct DomainFeatureVector {
  std::array<double, kDomainFeatureCount> values{};
  std::array<bool, 4> correlation_degenerate{};

  static const std::array<std::string, kDomainFeatureCount>& names();
};

inline constexpr int kDefaultGlcmLevels = 32;

DomainFeatureVector feature_vector(PlaneView img, int levels = kDefaultGlcmLevels, int distance = 1);

// ---------------------------------------------------------------- MMD

using FeatureSet = std::vector<std::vector<double>>;

/// Biased V-statistic with k(x, y) = exp(-|x - y|^2 / (2 h^2)):
/// mean k(A, A) + mean k(B, B) - 2 mean k(A, B), clamped at 0. Inputs are
/// used as given. Throws ParameterError for an empty set or h <= 0 and
/// DimensionError for mismatched dimensions.
double mmd(const FeatureSet& a, const FeatureSet& b, double bandwidth);

/// Median of pairwise distances over A ∪ B (1 when all coincide).
double median_bandwidth(const FeatureSet& a, const FeatureSet& b);

/// Per-component z-scores computed over A ∪ B; constant components become 0.
std::pair<FeatureSet, FeatureSet> standardize_jointly(const FeatureSet& a, const FeatureSet& b);

struct BandwidthPolicy {
  bool median_heuristic = true;
  double fixed = 1.0;
};

struct NamedFeatureSet {
  std::string name;
  FeatureSet features;
};

struct DistanceMatrix {
  std::vector<std::string> labels;
  std::vector<double> d;  // n x n row-major
  [[nodiscard]] std::size_t size() const { return labels.size(); }
  [[nodiscard]] double at(std::size_t i, std::size_t j) const { return d[i * labels.size() + j]; }
};

/// Pairwise MMD after joint standardization of each pair. Throws
/// ParameterError for fewer than two datasets.
DistanceMatrix domain_distance_matrix(const std::vector<NamedFeatureSet>& datasets,
                                      const BandwidthPolicy& policy = {});

// ---------------------------------------------------------------- MDS

struct MdsResult {
  std::size_t dim = 0;
  std::vector<double> coords;       // n x dim row-major
  std::vector<double> eigenvalues;  // top `dim`, descending
  [[nodiscard]] double at(std::size_t i, std::size_t k) const { return coords[i * dim + k]; }
};

/// Classical (Torgerson) scaling of a symmetric distance matrix. Each
/// eigenvector's largest-magnitude component is made positive. Throws
/// ParameterError for asymmetric input or n < dim + 1.
MdsResult classical_mds(std::span<const double> distances, std::size_t n, std::size_t dim = 2);
MdsResult classical_mds(const DistanceMatrix& d, std::size_t dim = 2);

// ---------------------------------------------------------------- reports

struct ImageFeatures {
  std::string dataset;
  std::string image;
  DomainFeatureVector features;
};

/// Header: dataset,image,mean,std,asm_0,homog_0,contrast_0,corr_0,...,corr_135
void write_features_csv(const std::filesystem::path& path, const std::vector<ImageFeatures>& rows);

/// Distance matrix, MDS coordinates and degenerate-correlation counts.
std::string domain_report_json(const DistanceMatrix& d, const MdsResult& mds,
                               const std::vector<ImageFeatures>& rows, const BandwidthPolicy& policy);

/// Labelled 2-D scatter of the first two MDS axes.
std::string mds_svg(const DistanceMatrix& d, const MdsResult& mds);

}  // namespace lungforge
