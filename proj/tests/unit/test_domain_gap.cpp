#include <gtest/gtest.h>

#include <cmath>

#include "lungforge/domain_gap.hpp"
#include "lungforge/errors.hpp"
#include "support/oracles.hpp"

namespace lf = lungforge;
namespace lt = lungforge::testing;

namespace {

std::vector<int> quantized(const lf::Plane& p, int levels) {
  std::vector<int> q;
  for (double v : p.values()) q.push_back(lf::quantize_level(v, levels));
  return q;
}

std::pair<int, int> offset(lf::GlcmDirection d, int dist) {
  switch (d) {
    case lf::GlcmDirection::Deg0: return {dist, 0};
    case lf::GlcmDirection::Deg45: return {dist, -dist};
    case lf::GlcmDirection::Deg90: return {0, -dist};
    case lf::GlcmDirection::Deg135: return {-dist, -dist};
  }
  return {0, 0};
}

double distance(const std::vector<double>& x, std::size_t n, std::size_t dim, std::size_t i, std::size_t j) {
  (void)n;
  double s = 0.0;
  for (std::size_t k = 0; k < dim; ++k) s += (x[i * dim + k] - x[j * dim + k]) * (x[i * dim + k] - x[j * dim + k]);
  return std::sqrt(s);
}

std::vector<double> pairwise(const std::vector<double>& pts, std::size_t n, std::size_t dim) {
  std::vector<double> d(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) d[i * n + j] = distance(pts, n, dim, i, j);
  }
  return d;
}

}  // namespace

TEST(Quantize, UniformBins) {
  EXPECT_EQ(lf::quantize_level(-1.0, 4), 0);
  EXPECT_EQ(lf::quantize_level(-0.51, 4), 0);
  EXPECT_EQ(lf::quantize_level(-0.5, 4), 1);
  EXPECT_EQ(lf::quantize_level(0.0, 4), 2);
  EXPECT_EQ(lf::quantize_level(0.99, 4), 3);
  EXPECT_EQ(lf::quantize_level(1.0, 4), 3);
}

TEST(Glcm, MatchesBruteForceOnRandomImages) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto img = lt::random_plane(8, 8, s);
    const auto q = quantized(img, 4);
    for (auto dir : lf::kGlcmDirections) {
      for (int dist : {1, 2}) {
        const auto [dx, dy] = offset(dir, dist);
        const auto m = lf::glcm(img.view(), 4, dir, dist);
        EXPECT_EQ(m.p, lt::brute_force_glcm(q, 8, 8, 4, dx, dy)) << "seed " << s;
      }
    }
  }
}

TEST(Glcm, HandCaseAndErrors) {
  // Levels (4 bins): 0 1 / 2 3. Horizontal pairs (0,1), (2,3) both ways.
  const lf::Plane img(2, 2, std::vector<double>{-0.9, -0.3, 0.3, 0.9});
  const auto m = lf::glcm(img.view(), 4, lf::GlcmDirection::Deg0, 1);
  EXPECT_EQ(m.at(0, 1), 0.25);
  EXPECT_EQ(m.at(1, 0), 0.25);
  EXPECT_EQ(m.at(2, 3), 0.25);
  EXPECT_EQ(m.at(3, 2), 0.25);
  EXPECT_EQ(m.at(0, 0), 0.0);
  EXPECT_THROW(lf::glcm(img.view(), 1, lf::GlcmDirection::Deg0, 1), lf::ParameterError);
  EXPECT_THROW(lf::glcm(img.view(), 4, lf::GlcmDirection::Deg0, 0), lf::ParameterError);
  EXPECT_THROW(lf::glcm(img.view(), 4, lf::GlcmDirection::Deg0, 2), lf::DimensionError);
}

TEST(GlcmFeatures, ClosedForms) {
  const lf::Plane flat(4, 4, 0.1);
  const auto f = lf::glcm_features(lf::glcm(flat.view(), 8, lf::GlcmDirection::Deg0, 1));
  EXPECT_EQ(f.asm_, 1.0);
  EXPECT_EQ(f.homogeneity, 1.0);
  EXPECT_EQ(f.contrast, 0.0);
  EXPECT_FALSE(f.correlation_defined);
  EXPECT_EQ(f.correlation, 0.0);
  // Two levels alternating horizontally: every pair differs by |i - j| = 1.
  const lf::Plane stripes(4, 1, std::vector<double>{-1, 1, -1, 1});
  const auto g = lf::glcm_features(lf::glcm(stripes.view(), 2, lf::GlcmDirection::Deg0, 1));
  EXPECT_NEAR(g.asm_, 0.5, 1e-15);
  EXPECT_NEAR(g.homogeneity, 0.5, 1e-15);
  EXPECT_NEAR(g.contrast, 1.0, 1e-15);
  EXPECT_TRUE(g.correlation_defined);
  EXPECT_NEAR(g.correlation, -1.0, 1e-12);
}

TEST(FeatureVector, LayoutAndMoments) {
  const auto img = lt::random_plane(16, 16, 3);
  const auto fv = lf::feature_vector(img.view(), 8, 1);
  double mean = 0.0;
  for (double v : img.values()) mean += v;
  mean /= 256.0;
  double var = 0.0;
  for (double v : img.values()) var += (v - mean) * (v - mean);
  EXPECT_NEAR(fv.values[0], mean, 1e-14);
  EXPECT_NEAR(fv.values[1], std::sqrt(var / 256.0), 1e-14);
  const auto f45 = lf::glcm_features(lf::glcm(img.view(), 8, lf::GlcmDirection::Deg45, 1));
  EXPECT_EQ(fv.values[6], f45.asm_);
  EXPECT_EQ(fv.values[8], f45.contrast);
  EXPECT_EQ(lf::DomainFeatureVector::names()[0], "mean");
  EXPECT_EQ(lf::DomainFeatureVector::names().size(), lf::kDomainFeatureCount);
}

TEST(Mmd, IdentityAndClosedForm) {
  lf::FeatureSet a;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto p = lt::random_plane(5, 1, s);
    a.emplace_back(p.values().begin(), p.values().end());
  }
  EXPECT_LT(lf::mmd(a, a, 1.0), 1e-12);
  EXPECT_NEAR(lf::mmd({{0.0}}, {{1.0}}, 1.0), 2.0 * (1.0 - std::exp(-0.5)), 1e-9);
  EXPECT_NEAR(lf::mmd({{0.0}}, {{1.0}}, 1.0), 0.786939, 1e-6);
  lf::FeatureSet b;
  for (std::uint64_t s = 0; s < 7; ++s) {
    const auto p = lt::random_plane(5, 1, s + 100, 0.0, 2.0);
    b.emplace_back(p.values().begin(), p.values().end());
  }
  EXPECT_NEAR(lf::mmd(a, b, 0.7), lt::brute_force_mmd(a, b, 0.7), 1e-12);
  EXPECT_NEAR(lf::mmd(a, b, 0.7), lf::mmd(b, a, 0.7), 1e-12);
  EXPECT_THROW(lf::mmd({}, b, 1.0), lf::ParameterError);
  EXPECT_THROW(lf::mmd(a, b, 0.0), lf::ParameterError);
  EXPECT_THROW(lf::mmd({{1.0}}, {{1.0, 2.0}}, 1.0), lf::DimensionError);
}

TEST(Mmd, MedianBandwidthAndStandardization) {
  EXPECT_EQ(lf::median_bandwidth({{0.0}}, {{0.0}}), 1.0);
  // Distances {1, 2, 3}: median 2.
  EXPECT_EQ(lf::median_bandwidth({{0.0}, {1.0}}, {{3.0}}), 2.0);
  const auto [za, zb] = lf::standardize_jointly({{1.0, 5.0}, {3.0, 5.0}}, {{5.0, 5.0}});
  EXPECT_NEAR(za[0][0] + za[1][0] + zb[0][0], 0.0, 1e-15);
  EXPECT_EQ(za[0][1], 0.0);
  EXPECT_NEAR(zb[0][0], (5.0 - 3.0) / std::sqrt(8.0 / 3.0), 1e-14);
}

TEST(DistanceMatrix, SymmetricZeroDiagonal) {
  std::vector<lf::NamedFeatureSet> sets;
  for (int d = 0; d < 3; ++d) {
    lf::NamedFeatureSet s{"D" + std::to_string(d), {}};
    for (std::uint64_t i = 0; i < 6; ++i) {
      const auto p = lt::random_plane(3, 1, i + 10 * static_cast<std::uint64_t>(d), -1.0 + d, 1.0 + d);
      s.features.emplace_back(p.values().begin(), p.values().end());
    }
    sets.push_back(s);
  }
  const auto m = lf::domain_distance_matrix(sets);
  ASSERT_EQ(m.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(m.at(i, i), 0.0);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(m.at(i, j), m.at(j, i));
  }
  EXPECT_GT(m.at(0, 2), 0.0);
  EXPECT_THROW(lf::domain_distance_matrix({sets[0]}), lf::ParameterError);
}

TEST(Mds, EquilateralTriangle) {
  const std::vector<double> d{0, 1, 1, 1, 0, 1, 1, 1, 0};
  const auto r = lf::classical_mds(d, 3, 2);
  ASSERT_EQ(r.dim, 2u);
  EXPECT_NEAR(r.eigenvalues[0], 0.5, 1e-12);
  EXPECT_NEAR(r.eigenvalues[1], 0.5, 1e-12);
  const auto back = pairwise(r.coords, 3, 2);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(back[i], d[i], 1e-9);
}

TEST(Mds, PlanarRoundTripAndCentering) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const std::size_t n = 4 + s;
    const auto p = lt::random_plane(2, static_cast<int>(n), s, -3.0, 3.0);
    const std::vector<double> pts(p.values().begin(), p.values().end());
    const auto d = pairwise(pts, n, 2);
    const auto r = lf::classical_mds(d, n, 2);
    const auto back = pairwise(r.coords, n, 2);
    double worst = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) worst = std::max(worst, std::abs(back[i] - d[i]));
    EXPECT_LT(worst, 1e-6);
    for (std::size_t k = 0; k < 2; ++k) {
      double c = 0.0;
      for (std::size_t i = 0; i < n; ++i) c += r.at(i, k);
      EXPECT_NEAR(c, 0.0, 1e-9);
    }
    EXPECT_GE(r.eigenvalues[0], r.eigenvalues[1]);
  }
}

TEST(Mds, Errors) {
  EXPECT_THROW(lf::classical_mds(std::vector<double>{0, 1, 2, 0}, 2, 1), lf::ParameterError);
  EXPECT_THROW(lf::classical_mds(std::vector<double>{0, 1, 1, 0}, 2, 2), lf::ParameterError);
}

TEST(DomainReport, SvgAndJsonMentionEveryDataset) {
  const std::vector<double> d{0, 1, 1, 1, 0, 1, 1, 1, 0};
  lf::DistanceMatrix m{{"D_A", "D_B", "D_C"}, d};
  const auto mds = lf::classical_mds(m, 2);
  const auto svg = lf::mds_svg(m, mds);
  const auto json = lf::domain_report_json(m, mds, {}, {});
  for (const char* name : {"D_A", "D_B", "D_C"}) {
    EXPECT_NE(svg.find(name), std::string::npos);
    EXPECT_NE(json.find(name), std::string::npos);
  }
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
}
