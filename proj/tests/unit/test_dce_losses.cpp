#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "lungforge/dce_losses.hpp"
#include "lungforge/errors.hpp"
#include "support/oracles.hpp"

namespace lf = lungforge;
namespace lt = lungforge::testing;

namespace {

std::vector<lf::PlaneView> one(const lf::Plane& p) { return {p.view()}; }

/// Exact local conflict by enumerating directed 4-neighbour pairs.
double local_conflict_oracle(const lf::Plane& y, const lf::Plane& x) {
  const int w = x.width();
  const int h = x.height();
  double conflicts = 0.0;
  const int dx[4] = {1, -1, 0, 0};
  const int dy[4] = {0, 0, 1, -1};
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int d = 0; d < 4; ++d) {
        const int c2 = c + dx[d];
        const int r2 = r + dy[d];
        if (c2 < 0 || c2 >= w || r2 < 0 || r2 >= h) continue;
        const bool a = y.at(c, r) > y.at(c2, r2);
        const bool b = x.at(c, r) > x.at(c2, r2);
        conflicts += a != b ? 1.0 : 0.0;
      }
    }
  }
  return conflicts / (4.0 * w * h);
}

/// Region loss through explicit N x N gram matrices.
double region_oracle(const lf::Plane& x, const lf::Plane& y, int k) {
  const auto fx = lf::square_flatten(x.view(), k);
  const auto fy = lf::square_flatten(y.view(), k);
  const auto gx = lf::gram(fx);
  const auto gy = lf::gram(fy);
  double s = 0.0;
  for (std::size_t i = 0; i < gx.data.size(); ++i) s += (gx.data[i] - gy.data[i]) * (gx.data[i] - gy.data[i]);
  const double n = static_cast<double>(fx.rows);
  const double m = static_cast<double>(fx.cols);
  return s / (4.0 * n * n * m * m);
}

}  // namespace

TEST(Kmeans, ExactCentersOnFiveValues) {
  const std::vector<double> levels{-0.8, -0.4, 0.0, 0.4, 0.8};
  std::vector<double> px;
  lf::Rng rng(1);
  for (int i = 0; i < 500; ++i) px.push_back(levels[rng.index(5)]);
  const auto km = lf::kmeans_1d(px, 5, 0);
  ASSERT_EQ(km.centers.size(), 5u);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(km.centers[j], levels[j], 1e-12);
  const auto again = lf::kmeans_1d(px, 5, 0);
  EXPECT_EQ(km.assignments, again.assignments);
}

TEST(Kmeans, BlobsMatchBestOfRestartsOracle) {
  const std::vector<double> means{-0.8, -0.4, 0.0, 0.4, 0.8};
  std::vector<double> px;
  lf::Rng rng(2);
  for (int b = 0; b < 5; ++b) {
    for (int i = 0; i < 200; ++i) px.push_back(means[static_cast<std::size_t>(b)] + 0.01 * rng.normal());
  }
  const auto km = lf::kmeans_1d(px, 5, 3);
  // Oracle: the best of many random-restart Lloyd runs.
  double best_sse = 1e300;
  std::vector<double> best;
  for (int restart = 0; restart < 50; ++restart) {
    lf::Rng r(100 + restart);
    std::vector<double> c;
    for (int j = 0; j < 5; ++j) c.push_back(px[r.index(px.size())]);
    for (int it = 0; it < 100; ++it) {
      std::vector<double> sum(5, 0.0), cnt(5, 0.0);
      for (double v : px) {
        std::size_t a = 0;
        for (std::size_t j = 1; j < 5; ++j) {
          if (std::abs(v - c[j]) < std::abs(v - c[a])) a = j;
        }
        sum[a] += v;
        cnt[a] += 1.0;
      }
      for (std::size_t j = 0; j < 5; ++j) {
        if (cnt[j] > 0) c[j] = sum[j] / cnt[j];
      }
    }
    double sse = 0.0;
    for (double v : px) {
      double d = 1e300;
      for (double cj : c) d = std::min(d, (v - cj) * (v - cj));
      sse += d;
    }
    if (sse < best_sse) {
      best_sse = sse;
      best = c;
    }
  }
  std::sort(best.begin(), best.end());
  for (std::size_t j = 0; j < 5; ++j) {
    EXPECT_NEAR(km.centers[j], best[j], 1e-9);
    EXPECT_NEAR(km.centers[j], means[j], 0.01);
  }
}

TEST(Kmeans, InertiaNeverIncreasesAndNearestAssignment) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = lt::random_plane(16, 16, seed);
    const auto km = lf::kmeans_1d(p.values(), 5, seed);
    for (std::size_t i = 1; i < km.inertia.size(); ++i) EXPECT_LE(km.inertia[i], km.inertia[i - 1] + 1e-12);
    EXPECT_TRUE(std::is_sorted(km.centers.begin(), km.centers.end()));
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double v = p.values()[i];
      const double assigned = std::abs(v - km.centers[static_cast<std::size_t>(km.assignments[i])]);
      for (double c : km.centers) EXPECT_LE(assigned, std::abs(v - c) + 1e-12);
    }
  }
  EXPECT_THROW(lf::kmeans_1d(std::vector<double>{0.1, 0.1, 0.2, 0.3}, 5, 0), lf::DegenerateInputError);
}

TEST(GaussianParams, ResolutionRule) {
  lf::KmeansResult km;
  km.centers = {-0.8, -0.4, 0.0, 0.4, 0.8};
  auto g = lf::resolve_gaussian_params(km);
  EXPECT_EQ(g.sigma, 0.0);
  EXPECT_EQ(g.theta_literal, -0.4);
  EXPECT_NEAR(g.width, 0.4, 1e-15);
  km.centers = {0.1, 0.2, 0.3, 0.4, 0.5};
  g = lf::resolve_gaussian_params(km);
  EXPECT_EQ(g.sigma, 0.3);
  EXPECT_EQ(g.theta_literal, 0.2);
  EXPECT_NEAR(g.width, 0.1, 1e-15);
  lf::KmeansResult neg;
  neg.centers = {-0.5, -0.4, -0.3, -0.2, -0.1};
  const auto gn = lf::resolve_gaussian_params(neg);
  EXPECT_NEAR(gn.sigma, -g.sigma, 1e-15);
  EXPECT_NEAR(gn.width, g.width, 1e-15);
  km.centers = {0.0, 0.3, 0.3, 0.3, 1.0};
  EXPECT_EQ(lf::resolve_gaussian_params(km).width, lf::kGaussianWidthFloor);
}

TEST(GaussianWeightMap, PeakOneSigmaAndFlatLimit) {
  const lf::Plane p(3, 1, std::vector<double>{0.2, 0.5, -1.0});
  const auto g = lf::gaussian_weight_map(p.view(), 0.2, 0.3);
  EXPECT_EQ(g.at(0, 0), 1.0);
  EXPECT_NEAR(g.at(1, 0), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(g.at(1, 0), 0.606531, 1e-6);
  const auto flat = lf::gaussian_weight_map(p.view(), 0.0, 1e6);
  for (double v : flat.values()) EXPECT_NEAR(v, 1.0, 1e-11);
  EXPECT_THROW(lf::gaussian_weight_map(p.view(), 0.0, 0.0), lf::ParameterError);
}

TEST(AdaptiveLoss, ClosedForms) {
  const auto x = lt::random_plane(8, 8, 1);
  const lf::AdaptiveLossParams prm{1.5, 0.1, 0.3};
  auto target = lf::gaussian_weight_map(x.view(), prm.sigma, prm.theta);
  for (double& v : target.values()) v *= prm.ts;
  const std::vector<lf::AdaptiveLossParams> ps{prm};
  EXPECT_NEAR(lf::adaptive_loss(one(target), one(x), ps), 0.0, 1e-12);
  auto shifted = target;
  for (double& v : shifted.values()) v += 1.0;
  EXPECT_NEAR(lf::adaptive_loss(one(shifted), one(x), ps), 0.5, 1e-12);
}

TEST(LocalConflict, ExactHandCases) {
  const lf::Plane x(2, 2, std::vector<double>{0.1, 0.7, -0.3, 0.4});
  lf::Plane neg = x;
  for (double& v : neg.values()) v = -v;
  lf::Plane twice = x;
  for (double& v : twice.values()) v *= 2.0;
  EXPECT_EQ(lf::local_conflict_loss_exact(one(x), one(x)), 0.0);
  EXPECT_EQ(lf::local_conflict_loss_exact(one(neg), one(x)), 0.5);
  EXPECT_EQ(lf::local_conflict_loss_exact(one(twice), one(x)), 0.0);
  // 3x3 with a tie: equal pixels never conflict under strict ordering.
  const lf::Plane a(3, 3, std::vector<double>{0, 0, 1, 2, 3, 4, 5, 6, 7});
  const lf::Plane b(3, 3, std::vector<double>{0, 0, 1, 2, 3, 4, 5, 7, 6});
  // Only the horizontal pair (1,2)-(2,2) flips, counted in both directions.
  EXPECT_DOUBLE_EQ(lf::local_conflict_loss_exact(one(b), one(a)), 2.0 / 36.0);
  EXPECT_DOUBLE_EQ(lf::local_conflict_loss_exact(one(b), one(a)), local_conflict_oracle(b, a));
}

TEST(LocalConflict, PropertiesOnRandomInputs) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto x = lt::random_plane(7, 6, s);
    const auto y = lt::random_plane(7, 6, s + 50);
    const double v = lf::local_conflict_loss_exact(one(y), one(x));
    EXPECT_DOUBLE_EQ(v, local_conflict_oracle(y, x));
    EXPECT_DOUBLE_EQ(v, lf::local_conflict_loss_exact(one(x), one(y)));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    lf::Plane g = x;
    for (double& p : g.values()) p = std::tanh(3.0 * p) + p * p * p;
    EXPECT_EQ(lf::local_conflict_loss_exact(one(g), one(x)), 0.0);
  }
}

TEST(LocalConflictSmooth, LimitsAndOracle) {
  const lf::Plane x(2, 2, std::vector<double>{0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0});
  EXPECT_LT(lf::local_conflict_loss_smooth(one(x), one(x), 0.01), 1e-10);
  lf::Plane neg = x;
  for (double& v : neg.values()) v = -v;
  EXPECT_NEAR(lf::local_conflict_loss_smooth(one(neg), one(x), 1e-3), 0.5, 1e-3);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto a = lt::random_plane(8, 8, s);
    const auto b = lt::random_plane(8, 8, s + 10);
    EXPECT_NEAR(lf::local_conflict_loss_smooth(one(b), one(a), 1e-3), lf::local_conflict_loss_exact(one(b), one(a)),
                1e-3);
  }
  EXPECT_THROW(lf::local_conflict_loss_smooth(one(x), one(x), 0.0), lf::ParameterError);
}

TEST(SquareFlatten, HandTiling) {
  std::vector<double> ramp(16);
  std::iota(ramp.begin(), ramp.end(), 0.0);
  const lf::Plane p(4, 4, ramp);
  const auto m = lf::square_flatten(p.view(), 2);
  ASSERT_EQ(m.rows, 4u);
  ASSERT_EQ(m.cols, 4u);
  EXPECT_EQ(m.data, (std::vector<double>{0, 1, 4, 5, 2, 3, 6, 7, 8, 9, 12, 13, 10, 11, 14, 15}));
  const auto whole = lf::square_flatten(p.view(), 4);
  EXPECT_EQ(whole.rows, 1u);
  EXPECT_EQ(whole.data, ramp);
  const auto ones = lf::square_flatten(p.view(), 1);
  EXPECT_EQ(ones.rows, 16u);
  EXPECT_EQ(ones.data, ramp);
  EXPECT_THROW(lf::square_flatten(p.view(), 3), lf::DimensionError);
  const auto back = lf::square_unflatten(m, 4, 4, 2);
  EXPECT_EQ(std::vector<double>(back.values().begin(), back.values().end()), ramp);
}

TEST(Gram, HandProducts) {
  lf::Matrix id(2, 2);
  id(0, 0) = id(1, 1) = 1.0;
  EXPECT_EQ(lf::gram(id).data, id.data);
  lf::Matrix m(2, 2);
  m.data = {1, 2, 3, 4};
  EXPECT_EQ(lf::gram(m).data, (std::vector<double>{5, 11, 11, 25}));
  lf::Matrix r(5, 3);
  const auto rp = lt::random_plane(15, 1, 4);
  r.data.assign(rp.values().begin(), rp.values().end());
  const auto g = lf::gram(r);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(g(i, j), g(j, i));
  }
}

TEST(RegionConflict, MatchesGramOracleAndZeroIffEqual) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto x = lt::random_plane(8, 8, s);
    const auto y = lt::random_plane(8, 8, s + 20);
    EXPECT_EQ(lf::region_conflict_loss(one(x), one(x), 2), 0.0);
    EXPECT_NEAR(lf::region_conflict_loss(one(x), one(y), 2), region_oracle(x, y, 2), 1e-14);
    EXPECT_NEAR(lf::region_conflict_loss(one(x), one(y), 4), region_oracle(x, y, 4), 1e-14);
    EXPECT_GT(lf::region_conflict_loss(one(x), one(y), 2), 0.0);
  }
  // Row permutation of the tiles: gram becomes P G P^T, which differs generically.
  const auto x = lt::random_plane(4, 4, 77);
  auto fx = lf::square_flatten(x.view(), 2);
  std::swap_ranges(fx.data.begin(), fx.data.begin() + 4, fx.data.begin() + 4);
  const auto permuted = lf::square_unflatten(fx, 4, 4, 2);
  EXPECT_GT(lf::region_conflict_loss(one(x), one(permuted), 2), 0.0);
}

TEST(TotalLoss, WeightedSumOfComponents) {
  const auto x = lt::random_plane(8, 8, 3);
  const lf::AdaptiveLossParams prm{1.0, 0.0, 0.4};
  const std::vector<lf::AdaptiveLossParams> ps{prm};
  auto a = lf::gaussian_weight_map(x.view(), prm.sigma, prm.theta);
  const auto y = lf::apply_transform(x.view(), lf::TransformMatrix(a));
  EXPECT_EQ(lf::dce_total_loss(one(a), one(x), one(y), ps, {1, 0, 0}, 4, 0.1).total, 0.0);
  EXPECT_EQ(lf::dce_total_loss(one(a), one(x), one(x), ps, {0, 0, 1}, 4, 0.1).total, 0.0);
  const auto ra = lt::random_plane(8, 8, 5, 0.1, 2.0);
  const auto ry = lt::random_plane(8, 8, 6);
  const auto b = lf::dce_total_loss(one(ra), one(x), one(ry), ps, {1, 1, 1}, 4, 0.1);
  const double oracle = lf::adaptive_loss(one(ra), one(x), ps) + lf::local_conflict_loss_smooth(one(ry), one(x), 0.1) +
                        lf::region_conflict_loss(one(x), one(ry), 4);
  EXPECT_NEAR(b.total, oracle, 1e-14);
  EXPECT_THROW(lf::dce_total_loss(one(ra), one(x), one(ry), ps, {-1, 1, 1}, 4, 0.1), lf::ParameterError);
}

// Gradient checks: central differences, step 1e-4, relative tolerance 1e-4,
// seeds 0-4 on 8x8 inputs.
class LossGradients : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(LossGradients, Adaptive) {
  const auto seed = GetParam();
  const auto x = lt::random_plane(8, 8, seed);
  auto a = lt::random_plane(8, 8, seed + 100, 0.05, 2.0);
  const std::vector<lf::AdaptiveLossParams> ps{{1.2, 0.05, 0.3}};
  const auto g = lf::adaptive_loss_grad(one(a), one(x), ps);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double fd = lt::central_difference([&] { return lf::adaptive_loss(one(a), one(x), ps); }, a.values()[i], 1e-4);
    EXPECT_LT(lt::relative_error(g.grad[0].values()[i], fd), 1e-4);
  }
}

TEST_P(LossGradients, LocalConflictSmooth) {
  const auto seed = GetParam();
  const auto x = lt::random_plane(8, 8, seed);
  auto y = lt::random_plane(8, 8, seed + 200);
  const auto g = lf::local_conflict_loss_smooth_grad(one(y), one(x), 0.1);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double fd =
        lt::central_difference([&] { return lf::local_conflict_loss_smooth(one(y), one(x), 0.1); }, y.values()[i], 1e-4);
    EXPECT_LT(lt::relative_error(g.grad[0].values()[i], fd), 1e-4);
  }
}

TEST_P(LossGradients, RegionConflict) {
  const auto seed = GetParam();
  const auto x = lt::random_plane(8, 8, seed);
  auto y = lt::random_plane(8, 8, seed + 300);
  const auto g = lf::region_conflict_loss_grad(one(x), one(y), 2);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double fd = lt::central_difference([&] { return lf::region_conflict_loss(one(x), one(y), 2); }, y.values()[i], 1e-4);
    EXPECT_LT(lt::relative_error(g.grad[0].values()[i], fd), 1e-4);
  }
}

TEST_P(LossGradients, TotalThroughCurve) {
  const auto seed = GetParam();
  const auto x = lt::random_plane(8, 8, seed);
  auto a = lt::random_plane(8, 8, seed + 400, 0.1, 2.0);
  const std::vector<lf::AdaptiveLossParams> ps{{1.0, 0.0, 0.35}};
  const lf::LossWeights w{1.0, 1.0, 1.0};
  const lf::CurveShift shift{0.05, -0.02};
  const auto g = lf::dce_total_loss_grad(one(a), one(x), ps, w, 4, 0.1, shift);
  const auto value = [&] {
    const auto y = lf::apply_transform(x.view(), lf::TransformMatrix(a), shift);
    return lf::dce_total_loss(one(a), one(x), one(y), ps, w, 4, 0.1).total;
  };
  EXPECT_NEAR(g.loss.total, value(), 1e-14);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double fd = lt::central_difference(value, a.values()[i], 1e-4);
    EXPECT_LT(lt::relative_error(g.grad_alpha[0].values()[i], fd), 1e-4);
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, LossGradients, ::testing::Values(0, 1, 2, 3, 4));
