#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "lungforge/errors.hpp"
#include "lungforge/unet.hpp"
#include "support/oracles.hpp"

namespace lf = lungforge;
namespace lt = lungforge::testing;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "lungforge_unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(UNet, InitIsDeterministicAndBounded) {
  const lf::UNetConfig cfg;
  const auto a = lf::init_dce_model(cfg, 3);
  const auto b = lf::init_dce_model(cfg, 3);
  const auto c = lf::init_dce_model(cfg, 4);
  EXPECT_TRUE(a.params == b.params);
  EXPECT_FALSE(a.params == c.params);
  for (const auto& t : a.params.tensors()) {
    if (t.shape.size() < 2) {
      for (double v : t.values) EXPECT_EQ(v, 0.0) << t.name;
      continue;
    }
    int fan_in = 1;
    for (std::size_t d = 1; d < t.shape.size(); ++d) fan_in *= t.shape[d];
    const double bound = std::sqrt(6.0 / fan_in);
    for (double v : t.values) {
      EXPECT_LE(std::abs(v), bound * (1.0 + 1e-7)) << t.name;
      EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
    }
  }
}

TEST(UNet, OutputShapeAndPositivity) {
  const auto model = lf::init_dce_model({}, 0);
  for (int side : {32, 64, 224}) {
    const auto img = lt::random_image(side, side, static_cast<std::uint64_t>(side));
    const auto a = lf::forward(model, img.view());
    EXPECT_EQ(a.width(), side);
    EXPECT_EQ(a.height(), side);
    for (double v : a.alphas()) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GT(v, 0.0);
    }
  }
  const auto rect = lt::random_image(16, 8, 1);
  EXPECT_EQ(lf::forward(model, rect.view()).width(), 16);
  EXPECT_THROW(lf::forward(model, lt::random_image(30, 32, 0).view()), lf::DimensionError);
}

TEST(UNet, ZeroWeightsGiveSoftplusOfBias) {
  auto model = lf::init_dce_model({}, 0);
  for (auto& t : model.params.tensors()) std::fill(t.values.begin(), t.values.end(), 0.0);
  const auto img = lt::random_image(16, 16, 2);
  auto a = lf::forward(model, img.view());
  for (double v : a.alphas()) EXPECT_NEAR(v, std::log(2.0) + 1e-3, 1e-15);
  model.params.values("head.bias")[0] = 1.5;
  a = lf::forward(model, img.view());
  for (double v : a.alphas()) EXPECT_NEAR(v, std::log1p(std::exp(1.5)) + 1e-3, 1e-15);
}

TEST(UNet, ValidateRejectsBadConfigs) {
  lf::UNetConfig cfg;
  cfg.levels = 0;
  EXPECT_THROW(cfg.validate(), lf::ParameterError);
  cfg = {};
  cfg.base_channels = 0;
  EXPECT_THROW(cfg.validate(), lf::ParameterError);
  cfg = {};
  cfg.output_epsilon = 0.0;
  EXPECT_THROW(cfg.validate(), lf::ParameterError);
}

TEST(UNet, BackwardMatchesFiniteDifferences) {
  // sum(upstream * alpha) on a 16x16 input, 100 sampled coordinates.
  auto model = lf::init_dce_model({}, 5);
  const auto img = lt::random_image(16, 16, 6);
  const auto up = lt::random_plane(16, 16, 7);
  const auto objective = [&] {
    const auto a = lf::forward(model, img.view());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.alphas()[i] * up.values()[i];
    return s;
  };
  const auto grad = lf::backward(model, img.view(), up.view());
  lf::Rng rng(8);
  int checked = 0;
  int guard = 0;
  while (checked < 100 && guard++ < 1000) {
    auto& t = model.params.tensors()[rng.index(model.params.tensors().size())];
    const std::size_t i = rng.index(t.values.size());
    const double keep = t.values[i];
    t.values[i] = keep + 1e-4;
    const auto p_up = lt::unet_pattern(model, img.view());
    t.values[i] = keep - 1e-4;
    const auto p_down = lt::unet_pattern(model, img.view());
    t.values[i] = keep;
    if (p_up != p_down) continue;  // a kink lies inside the probe interval
    const double fd = lt::central_difference(objective, t.values[i], 1e-4);
    const double an = grad.at(t.name).values[i];
    EXPECT_LT(lt::relative_error(an, fd), 1e-4) << t.name << "[" << i << "]";
    ++checked;
  }
  EXPECT_EQ(checked, 100);
}

TEST(UNet, CachedAndUncachedBackwardAgree) {
  const auto model = lf::init_dce_model({}, 1);
  const auto img = lt::random_image(16, 16, 2);
  const auto up = lt::random_plane(16, 16, 3);
  lf::UNetCache cache;
  lf::forward(model, img.view(), &cache);
  EXPECT_TRUE(lf::backward(model, img.view(), up.view()) == lf::backward(model, cache, up.view()));
}

TEST(UNet, CheckpointRoundTrip) {
  lf::UNetConfig cfg;
  cfg.levels = 3;
  cfg.base_channels = 4;
  cfg.leaky_slope = 0.02;
  const auto model = lf::init_dce_model(cfg, 9);
  const auto path = temp_file("roundtrip.dce");
  lf::save_dce_model(path, model, R"({"note":"x"})");
  std::string meta;
  const auto back = lf::load_dce_model(path, &meta);
  EXPECT_EQ(meta, R"({"note":"x"})");
  EXPECT_EQ(back.config.levels, 3);
  EXPECT_EQ(back.config.base_channels, 4);
  EXPECT_EQ(back.config.leaky_slope, 0.02);
  EXPECT_TRUE(back.params == model.params);
  const auto img = lt::random_image(16, 16, 1);
  const auto a = lf::forward(model, img.view());
  const auto b = lf::forward(back, img.view());
  EXPECT_TRUE(std::equal(a.alphas().begin(), a.alphas().end(), b.alphas().begin()));
}

TEST(UNet, CheckpointRejectsWrongMagicAndTruncation) {
  const auto model = lf::init_dce_model({}, 0);
  const auto path = temp_file("magic.dce");
  lf::save_dce_model(path, model);
  EXPECT_THROW(lf::read_checkpoint(path, "ENC1"), lf::FormatError);
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size / 2);
  EXPECT_THROW(lf::load_dce_model(path), lf::FormatError);
  EXPECT_THROW(lf::load_dce_model(temp_file("missing.dce")), lf::IoError);
}

class CompositeGradient : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(CompositeGradient, NetworkThroughLossesMatchesFiniteDifferences) {
  const auto seed = GetParam();
  auto model = lf::init_dce_model({}, seed);
  const auto img = lt::random_image(8, 8, seed + 10);
  const lf::AdaptiveLossParams prm{1.0, 0.0, 0.4};
  const lf::LossWeights w{1.0, 1.0, 1.0};
  const auto grad = lt::composite_grad(model, img.view(), prm, w, 4, 0.1);
  const auto value = [&] { return lt::composite_loss(model, img.view(), prm, w, 4, 0.1); };
  lf::Rng rng(seed + 20);
  int checked = 0;
  int guard = 0;
  while (checked < 100 && guard++ < 2000) {
    auto& t = model.params.tensors()[rng.index(model.params.tensors().size())];
    const std::size_t i = rng.index(t.values.size());
    const double keep = t.values[i];
    t.values[i] = keep + 1e-4;
    const auto p_up = lt::unet_pattern(model, img.view());
    t.values[i] = keep - 1e-4;
    const auto p_down = lt::unet_pattern(model, img.view());
    t.values[i] = keep;
    if (p_up != p_down) continue;
    const double fd = lt::central_difference(value, t.values[i], 1e-4);
    EXPECT_LT(lt::relative_error(grad.at(t.name).values[i], fd), 1e-4) << t.name << "[" << i << "]";
    ++checked;
  }
  EXPECT_EQ(checked, 100);
}

INSTANTIATE_TEST_SUITE_P(Seeds, CompositeGradient, ::testing::Values(0, 1, 2, 3, 4));
