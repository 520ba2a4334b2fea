#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "lungforge/dce_trainer.hpp"
#include "lungforge/errors.hpp"
#include "lungforge/image_io.hpp"
#include "lungforge/image_ops.hpp"
#include "lungforge/phantom.hpp"
#include "support/oracles.hpp"

namespace lf = lungforge;
namespace lt = lungforge::testing;

namespace {

std::vector<lf::GrayImage> small_corpus(int n, int side) {
  std::vector<lf::GrayImage> out;
  for (const auto& s : lf::generate_corpus(n, 11, lf::DomainConfig::preset("A"), 0.5)) {
    out.push_back(lf::GrayImage::from_clamped(lf::resize_bilinear(s.image.view(), side, side)));
  }
  return out;
}

lf::TrainConfig quick_config(int epochs) {
  lf::TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 2;
  c.learning_rate = 1e-3;
  c.force = true;
  c.unet.base_channels = 4;
  return c;
}

}  // namespace

TEST(TrainConfig, RangesEnforcedUnlessForced) {
  lf::TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.learning_rate = 1e-2;
  EXPECT_THROW(c.validate(), lf::ParameterError);
  c.force = true;
  EXPECT_NO_THROW(c.validate());
  c = {};
  c.batch_size = 16;
  EXPECT_THROW(c.validate(), lf::ParameterError);
  c = {};
  c.lr_decay = 0.5;
  EXPECT_THROW(c.validate(), lf::ParameterError);
  c = {};
  c.weight_decay = 0.1;
  EXPECT_THROW(c.validate(), lf::ParameterError);
  c = {};
  c.force = true;
  c.temperature = 0.0;
  EXPECT_THROW(c.validate(), lf::ParameterError);
  c = {};
  c.weights.local = -1.0;
  EXPECT_THROW(c.validate(), lf::ParameterError);
}

TEST(TrainDce, ZeroEpochsReturnsInitialization) {
  const auto corpus = small_corpus(2, 16);
  auto cfg = quick_config(0);
  const auto r = lf::train_dce(corpus, cfg);
  const auto again = lf::train_dce(corpus, cfg);
  EXPECT_TRUE(r.model.params == again.model.params);
  EXPECT_TRUE(r.report.epochs.empty());
  EXPECT_EQ(r.report.steps, 0u);
}

TEST(TrainDce, DeterministicAndLossDrops) {
  const auto corpus = small_corpus(4, 16);
  const auto cfg = quick_config(6);
  const auto a = lf::train_dce(corpus, cfg);
  const auto b = lf::train_dce(corpus, cfg);
  EXPECT_TRUE(a.model.params == b.model.params);
  EXPECT_EQ(a.report.to_json(), b.report.to_json());
  ASSERT_EQ(a.report.epochs.size(), 6u);
  EXPECT_LT(a.report.epochs.back().mean.total, a.report.epochs.front().mean.total);
  EXPECT_EQ(a.report.steps, 12u);
  EXPECT_NEAR(a.report.epochs[1].learning_rate, cfg.learning_rate * cfg.lr_decay, 1e-15);
}

TEST(TrainDce, RejectsEmptyAndMixedCorpora) {
  EXPECT_THROW(lf::train_dce({}, quick_config(1)), lf::ParameterError);
  auto mixed = small_corpus(1, 16);
  mixed.push_back(lt::random_image(32, 32, 1));
  EXPECT_THROW(lf::train_dce(mixed, quick_config(1)), lf::DimensionError);
}

TEST(EnhanceImages, MatchesForwardThenCurve) {
  const auto model = lf::init_dce_model({}, 3);
  const auto img = lt::random_image(16, 16, 4);
  const auto out = lf::enhance_images(model, {img});
  ASSERT_EQ(out.size(), 1u);
  const auto ref = lf::enhance(img, lf::forward(model, img.view()));
  EXPECT_TRUE(std::equal(out[0].pixels().begin(), out[0].pixels().end(), ref.pixels().begin()));
  EXPECT_TRUE(lf::enhance_images(model, {}).empty());
}

TEST(EnhanceFiles, WritesOutputsAndCollectsErrors) {
  const auto dir = std::filesystem::temp_directory_path() / "lungforge_unit" / "enhance_files";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir / "in");
  lf::save_png16(dir / "in" / "a.png", lt::random_image(16, 16, 1));
  {
    std::ofstream bad(dir / "in" / "b.png");
    bad << "not an image";
  }
  const auto model = lf::init_dce_model({}, 0);
  const auto r = lf::enhance_files(model, {dir / "in" / "a.png", dir / "in" / "b.png"}, dir / "out");
  ASSERT_EQ(r.files.size(), 1u);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.files[0].output.filename(), "a-dce.png");
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "a-dce.png"));
  EXPECT_EQ(r.errors[0].source.filename(), "b.png");
  EXPECT_EQ(lf::enhanced_name("x/scan.jpg"), "scan-dce.png");
}
