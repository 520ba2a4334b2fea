#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "lungforge/dce_losses.hpp"
#include "lungforge/enhancement.hpp"
#include "lungforge/image.hpp"
#include "lungforge/unet.hpp"

namespace lungforge {

/// Hyperparameters of DCE training. Optimizer hyperparameters must lie in the
/// supported search ranges unless `force` is set.
struct TrainConfig {
  double learning_rate = 1e-4;  // [1e-6, 1e-3]
  double weight_decay = 1e-4;   // [1e-5, 1e-2]
  double lr_decay = 0.95;       // per-epoch multiplier, [0.6, 1]
  int batch_size = 32;          // 32, 64 or 128
  int epochs = 50;
  std::uint64_t seed = 0;
  LossWeights weights;
  double ts = 1.0;
  int kernel_size = 4;
  double temperature = 0.1;
  CurveShift shift;
  UNetConfig unet;
  bool force = false;

  /// Throws ParameterError for out-of-range values.
  void validate() const;
};

struct EpochRecord {
  LossBreakdown mean;  // per-image mean over the epoch, before each update
  double learning_rate = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::uint64_t seed = 0;
  std::size_t image_count = 0;
  std::uint64_t steps = 0;
  double wall_seconds = 0.0;  // excluded from to_json()
  std::string checkpoint_path;

  /// Deterministic JSON (no timing fields).
  [[nodiscard]] std::string to_json() const;
};

struct TrainResult {
  DceModel model;
  TrainReport report;
};

/// Called after every epoch with the 1-based epoch number.
using EpochCallback = std::function<void(int epoch, const EpochRecord&)>;

/// Trains the α generator on `corpus` (all images of one size, divisible by
/// 2^levels). The anatomy Gaussian of every image is resolved once up front.
/// Batches follow a per-epoch shuffle drawn from the seed; gradients are
/// reduced in batch order, so results do not depend on the thread count.
///
/// Throws ParameterError for an empty corpus and DivergenceError on a
/// non-finite loss or gradient; in that case `last_good`, when given,
/// receives the parameters from before the failing step.
TrainResult train_dce(const std::vector<GrayImage>& corpus, const TrainConfig& config,
                      DceModel* last_good = nullptr, const EpochCallback& on_epoch = {});

/// forward followed by the curve, per image.
std::vector<GrayImage> enhance_images(const DceModel& model, const std::vector<GrayImage>& images,
                                      CurveShift shift = {});

/// Output name for an enhanced file: source stem + "-dce.png".
std::filesystem::path enhanced_name(const std::filesystem::path& source);

struct EnhancedFile {
  std::filesystem::path source;
  std::filesystem::path output;
  double entropy_before = 0.0;  // 256-bin histogram entropy
  double entropy_after = 0.0;
  bool inpainted = false;
};

struct FileError {
  std::filesystem::path source;
  std::string message;
};

struct EnhanceResult {
  std::vector<EnhancedFile> files;
  std::vector<FileError> errors;
  std::vector<std::string> log;  // ordered pipeline steps
};

/// Enhances every file and writes 16-bit PNGs into `out_dir`. When
/// `mask_dir` is non-empty, a mask with the same file name is applied by
/// inpaint_mask before enhancement. Per-file failures are collected, not
/// thrown.
EnhanceResult enhance_files(const DceModel& model, const std::vector<std::filesystem::path>& sources,
                            const std::filesystem::path& out_dir, CurveShift shift = {},
                            const std::filesystem::path& mask_dir = {});

inline constexpr int kEntropyBins = 256;

}  // namespace lungforge
