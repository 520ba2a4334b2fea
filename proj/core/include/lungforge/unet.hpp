#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lungforge/enhancement.hpp"
#include "lungforge/image.hpp"
#include "lungforge/nn.hpp"
#include "lungforge/params.hpp"

namespace lungforge {

/// Shallow U-Net producing the per-pixel α map.
///
/// Each encoder level applies two 3x3 convolutions with leaky-ReLU and a 2x2
/// max pool; channel counts double per level starting at `base_channels`. The
/// bottleneck repeats the two convolutions. Each decoder level upsamples
/// (nearest), convolves, concatenates the matching skip connection and applies
/// two more convolutions. A 1x1 convolution followed by softplus + epsilon
/// yields α > 0.
struct UNetConfig {
  int levels = 2;
  int base_channels = 8;
  double leaky_slope = 0.01;
  double output_epsilon = 1e-3;

  void validate() const;
};

struct DceModel {
  UNetConfig config;
  ModelParams params;
};

/// Fan-in scaled uniform weights in [-sqrt(6/fan_in), sqrt(6/fan_in)], zero
/// biases, rounded to float32. Deterministic in seed.
DceModel init_dce_model(const UNetConfig& config, std::uint64_t seed);

/// Intermediate activations kept for the reverse pass.
struct UNetCache {
  struct ConvRecord {
    nn::FeatureMap input;
    nn::FeatureMap pre;  // pre-activation output
  };
  std::vector<ConvRecord> convs;  // in forward order
  std::vector<std::vector<std::size_t>> pool_argmax;
  std::vector<nn::FeatureMap> pool_inputs;
  std::vector<int> skip_channels;
  int width = 0;
  int height = 0;
};

/// Throws DimensionError unless both sides are divisible by 2^levels.
TransformMatrix forward(const DceModel& model, PlaneView img, UNetCache* cache = nullptr);

/// Exact reverse-mode gradient of sum(upstream * forward(img)) w.r.t. the
/// parameters. The overload with a cache skips recomputing the forward pass.
ModelParams backward(const DceModel& model, PlaneView img, PlaneView upstream);
ModelParams backward(const DceModel& model, const UNetCache& cache, PlaneView upstream);

inline constexpr char kDceMagic[] = "DCE1";

/// Checkpoint config block: u32 levels | u32 base_channels | f64 leaky_slope |
/// f64 output_epsilon.
void save_dce_model(const std::filesystem::path& path, const DceModel& model,
                    const std::string& metadata_json = "{}");
DceModel load_dce_model(const std::filesystem::path& path, std::string* metadata_json = nullptr);

}  // namespace lungforge
