#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lungforge/image.hpp"
#include "lungforge/nn.hpp"
#include "lungforge/params.hpp"

namespace lungforge {

/// Small convolutional encoder: per stage a 3x3 convolution, leaky-ReLU and a
/// 2x2 max pool, followed by global average pooling. During contrastive
/// pretraining a two-layer projection head maps the features to the
/// embedding space.
struct EncoderSpec {
  std::vector<int> channels{8, 16, 32, 64};
  int projection_hidden = 64;
  int projection_dim = 32;
  double leaky_slope = 0.01;
  int input_size = 64;  // square input side, divisible by 2^stages

  void validate() const;
  [[nodiscard]] int feature_dim() const { return channels.back(); }
};

struct Encoder {
  EncoderSpec spec;
  ModelParams params;  // "stage{s}.conv.*" and, while pretraining, "proj.*"

  [[nodiscard]] bool has_projection() const;
};

inline constexpr char kProjectionPrefix[] = "proj.";

/// Fan-in scaled uniform weights, zero biases, rounded to float32.
Encoder init_encoder(const EncoderSpec& spec, std::uint64_t seed, bool with_projection);

/// Removes the projection head (kept tensors are untouched).
void drop_projection(Encoder& enc);

struct EncoderCache {
  struct ConvRecord {
    nn::FeatureMap input;
    nn::FeatureMap pre;
  };
  std::vector<ConvRecord> convs;
  std::vector<std::vector<std::size_t>> pool_argmax;
  std::vector<nn::FeatureMap> pool_shapes;
  nn::FeatureMap last;  // input of the global average pool
};

/// Feature vector of length spec.feature_dim(). Throws DimensionError unless
/// the image is input_size x input_size.
std::vector<double> encode(const Encoder& enc, PlaneView img, EncoderCache* cache = nullptr);

/// Accumulates the parameter gradient of sum(grad_features * encode(img))
/// into `grad` (same layout as enc.params).
void encode_backward(const Encoder& enc, const EncoderCache& cache,
                     std::span<const double> grad_features, ModelParams& grad);

struct ProjectionCache {
  std::vector<double> hidden_pre;
};

/// Projection head: linear, leaky-ReLU, linear.
std::vector<double> project(const Encoder& enc, std::span<const double> features,
                            ProjectionCache* cache = nullptr);

/// Accumulates projection gradients into `grad`; returns dL/dfeatures.
std::vector<double> project_backward(const Encoder& enc, std::span<const double> features,
                                     const ProjectionCache& cache, std::span<const double> grad_z,
                                     ModelParams& grad);

inline constexpr char kEncoderMagic[] = "ENC1";

/// Config block: u32 stage_count | u32 channels[stage_count] |
/// u32 projection_hidden | u32 projection_dim | f64 leaky_slope |
/// u32 input_size. Additional tensors (such as a classifier head) are stored
/// alongside the encoder tensors.
void save_encoder(const std::filesystem::path& path, const Encoder& enc,
                  const ModelParams& extra = {}, const std::string& metadata_json = "{}");

struct LoadedEncoder {
  Encoder encoder;
  ModelParams extra;  // tensors outside the encoder and projection head
  std::string metadata;
};

LoadedEncoder load_encoder(const std::filesystem::path& path);

}  // namespace lungforge
