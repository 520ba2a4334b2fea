#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lungforge/encoder.hpp"
#include "lungforge/enhancement.hpp"
#include "lungforge/image.hpp"
#include "lungforge/image_ops.hpp"
#include "lungforge/unet.hpp"

namespace lungforge {

/// Optimization settings of contrastive pretraining. The optimizer ranges are
/// the same as for DCE training and are enforced unless `force` is set.
struct PretrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double lr_decay = 0.95;
  int batch_size = 32;  // source images per step (2x embeddings)
  int epochs = 20;
  std::uint64_t seed = 0;
  double tau = 0.5;
  AugmentConfig augment;  // output size is overridden by the encoder input size
  bool force = false;

  void validate() const;
};

/// Two independent augment() draws with seeds derive_seed(seed, 0) and
/// derive_seed(seed, 1).
std::pair<GrayImage, GrayImage> two_views(const GrayImage& img, std::uint64_t seed,
                                          const AugmentConfig& config = {});

struct PretrainResult {
  Encoder encoder;                 // projection head removed
  std::vector<double> epoch_loss;  // mean NT-Xent per epoch, before each update
  double initial_loss = 0.0;       // NT-Xent on fixed evaluation views at initialization
  double final_loss = 0.0;         // same views after training
};

/// NT-Xent pretraining on augmented pairs. With an enhancer, every image is
/// passed through the DCE model first. Deterministic in config.seed.
///
/// Throws ParameterError for fewer than two images.
PretrainResult pretrain_encoder(const std::vector<GrayImage>& corpus, const EncoderSpec& spec,
                                const PretrainConfig& config, const DceModel* enhancer = nullptr,
                                CurveShift shift = {});

}  // namespace lungforge
