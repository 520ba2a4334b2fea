#include "lungforge/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lungforge/dce_trainer.hpp"
#include "lungforge/errors.hpp"
#include "lungforge/ntxent.hpp"
#include "lungforge/optim.hpp"
#include "lungforge/parallel.hpp"
#include "lungforge/rng.hpp"

namespace lungforge {

namespace {

constexpr std::uint64_t kInitStream = 11;
constexpr std::uint64_t kShuffleStream = 12;
constexpr std::uint64_t kEvalStream = 13;
constexpr std::uint64_t kEpochStream = 14;

struct ViewPass {
  EncoderCache enc;
  ProjectionCache proj;
  std::vector<double> features;
  std::vector<double> z;
};

ViewPass run_view(const Encoder& enc, const GrayImage& view) {
  ViewPass p;
  p.features = encode(enc, view.view(), &p.enc);
  p.z = project(enc, p.features, &p.proj);
  return p;
}

struct BatchResult {
  double loss = 0.0;
  ModelParams grad;
};

/// NT-Xent over `idx` with views drawn from `seed_of(i)`; gradient optional.
template <typename SeedFn>
BatchResult batch_step(const Encoder& enc, const std::vector<GrayImage>& images,
                       std::span<const std::size_t> idx, const AugmentConfig& aug, double tau,
                       SeedFn seed_of, bool with_grad) {
  const std::size_t n = idx.size();
  std::vector<ViewPass> passes(2 * n);
  parallel_for(n, [&](std::size_t k) {
    auto [a, b] = two_views(images[idx[k]], seed_of(idx[k]), aug);
    passes[2 * k] = run_view(enc, a);
    passes[2 * k + 1] = run_view(enc, b);
  });
  const auto dim = static_cast<std::size_t>(enc.spec.projection_dim);
  std::vector<double> zs;
  zs.reserve(2 * n * dim);
  for (const auto& p : passes) zs.insert(zs.end(), p.z.begin(), p.z.end());
  const EmbeddingBatch batch(2 * n, dim, std::move(zs));
  if (!with_grad) return {ntxent_batch_loss(batch, tau), {}};

  const NtXentGrad lg = ntxent_batch_loss_grad(batch, tau);
  std::vector<ModelParams> slots(2 * n);
  parallel_for(2 * n, [&](std::size_t r) {
    slots[r] = enc.params.zeros_like();
    const auto& p = passes[r];
    const std::span<const double> gz(lg.grad.data() + r * dim, dim);
    const auto gf = project_backward(enc, p.features, p.proj, gz, slots[r]);
    encode_backward(enc, p.enc, gf, slots[r]);
  });
  BatchResult out{lg.loss, enc.params.zeros_like()};
  for (const auto& s : slots) out.grad.add_scaled(s, 1.0);
  return out;
}

double evaluation_loss(const Encoder& enc, const std::vector<GrayImage>& images,
                       const PretrainConfig& cfg, const AugmentConfig& aug) {
  std::vector<std::size_t> idx(images.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  double total = 0.0;
  for (std::size_t b0 = 0; b0 < idx.size();) {
    // A trailing single image has no negatives; fold it into this batch.
    std::size_t n = std::min(bs, idx.size() - b0);
    if (idx.size() - (b0 + n) == 1) ++n;
    const auto r = batch_step(enc, images, std::span(idx).subspan(b0, n), aug, cfg.tau,
                              [&](std::size_t i) { return derive_seed(derive_seed(cfg.seed, kEvalStream), i); },
                              false);
    total += r.loss * static_cast<double>(n);
    b0 += n;
  }
  return total / static_cast<double>(idx.size());
}

}  // namespace

void PretrainConfig::validate() const {
  if (epochs < 0) throw_parameter("epochs must be non-negative");
  if (batch_size < 2) throw_parameter("contrastive batch_size must be at least 2");
  if (!(tau > 0.0)) throw_parameter("tau must be positive");
  if (!(learning_rate > 0.0) || !(weight_decay >= 0.0) || !(lr_decay > 0.0 && lr_decay <= 1.0)) {
    throw_parameter("learning rate, weight decay or decay factor is invalid");
  }
  if (force) return;
  if (learning_rate < 1e-6 || learning_rate > 1e-3) throw_parameter("learning_rate outside [1e-6, 1e-3]");
  if (weight_decay < 1e-5 || weight_decay > 1e-2) throw_parameter("weight_decay outside [1e-5, 1e-2]");
  if (lr_decay < 0.6) throw_parameter("lr_decay outside [0.6, 1]");
  if (batch_size != 32 && batch_size != 64 && batch_size != 128) {
    throw_parameter("batch_size must be 32, 64 or 128; pass force to override");
  }
}

std::pair<GrayImage, GrayImage> two_views(const GrayImage& img, std::uint64_t seed,
                                          const AugmentConfig& config) {
  return {augment(img, derive_seed(seed, 0), config), augment(img, derive_seed(seed, 1), config)};
}

PretrainResult pretrain_encoder(const std::vector<GrayImage>& corpus, const EncoderSpec& spec,
                                const PretrainConfig& config, const DceModel* enhancer,
                                CurveShift shift) {
  config.validate();
  spec.validate();
  if (corpus.size() < 2) throw_parameter("contrastive pretraining needs at least two images");
  const std::vector<GrayImage> images = enhancer != nullptr ? enhance_images(*enhancer, corpus, shift) : corpus;
  AugmentConfig aug = config.augment;
  aug.output_width = aug.output_height = spec.input_size;

  Encoder enc = init_encoder(spec, derive_seed(config.seed, kInitStream), true);
  PretrainResult result;
  result.initial_loss = evaluation_loss(enc, images, config, aug);

  AdamW opt(enc.params, {config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
  Rng shuffle_rng(derive_seed(config.seed, kShuffleStream));
  std::vector<std::size_t> order(images.size());
  const auto bs = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order.begin(), order.end());
    const std::uint64_t epoch_seed = derive_seed(derive_seed(config.seed, kEpochStream), epoch);
    double epoch_loss = 0.0;
    for (std::size_t b0 = 0; b0 < order.size();) {
      std::size_t n = std::min(bs, order.size() - b0);
      if (order.size() - (b0 + n) == 1) ++n;
      auto r = batch_step(enc, images, std::span(order).subspan(b0, n), aug, config.tau,
                          [&](std::size_t i) { return derive_seed(epoch_seed, i); }, true);
      epoch_loss += r.loss * static_cast<double>(n);
      if (!std::isfinite(r.loss) || !r.grad.all_finite()) {
        throw DivergenceError("non-finite contrastive loss in epoch " + std::to_string(epoch + 1));
      }
      opt.step(enc.params, r.grad);
      enc.params.round_to_float();
      b0 += n;
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    opt.set_learning_rate(opt.learning_rate() * config.lr_decay);
  }
  result.final_loss = evaluation_loss(enc, images, config, aug);
  drop_projection(enc);
  result.encoder = std::move(enc);
  return result;
}

}  // namespace lungforge
