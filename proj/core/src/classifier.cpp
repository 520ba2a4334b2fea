#include "lungforge/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lungforge/errors.hpp"
#include "lungforge/optim.hpp"
#include "lungforge/parallel.hpp"
#include "lungforge/rng.hpp"

namespace lungforge {

namespace {

constexpr std::uint64_t kShuffleStream = 31;

void check_labels(std::span<const int> labels, std::size_t n) {
  if (labels.size() != n) throw_dimension("labels do not match the number of samples");
  bool pos = false;
  bool neg = false;
  for (int l : labels) {
    if (l != 0 && l != 1) throw_parameter("labels must be 0 or 1");
    pos |= l == 1;
    neg |= l == 0;
  }
  if (!pos || !neg) throw_parameter("classifier training needs both classes");
}

double logit_of(const ModelParams& head, std::span<const double> f) {
  const auto w = head.values("head.weight");
  double z = head.values("head.bias")[0];
  for (std::size_t i = 0; i < f.size(); ++i) z += w[i] * f[i];
  return z;
}

/// Binary cross-entropy with logits: softplus(z) - y z.
double bce(double z, int y) {
  const double sp = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return sp - y * z;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

ModelParams zero_head(int dim) {
  ModelParams h;
  h.add("head.weight", {1, dim});
  h.add("head.bias", {1});
  return h;
}

void add_head_grad(ModelParams& g, std::span<const double> f, double dz) {
  auto w = g.values("head.weight");
  for (std::size_t i = 0; i < f.size(); ++i) w[i] += dz * f[i];
  g.values("head.bias")[0] += dz;
}

template <typename Fn>
void for_each_batch(std::size_t n, int batch_size, int epochs, std::uint64_t seed, Fn fn) {
  Rng rng(derive_seed(seed, kShuffleStream));
  std::vector<std::size_t> order(n);
  const auto bs = static_cast<std::size_t>(batch_size);
  for (int e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order.begin(), order.end());
    for (std::size_t b0 = 0; b0 < n; b0 += bs) {
      fn(e, std::span<const std::size_t>(order).subspan(b0, std::min(bs, n - b0)));
    }
  }
}

}  // namespace

FineTuneMode parse_fine_tune_mode(const std::string& s) {
  if (s == "linear") return FineTuneMode::Linear;
  if (s == "full") return FineTuneMode::Full;
  throw_parameter("fine-tune mode must be 'linear' or 'full', got '" + s + "'");
}

std::string to_string(FineTuneMode m) { return m == FineTuneMode::Linear ? "linear" : "full"; }

void ClassifierConfig::validate() const {
  if (epochs < 0) throw_parameter("classifier epochs must be non-negative");
  if (batch_size < 1) throw_parameter("classifier batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw_parameter("learning rate must be positive");
  if (!(weight_decay >= 0.0)) throw_parameter("weight decay must be non-negative");
}

Classifier make_classifier(Encoder encoder) {
  drop_projection(encoder);
  const int dim = encoder.spec.feature_dim();
  return {std::move(encoder), zero_head(dim)};
}

double predict_logit(const Classifier& c, PlaneView img) {
  return logit_of(c.head, encode(c.encoder, img));
}

std::vector<double> predict(const Classifier& c, const std::vector<GrayImage>& images) {
  std::vector<double> out(images.size());
  parallel_for(images.size(), [&](std::size_t i) { out[i] = sigmoid(predict_logit(c, images[i].view())); });
  return out;
}

ModelParams train_linear_head(const std::vector<std::vector<double>>& features,
                              std::span<const int> labels, const ClassifierConfig& config,
                              const ModelParams* init) {
  config.validate();
  check_labels(labels, features.size());
  const int dim = static_cast<int>(features.front().size());
  ModelParams head = init != nullptr ? *init : zero_head(dim);
  AdamW opt(head, {config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
  for_each_batch(features.size(), config.batch_size, config.epochs, config.seed,
                 [&](int, std::span<const std::size_t> batch) {
                   ModelParams g = head.zeros_like();
                   const double inv = 1.0 / static_cast<double>(batch.size());
                   for (std::size_t i : batch) {
                     const double z = logit_of(head, features[i]);
                     add_head_grad(g, features[i], (sigmoid(z) - labels[i]) * inv);
                   }
                   opt.step(head, g);
                   head.round_to_float();
                 });
  return head;
}

ClassifierResult train_classifier(const Classifier& init, const std::vector<GrayImage>& images,
                                  std::span<const int> labels, const ClassifierConfig& config) {
  config.validate();
  check_labels(labels, images.size());
  ClassifierResult result{init, {}};
  Classifier& model = result.model;
  const std::size_t n = images.size();

  if (config.mode == FineTuneMode::Linear) {
    std::vector<std::vector<double>> feats(n);
    parallel_for(n, [&](std::size_t i) { feats[i] = encode(model.encoder, images[i].view()); });
    for (int e = 0; e < config.epochs; ++e) {
      // Report the loss of the head each epoch starts from.
      double loss = 0.0;
      for (std::size_t i = 0; i < n; ++i) loss += bce(logit_of(model.head, feats[i]), labels[i]);
      result.epoch_loss.push_back(loss / static_cast<double>(n));
      ClassifierConfig one = config;
      one.epochs = 1;
      one.seed = derive_seed(config.seed, static_cast<std::uint64_t>(e));
      model.head = train_linear_head(feats, labels, one, &model.head);
    }
    return result;
  }

  AdamW enc_opt(model.encoder.params, {config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
  AdamW head_opt(model.head, {config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
  double epoch_loss = 0.0;
  int current_epoch = 0;
  struct Slot {
    double loss = 0.0;
    ModelParams enc;
    ModelParams head;
  };
  for_each_batch(n, config.batch_size, config.epochs, config.seed,
                 [&](int e, std::span<const std::size_t> batch) {
                   if (e != current_epoch) {
                     result.epoch_loss.push_back(epoch_loss / static_cast<double>(n));
                     epoch_loss = 0.0;
                     current_epoch = e;
                   }
                   const double inv = 1.0 / static_cast<double>(batch.size());
                   std::vector<Slot> slots(batch.size());
                   parallel_for(batch.size(), [&](std::size_t k) {
                     const std::size_t i = batch[k];
                     EncoderCache cache;
                     const auto f = encode(model.encoder, images[i].view(), &cache);
                     const double z = logit_of(model.head, f);
                     const double dz = (sigmoid(z) - labels[i]) * inv;
                     Slot& s = slots[k];
                     s.loss = bce(z, labels[i]);
                     s.head = model.head.zeros_like();
                     add_head_grad(s.head, f, dz);
                     const auto w = model.head.values("head.weight");
                     std::vector<double> gf(w.begin(), w.end());
                     for (double& v : gf) v *= dz;
                     s.enc = model.encoder.params.zeros_like();
                     encode_backward(model.encoder, cache, gf, s.enc);
                   });
                   ModelParams ge = model.encoder.params.zeros_like();
                   ModelParams gh = model.head.zeros_like();
                   for (const auto& s : slots) {
                     epoch_loss += s.loss;
                     ge.add_scaled(s.enc, 1.0);
                     gh.add_scaled(s.head, 1.0);
                   }
                   if (!ge.all_finite() || !gh.all_finite()) {
                     throw DivergenceError("non-finite classifier gradient");
                   }
                   enc_opt.step(model.encoder.params, ge);
                   head_opt.step(model.head, gh);
                   model.encoder.params.round_to_float();
                   model.head.round_to_float();
                 });
  if (config.epochs > 0) result.epoch_loss.push_back(epoch_loss / static_cast<double>(n));
  return result;
}

}  // namespace lungforge
