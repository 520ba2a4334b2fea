#include "lungforge/dce_trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>

#include <nlohmann/json.hpp>

#include "lungforge/errors.hpp"
#include "lungforge/image_io.hpp"
#include "lungforge/image_ops.hpp"
#include "lungforge/optim.hpp"
#include "lungforge/parallel.hpp"
#include "lungforge/rng.hpp"

namespace lungforge {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kKmeansStream = 3;

void check_range(const char* name, double v, double lo, double hi) {
  if (!(v >= lo && v <= hi)) {
    throw_parameter(std::string(name) + " = " + std::to_string(v) + " outside [" +
                    std::to_string(lo) + ", " + std::to_string(hi) + "]; pass force to override");
  }
}

struct ImageGrad {
  LossBreakdown loss;
  ModelParams grad;
};

ImageGrad image_gradient(const DceModel& model, const GrayImage& img,
                         const AdaptiveLossParams& params, const TrainConfig& cfg) {
  UNetCache cache;
  const TransformMatrix a = forward(model, img.view(), &cache);
  const PlaneView av = a.view();
  const PlaneView xv = img.view();
  const DceLossGrad lg = dce_total_loss_grad({&av, 1}, {&xv, 1}, {&params, 1}, cfg.weights,
                                             cfg.kernel_size, cfg.temperature, cfg.shift);
  return {lg.loss, backward(model, cache, lg.grad_alpha.front().view())};
}

void accumulate(LossBreakdown& sum, const LossBreakdown& x, double w) {
  sum.adaptive += w * x.adaptive;
  sum.local_conflict += w * x.local_conflict;
  sum.region_conflict += w * x.region_conflict;
  sum.total += w * x.total;
}

nlohmann::json breakdown_json(const LossBreakdown& b) {
  return {{"adaptive", b.adaptive},
          {"local_conflict", b.local_conflict},
          {"region_conflict", b.region_conflict},
          {"total", b.total}};
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw_parameter("epochs must be non-negative");
  if (batch_size < 1) throw_parameter("batch_size must be positive");
  if (!(ts > 0.0)) throw_parameter("ts must be positive");
  if (!(temperature > 0.0)) throw_parameter("temperature must be positive");
  if (kernel_size < 1) throw_parameter("kernel_size must be positive");
  if (weights.adaptive < 0 || weights.local < 0 || weights.region < 0) {
    throw_parameter("loss weights must be non-negative");
  }
  if (!(learning_rate > 0.0) || !(weight_decay >= 0.0) || !(lr_decay > 0.0 && lr_decay <= 1.0)) {
    throw_parameter("learning rate, weight decay or decay factor is invalid");
  }
  if (!std::isfinite(shift.x_shift) || !std::isfinite(shift.y_shift)) {
    throw_parameter("curve shifts must be finite");
  }
  unet.validate();
  if (force) return;
  check_range("learning_rate", learning_rate, 1e-6, 1e-3);
  check_range("weight_decay", weight_decay, 1e-5, 1e-2);
  check_range("lr_decay", lr_decay, 0.6, 1.0);
  if (batch_size != 32 && batch_size != 64 && batch_size != 128) {
    throw_parameter("batch_size must be 32, 64 or 128; pass force to override");
  }
}

std::string TrainReport::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["image_count"] = image_count;
  j["steps"] = steps;
  j["epochs_run"] = epochs.size();
  j["checkpoint"] = checkpoint_path;
  auto& arr = j["epochs"] = nlohmann::json::array();
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    auto rec = breakdown_json(epochs[e].mean);
    rec["epoch"] = e + 1;
    rec["learning_rate"] = epochs[e].learning_rate;
    arr.push_back(std::move(rec));
  }
  return j.dump(2) + "\n";
}

TrainResult train_dce(const std::vector<GrayImage>& corpus, const TrainConfig& config,
                      DceModel* last_good, const EpochCallback& on_epoch) {
  config.validate();
  if (corpus.empty()) throw_parameter("training corpus is empty");
  for (const auto& img : corpus) {
    if (img.width() != corpus.front().width() || img.height() != corpus.front().height()) {
      throw_dimension("training images must share one size");
    }
  }
  const auto start = std::chrono::steady_clock::now();

  TrainResult result{init_dce_model(config.unet, derive_seed(config.seed, kInitStream)), {}};
  auto& model = result.model;
  auto& report = result.report;
  report.seed = config.seed;
  report.image_count = corpus.size();
  if (config.epochs == 0) return result;

  std::vector<AdaptiveLossParams> params(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t i) {
    params[i] = AdaptiveLossParams::from_image(corpus[i].view(), config.ts,
                                               derive_seed(config.seed, kKmeansStream + i));
  });

  AdamW opt(model.params, {config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
  Rng shuffle_rng(derive_seed(config.seed, kShuffleStream));
  std::vector<std::size_t> order(corpus.size());
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order.begin(), order.end());
    EpochRecord record;
    record.learning_rate = opt.learning_rate();
    record.mean.weights = config.weights;

    for (std::size_t b0 = 0; b0 < order.size(); b0 += batch) {
      const std::size_t n = std::min(batch, order.size() - b0);
      std::vector<ImageGrad> slots(n);
      parallel_for(n, [&](std::size_t i) {
        const std::size_t idx = order[b0 + i];
        slots[i] = image_gradient(model, corpus[idx], params[idx], config);
      });
      ModelParams grad = model.params.zeros_like();
      for (const auto& s : slots) {
        accumulate(record.mean, s.loss, 1.0 / static_cast<double>(corpus.size()));
        grad.add_scaled(s.grad, 1.0 / static_cast<double>(n));
        if (!std::isfinite(s.loss.total)) {
          if (last_good != nullptr) *last_good = model;
          throw DivergenceError("non-finite loss in epoch " + std::to_string(epoch + 1));
        }
      }
      if (!grad.all_finite()) {
        if (last_good != nullptr) *last_good = model;
        throw DivergenceError("non-finite gradient in epoch " + std::to_string(epoch + 1));
      }
      DceModel before = model;
      opt.step(model.params, grad);
      model.params.round_to_float();
      if (!model.params.all_finite()) {
        if (last_good != nullptr) *last_good = std::move(before);
        throw DivergenceError("non-finite parameters in epoch " + std::to_string(epoch + 1));
      }
    }
    report.epochs.push_back(record);
    if (on_epoch) on_epoch(epoch + 1, record);
    opt.set_learning_rate(opt.learning_rate() * config.lr_decay);
  }
  report.steps = opt.steps();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::vector<GrayImage> enhance_images(const DceModel& model, const std::vector<GrayImage>& images,
                                      CurveShift shift) {
  std::vector<GrayImage> out(images.size());
  parallel_for(images.size(), [&](std::size_t i) {
    out[i] = enhance(images[i], forward(model, images[i].view()), shift);
  });
  return out;
}

std::filesystem::path enhanced_name(const std::filesystem::path& source) {
  return source.stem().string() + "-dce.png";
}

EnhanceResult enhance_files(const DceModel& model, const std::vector<std::filesystem::path>& sources,
                            const std::filesystem::path& out_dir, CurveShift shift,
                            const std::filesystem::path& mask_dir) {
  EnhanceResult result;
  std::filesystem::create_directories(out_dir);
  struct Slot {
    std::optional<EnhancedFile> file;
    std::optional<FileError> error;
    std::vector<std::string> log;
  };
  std::vector<Slot> slots(sources.size());
  parallel_for(sources.size(), [&](std::size_t i) {
    const auto& src = sources[i];
    auto& slot = slots[i];
    try {
      GrayImage img = load_image(src);
      EnhancedFile rec{src, out_dir / enhanced_name(src), 0.0, 0.0, false};
      if (!mask_dir.empty()) {
        const auto mask_path = mask_dir / src.filename();
        if (std::filesystem::exists(mask_path)) {
          img = inpaint_mask(img, load_mask(mask_path));
          rec.inpainted = true;
          slot.log.push_back("inpaint " + src.filename().string());
        }
      }
      const GrayImage enhanced = enhance(img, forward(model, img.view()), shift);
      slot.log.push_back("enhance " + src.filename().string());
      rec.entropy_before = histogram_entropy(histogram(img.view(), kEntropyBins));
      rec.entropy_after = histogram_entropy(histogram(enhanced.view(), kEntropyBins));
      save_png16(rec.output, enhanced);
      slot.file = std::move(rec);
    } catch (const Error& e) {
      slot.error = FileError{src, e.what()};
      slot.log.push_back("error " + src.filename().string());
    }
  });
  for (auto& s : slots) {
    if (s.file) result.files.push_back(std::move(*s.file));
    if (s.error) result.errors.push_back(std::move(*s.error));
    for (auto& line : s.log) result.log.push_back(std::move(line));
  }
  return result;
}

}  // namespace lungforge
