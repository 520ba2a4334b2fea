#include "lungforge/unet.hpp"

#include <cmath>
#include <string>

#include "lungforge/errors.hpp"
#include "lungforge/rng.hpp"

namespace lungforge {

namespace {

using nn::FeatureMap;

std::string enc(int l, char c) { return "enc" + std::to_string(l) + ".conv_" + c; }
std::string dec(int l, const char* c) { return "dec" + std::to_string(l) + "." + c; }
std::string mid(char c) { return std::string("mid.conv_") + c; }
constexpr const char* kHead = "head";

void add_conv(ModelParams& p, const std::string& name, int cin, int cout, int k) {
  p.add(name + ".weight", {cout, cin, k, k});
  p.add(name + ".bias", {cout});
}

struct Forward {
  const DceModel& model;
  UNetCache* cache;

  FeatureMap conv(const FeatureMap& in, const std::string& name, int cout, int k) const {
    FeatureMap pre = nn::conv2d(in, model.params.values(name + ".weight"),
                                model.params.values(name + ".bias"), cout, k);
    if (cache != nullptr) cache->convs.push_back({in, pre});
    return pre;
  }
  FeatureMap conv_act(const FeatureMap& in, const std::string& name, int cout) const {
    return nn::leaky_relu(conv(in, name, cout, 3), model.config.leaky_slope);
  }
};

struct Backward {
  const DceModel& model;
  const UNetCache& cache;
  ModelParams& grad;
  std::size_t next;  // index one past the next conv record to consume

  // Consumes the next record (in reverse order); returns dL/dinput.
  FeatureMap conv(const std::string& name, int cout, int k, const FeatureMap& grad_pre,
                  bool need_input_grad = true) {
    const auto& rec = cache.convs.at(--next);
    FeatureMap gin;
    nn::conv2d_backward(rec.input, model.params.values(name + ".weight"), cout, k, grad_pre,
                        need_input_grad ? &gin : nullptr, grad.values(name + ".weight"),
                        grad.values(name + ".bias"));
    return gin;
  }
  FeatureMap conv_act(const std::string& name, int cout, const FeatureMap& grad_out,
                      bool need_input_grad = true) {
    const auto& rec = cache.convs.at(next - 1);
    const FeatureMap gpre = nn::leaky_relu_backward(rec.pre, grad_out, model.config.leaky_slope);
    return conv(name, cout, 3, gpre, need_input_grad);
  }
};

void check_input(const UNetConfig& cfg, PlaneView img) {
  const int div = 1 << cfg.levels;
  if (img.width % div != 0 || img.height % div != 0 || img.width < div || img.height < div) {
    throw_dimension("U-Net input " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                    " is not divisible by " + std::to_string(div));
  }
}

}  // namespace

void UNetConfig::validate() const {
  if (levels < 1 || levels > 8) throw_parameter("U-Net levels must lie in [1, 8]");
  if (base_channels < 1) throw_parameter("U-Net base_channels must be positive");
  if (!(output_epsilon > 0.0)) throw_parameter("U-Net output epsilon must be positive");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw_parameter("leaky slope must lie in [0, 1)");
}

DceModel init_dce_model(const UNetConfig& config, std::uint64_t seed) {
  config.validate();
  DceModel model{config, {}};
  auto& p = model.params;
  const int b = config.base_channels;
  int cin = 1;
  for (int l = 0; l < config.levels; ++l) {
    const int c = b << l;
    add_conv(p, enc(l, 'a'), cin, c, 3);
    add_conv(p, enc(l, 'b'), c, c, 3);
    cin = c;
  }
  const int cm = b << config.levels;
  add_conv(p, mid('a'), cin, cm, 3);
  add_conv(p, mid('b'), cm, cm, 3);
  for (int l = config.levels - 1; l >= 0; --l) {
    const int c = b << l;
    add_conv(p, dec(l, "up"), c * 2, c, 3);
    add_conv(p, dec(l, "conv_a"), c * 2, c, 3);
    add_conv(p, dec(l, "conv_b"), c, c, 3);
  }
  add_conv(p, kHead, b, 1, 1);

  Rng rng(seed);
  for (auto& t : p.tensors()) {
    if (t.shape.size() != 4) continue;  // biases stay zero
    const int fan_in = t.shape[1] * t.shape[2] * t.shape[3];
    const double bound = std::sqrt(6.0 / fan_in);
    for (double& v : t.values) v = rng.uniform(-bound, bound);
  }
  p.round_to_float();
  return model;
}

TransformMatrix forward(const DceModel& model, PlaneView img, UNetCache* cache) {
  const auto& cfg = model.config;
  check_input(cfg, img);
  if (cache != nullptr) *cache = UNetCache{};
  Forward f{model, cache};

  FeatureMap x(1, img.height, img.width);
  std::copy(img.values.begin(), img.values.end(), x.data.begin());

  std::vector<FeatureMap> skips;
  const int b = cfg.base_channels;
  for (int l = 0; l < cfg.levels; ++l) {
    const int c = b << l;
    x = f.conv_act(x, enc(l, 'a'), c);
    x = f.conv_act(x, enc(l, 'b'), c);
    skips.push_back(x);
    std::vector<std::size_t> argmax;
    FeatureMap pooled = nn::max_pool2(x, argmax);
    if (cache != nullptr) {
      cache->pool_argmax.push_back(std::move(argmax));
      cache->pool_inputs.push_back(FeatureMap(x.channels, x.height, x.width));
      cache->skip_channels.push_back(c);
    }
    x = std::move(pooled);
  }
  const int cm = b << cfg.levels;
  x = f.conv_act(x, mid('a'), cm);
  x = f.conv_act(x, mid('b'), cm);
  for (int l = cfg.levels - 1; l >= 0; --l) {
    const int c = b << l;
    const FeatureMap up = f.conv_act(nn::upsample2(x), dec(l, "up"), c);
    x = f.conv_act(nn::concat_channels(up, skips[l]), dec(l, "conv_a"), c);
    x = f.conv_act(x, dec(l, "conv_b"), c);
  }
  const FeatureMap out = f.conv(x, kHead, 1, 1);

  Plane alphas(img.width, img.height);
  auto dst = alphas.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = nn::softplus(out.data[i]) + cfg.output_epsilon;
  if (cache != nullptr) {
    cache->width = img.width;
    cache->height = img.height;
  }
  return TransformMatrix(std::move(alphas));
}

ModelParams backward(const DceModel& model, const UNetCache& cache, PlaneView upstream) {
  const auto& cfg = model.config;
  if (upstream.width != cache.width || upstream.height != cache.height) {
    throw_dimension("upstream gradient shape differs from the forward input");
  }
  ModelParams grad = model.params.zeros_like();
  Backward bw{model, cache, grad, cache.convs.size()};

  // Head: softplus'(z) = logistic(z).
  const auto& head = cache.convs.back();
  FeatureMap gpre(1, cache.height, cache.width);
  for (std::size_t i = 0; i < gpre.data.size(); ++i) {
    gpre.data[i] = upstream.values[i] * nn::logistic(head.pre.data[i]);
  }
  FeatureMap gx = bw.conv(kHead, 1, 1, gpre);

  const int b = cfg.base_channels;
  std::vector<FeatureMap> gskip(static_cast<std::size_t>(cfg.levels));
  for (int l = 0; l < cfg.levels; ++l) {
    const int c = b << l;
    gx = bw.conv_act(dec(l, "conv_b"), c, gx);
    const FeatureMap gcat = bw.conv_act(dec(l, "conv_a"), c, gx);
    FeatureMap gup;
    nn::split_channels(gcat, c, gup, gskip[l]);
    gx = nn::upsample2_backward(bw.conv_act(dec(l, "up"), c, gup));
  }
  const int cm = b << cfg.levels;
  gx = bw.conv_act(mid('b'), cm, gx);
  gx = bw.conv_act(mid('a'), cm, gx);
  for (int l = cfg.levels - 1; l >= 0; --l) {
    const int c = b << l;
    FeatureMap gs = nn::max_pool2_backward(cache.pool_inputs[l], cache.pool_argmax[l], gx);
    for (std::size_t i = 0; i < gs.data.size(); ++i) gs.data[i] += gskip[l].data[i];
    gx = bw.conv_act(enc(l, 'b'), c, gs);
    gx = bw.conv_act(enc(l, 'a'), c, gx, /*need_input_grad=*/l > 0);
  }
  return grad;
}

ModelParams backward(const DceModel& model, PlaneView img, PlaneView upstream) {
  UNetCache cache;
  forward(model, img, &cache);
  return backward(model, cache, upstream);
}

void save_dce_model(const std::filesystem::path& path, const DceModel& model,
                    const std::string& metadata_json) {
  ByteWriter cfg;
  cfg.u32(static_cast<std::uint32_t>(model.config.levels));
  cfg.u32(static_cast<std::uint32_t>(model.config.base_channels));
  cfg.f64(model.config.leaky_slope);
  cfg.f64(model.config.output_epsilon);
  write_checkpoint(path, Checkpoint{kDceMagic, std::move(cfg).take(), metadata_json, model.params});
}

DceModel load_dce_model(const std::filesystem::path& path, std::string* metadata_json) {
  Checkpoint ckpt = read_checkpoint(path, kDceMagic);
  ByteReader r(ckpt.config);
  DceModel model;
  model.config.levels = static_cast<int>(r.u32());
  model.config.base_channels = static_cast<int>(r.u32());
  model.config.leaky_slope = r.f64();
  model.config.output_epsilon = r.f64();
  model.config.validate();
  const DceModel reference = init_dce_model(model.config, 0);
  const auto& want = reference.params.tensors();
  const auto& got = ckpt.params.tensors();
  if (want.size() != got.size()) throw FormatError("checkpoint tensors do not match its config");
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i].name != got[i].name || want[i].shape != got[i].shape) {
      throw FormatError("checkpoint tensor " + got[i].name + " does not match its config");
    }
  }
  model.params = std::move(ckpt.params);
  if (metadata_json != nullptr) *metadata_json = std::move(ckpt.metadata);
  return model;
}

}  // namespace lungforge
