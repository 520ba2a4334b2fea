#include "lungforge/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "lungforge/errors.hpp"
#include "lungforge/rng.hpp"

namespace lungforge {

namespace {

std::string stage_name(std::size_t s) { return "stage" + std::to_string(s) + ".conv"; }
constexpr const char* kFc1 = "proj.fc1";
constexpr const char* kFc2 = "proj.fc2";

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

bool is_encoder_tensor(std::string_view name) {
  return starts_with(name, "stage") || starts_with(name, kProjectionPrefix);
}

}  // namespace

void EncoderSpec::validate() const {
  if (channels.empty()) throw_parameter("encoder needs at least one stage");
  if (std::any_of(channels.begin(), channels.end(), [](int c) { return c < 1; })) {
    throw_parameter("encoder channel counts must be positive");
  }
  if (projection_hidden < 1 || projection_dim < 1) throw_parameter("projection sizes must be positive");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw_parameter("leaky slope must lie in [0, 1)");
  const int div = 1 << channels.size();
  if (input_size < div || input_size % div != 0) {
    throw_parameter("encoder input_size must be a positive multiple of " + std::to_string(div));
  }
}

bool Encoder::has_projection() const { return params.contains(std::string(kFc1) + ".weight"); }

Encoder init_encoder(const EncoderSpec& spec, std::uint64_t seed, bool with_projection) {
  spec.validate();
  Encoder enc{spec, {}};
  int cin = 1;
  for (std::size_t s = 0; s < spec.channels.size(); ++s) {
    const int c = spec.channels[s];
    enc.params.add(stage_name(s) + ".weight", {c, cin, 3, 3});
    enc.params.add(stage_name(s) + ".bias", {c});
    cin = c;
  }
  if (with_projection) {
    enc.params.add(std::string(kFc1) + ".weight", {spec.projection_hidden, spec.feature_dim()});
    enc.params.add(std::string(kFc1) + ".bias", {spec.projection_hidden});
    enc.params.add(std::string(kFc2) + ".weight", {spec.projection_dim, spec.projection_hidden});
    enc.params.add(std::string(kFc2) + ".bias", {spec.projection_dim});
  }
  Rng rng(seed);
  for (auto& t : enc.params.tensors()) {
    if (t.shape.size() < 2) continue;
    int fan_in = 1;
    for (std::size_t d = 1; d < t.shape.size(); ++d) fan_in *= t.shape[d];
    const double bound = std::sqrt(6.0 / fan_in);
    for (double& v : t.values) v = rng.uniform(-bound, bound);
  }
  enc.params.round_to_float();
  return enc;
}

void drop_projection(Encoder& enc) { enc.params.erase_prefix(kProjectionPrefix); }

std::vector<double> encode(const Encoder& enc, PlaneView img, EncoderCache* cache) {
  const auto& spec = enc.spec;
  if (img.width != spec.input_size || img.height != spec.input_size) {
    throw_dimension("encoder expects " + std::to_string(spec.input_size) + "x" +
                    std::to_string(spec.input_size) + " input, got " + std::to_string(img.width) +
                    "x" + std::to_string(img.height));
  }
  if (cache != nullptr) *cache = EncoderCache{};
  nn::FeatureMap x(1, img.height, img.width);
  std::copy(img.values.begin(), img.values.end(), x.data.begin());
  for (std::size_t s = 0; s < spec.channels.size(); ++s) {
    const std::string name = stage_name(s);
    nn::FeatureMap pre = nn::conv2d(x, enc.params.values(name + ".weight"),
                                    enc.params.values(name + ".bias"), spec.channels[s], 3);
    nn::FeatureMap act = nn::leaky_relu(pre, spec.leaky_slope);
    std::vector<std::size_t> argmax;
    nn::FeatureMap pooled = nn::max_pool2(act, argmax);
    if (cache != nullptr) {
      cache->convs.push_back({std::move(x), std::move(pre)});
      cache->pool_argmax.push_back(std::move(argmax));
      cache->pool_shapes.emplace_back(act.channels, act.height, act.width);
    }
    x = std::move(pooled);
  }
  auto features = nn::global_average_pool(x);
  if (cache != nullptr) cache->last = std::move(x);
  return features;
}

void encode_backward(const Encoder& enc, const EncoderCache& cache,
                     std::span<const double> grad_features, ModelParams& grad) {
  const auto& spec = enc.spec;
  nn::FeatureMap g = nn::global_average_pool_backward(cache.last, grad_features);
  for (std::size_t s = spec.channels.size(); s-- > 0;) {
    const std::string name = stage_name(s);
    const auto& rec = cache.convs[s];
    g = nn::max_pool2_backward(cache.pool_shapes[s], cache.pool_argmax[s], g);
    const nn::FeatureMap gpre = nn::leaky_relu_backward(rec.pre, g, spec.leaky_slope);
    nn::FeatureMap gin;
    nn::conv2d_backward(rec.input, enc.params.values(name + ".weight"), spec.channels[s], 3, gpre,
                        s > 0 ? &gin : nullptr, grad.values(name + ".weight"),
                        grad.values(name + ".bias"));
    g = std::move(gin);
  }
}

std::vector<double> project(const Encoder& enc, std::span<const double> features,
                            ProjectionCache* cache) {
  if (!enc.has_projection()) throw_parameter("encoder has no projection head");
  const auto& spec = enc.spec;
  std::vector<double> pre = nn::linear(features, enc.params.values(std::string(kFc1) + ".weight"),
                                       enc.params.values(std::string(kFc1) + ".bias"),
                                       spec.projection_hidden);
  std::vector<double> hidden(pre);
  for (double& v : hidden) v = v > 0.0 ? v : spec.leaky_slope * v;
  auto z = nn::linear(hidden, enc.params.values(std::string(kFc2) + ".weight"),
                      enc.params.values(std::string(kFc2) + ".bias"), spec.projection_dim);
  if (cache != nullptr) cache->hidden_pre = std::move(pre);
  return z;
}

std::vector<double> project_backward(const Encoder& enc, std::span<const double> features,
                                     const ProjectionCache& cache, std::span<const double> grad_z,
                                     ModelParams& grad) {
  const auto& spec = enc.spec;
  std::vector<double> hidden(cache.hidden_pre);
  for (double& v : hidden) v = v > 0.0 ? v : spec.leaky_slope * v;
  std::vector<double> gh = nn::linear_backward(
      hidden, enc.params.values(std::string(kFc2) + ".weight"), spec.projection_dim, grad_z,
      grad.values(std::string(kFc2) + ".weight"), grad.values(std::string(kFc2) + ".bias"));
  for (std::size_t i = 0; i < gh.size(); ++i) {
    if (!(cache.hidden_pre[i] > 0.0)) gh[i] *= spec.leaky_slope;
  }
  return nn::linear_backward(features, enc.params.values(std::string(kFc1) + ".weight"),
                             spec.projection_hidden, gh, grad.values(std::string(kFc1) + ".weight"),
                             grad.values(std::string(kFc1) + ".bias"));
}

void save_encoder(const std::filesystem::path& path, const Encoder& enc, const ModelParams& extra,
                  const std::string& metadata_json) {
  ByteWriter cfg;
  cfg.u32(static_cast<std::uint32_t>(enc.spec.channels.size()));
  for (int c : enc.spec.channels) cfg.u32(static_cast<std::uint32_t>(c));
  cfg.u32(static_cast<std::uint32_t>(enc.spec.projection_hidden));
  cfg.u32(static_cast<std::uint32_t>(enc.spec.projection_dim));
  cfg.f64(enc.spec.leaky_slope);
  cfg.u32(static_cast<std::uint32_t>(enc.spec.input_size));
  ModelParams all = enc.params;
  for (const auto& t : extra.tensors()) {
    if (is_encoder_tensor(t.name)) throw_parameter("extra tensor name clashes with encoder: " + t.name);
    all.add(t.name, t.shape).values = t.values;
  }
  write_checkpoint(path, Checkpoint{kEncoderMagic, std::move(cfg).take(), metadata_json, std::move(all)});
}

LoadedEncoder load_encoder(const std::filesystem::path& path) {
  Checkpoint ckpt = read_checkpoint(path, kEncoderMagic);
  ByteReader r(ckpt.config);
  LoadedEncoder out;
  auto& spec = out.encoder.spec;
  const auto stages = r.u32();
  if (stages == 0 || stages > 16) throw FormatError("encoder checkpoint has an invalid stage count");
  spec.channels.resize(stages);
  for (auto& c : spec.channels) c = static_cast<int>(r.u32());
  spec.projection_hidden = static_cast<int>(r.u32());
  spec.projection_dim = static_cast<int>(r.u32());
  spec.leaky_slope = r.f64();
  spec.input_size = static_cast<int>(r.u32());
  if (!r.done()) throw FormatError("encoder checkpoint config has trailing bytes");
  try {
    spec.validate();
  } catch (const ParameterError& e) {
    throw FormatError(std::string("encoder checkpoint config invalid: ") + e.what());
  }
  bool has_proj = false;
  for (const auto& t : ckpt.params.tensors()) has_proj |= starts_with(t.name, kProjectionPrefix);
  const Encoder reference = init_encoder(spec, 0, has_proj);
  for (const auto& t : ckpt.params.tensors()) {
    if (is_encoder_tensor(t.name)) {
      if (!reference.params.contains(t.name) || reference.params.at(t.name).shape != t.shape) {
        throw FormatError("encoder tensor " + t.name + " does not match its config");
      }
      out.encoder.params.add(t.name, t.shape).values = t.values;
    } else {
      out.extra.add(t.name, t.shape).values = t.values;
    }
  }
  if (out.encoder.params.tensors().size() != reference.params.tensors().size()) {
    throw FormatError("encoder checkpoint is missing tensors");
  }
  out.metadata = std::move(ckpt.metadata);
  return out;
}

}  // namespace lungforge
