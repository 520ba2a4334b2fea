#include "lungforge/params.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "lungforge/errors.hpp"

namespace lungforge {

std::size_t NamedTensor::numel() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
}

NamedTensor& ModelParams::add(std::string name, std::vector<int> shape, double fill) {
  if (contains(name)) throw_parameter("duplicate tensor name " + name);
  NamedTensor t{std::move(name), std::move(shape), {}};
  t.values.assign(t.numel(), fill);
  tensors_.push_back(std::move(t));
  return tensors_.back();
}

const NamedTensor& ModelParams::at(std::string_view name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw_parameter("no tensor named " + std::string(name));
}

NamedTensor& ModelParams::at(std::string_view name) {
  return const_cast<NamedTensor&>(std::as_const(*this).at(name));
}

bool ModelParams::contains(std::string_view name) const {
  return std::any_of(tensors_.begin(), tensors_.end(),
                     [&](const NamedTensor& t) { return t.name == name; });
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.values.size();
  return n;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams out;
  for (const auto& t : tensors_) out.add(t.name, t.shape, 0.0);
  return out;
}

void ModelParams::erase_prefix(std::string_view prefix) {
  std::erase_if(tensors_, [&](const NamedTensor& t) { return t.name.starts_with(prefix); });
}

void ModelParams::add_scaled(const ModelParams& other, double scale) {
  if (other.tensors_.size() != tensors_.size()) throw_dimension("parameter layouts differ");
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    auto& dst = tensors_[i].values;
    const auto& src = other.tensors_[i].values;
    if (dst.size() != src.size()) throw_dimension("parameter layouts differ");
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += scale * src[j];
  }
}

void ModelParams::scale(double factor) {
  for (auto& t : tensors_) {
    for (double& v : t.values) v *= factor;
  }
}

void ModelParams::round_to_float() {
  for (auto& t : tensors_) {
    for (double& v : t.values) v = static_cast<double>(static_cast<float>(v));
  }
}

bool ModelParams::all_finite() const {
  for (const auto& t : tensors_) {
    for (double v : t.values) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  if (a.tensors_.size() != b.tensors_.size()) return false;
  for (std::size_t i = 0; i < a.tensors_.size(); ++i) {
    const auto& x = a.tensors_[i];
    const auto& y = b.tensors_[i];
    if (x.name != y.name || x.shape != y.shape || x.values != y.values) return false;
  }
  return true;
}

}  // namespace lungforge
