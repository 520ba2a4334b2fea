#include "lungforge/optim.hpp"

#include <cmath>

#include "lungforge/errors.hpp"

namespace lungforge {

AdamW::AdamW(const ModelParams& layout, AdamOptions options)
    : options_(options), m_(layout.zeros_like()), v_(layout.zeros_like()) {}

void AdamW::step(ModelParams& params, const ModelParams& grad) {
  auto& pt = params.tensors();
  const auto& gt = grad.tensors();
  if (pt.size() != gt.size() || pt.size() != m_.tensors().size()) {
    throw_dimension("optimizer state does not match parameter layout");
  }
  ++t_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = options_.learning_rate;
  for (std::size_t i = 0; i < pt.size(); ++i) {
    auto& p = pt[i].values;
    const auto& g = gt[i].values;
    auto& m = m_.tensors()[i].values;
    auto& v = v_.tensors()[i].values;
    if (g.size() != p.size()) throw_dimension("gradient does not match parameter " + pt[i].name);
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p[j] -= lr * (mhat / (std::sqrt(vhat) + options_.epsilon) + options_.weight_decay * p[j]);
    }
  }
}

}  // namespace lungforge
