#pragma once

#include <cstdint>

#include "lungforge/params.hpp"

namespace lungforge {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled: p -= lr * wd * p
};

/// Adam with decoupled weight decay.
class AdamW {
 public:
  AdamW(const ModelParams& layout, AdamOptions options);

  void step(ModelParams& params, const ModelParams& grad);

  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  [[nodiscard]] double learning_rate() const { return options_.learning_rate; }
  [[nodiscard]] std::uint64_t steps() const { return t_; }

 private:
  AdamOptions options_;
  ModelParams m_;
  ModelParams v_;
  std::uint64_t t_ = 0;
};

}  // namespace lungforge
