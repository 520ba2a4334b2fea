#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lungforge/encoder.hpp"
#include "lungforge/image.hpp"
#include "lungforge/params.hpp"

namespace lungforge {

/// Linear probing trains only the head on frozen encoder features; full
/// fine-tuning updates the encoder as well.
enum class FineTuneMode { Linear, Full };

FineTuneMode parse_fine_tune_mode(const std::string& s);
std::string to_string(FineTuneMode m);

struct ClassifierConfig {
  FineTuneMode mode = FineTuneMode::Full;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  int epochs = 30;
  int batch_size = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Encoder features -> affine -> logistic.
struct Classifier {
  Encoder encoder;    // without projection head
  ModelParams head;   // "head.weight" [1, D], "head.bias" [1]
};

/// Attaches a zero-initialized head to `encoder` (its projection head, if
/// any, is dropped).
Classifier make_classifier(Encoder encoder);

double predict_logit(const Classifier& c, PlaneView img);
/// Probabilities of the positive class, one per image.
std::vector<double> predict(const Classifier& c, const std::vector<GrayImage>& images);

/// Logistic-regression head on fixed feature vectors (mini-batch AdamW on
/// the mean binary cross-entropy). Throws ParameterError unless both classes
/// are present.
ModelParams train_linear_head(const std::vector<std::vector<double>>& features,
                              std::span<const int> labels, const ClassifierConfig& config,
                              const ModelParams* init = nullptr);

struct ClassifierResult {
  Classifier model;
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch, before each update
};

/// Supervised training starting from `init`. In linear mode the encoder
/// parameters are left bit-identical. Throws ParameterError unless both
/// classes are present.
ClassifierResult train_classifier(const Classifier& init, const std::vector<GrayImage>& images,
                                  std::span<const int> labels, const ClassifierConfig& config);

}  // namespace lungforge
