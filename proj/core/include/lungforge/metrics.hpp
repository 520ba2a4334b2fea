#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lungforge/image.hpp"
#include "lungforge/phantom.hpp"

namespace lungforge {

// ---------------------------------------------------------------- AUC

/// Probability that a random positive outscores a random negative, ties
/// counted one half (Mann-Whitney with midranks). Throws
/// UndefinedMetricError unless both classes are present and DimensionError
/// on a length mismatch.
double auc(std::span<const double> scores, std::span<const int> labels);

// ---------------------------------------------------------------- hit rate

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Location of the largest value (first in row-major order on ties).
Point attention_argmax(PlaneView map);

/// Fraction of points inside their target box, boundaries inclusive. Throws
/// ParameterError for empty input and DimensionError on a length mismatch.
double hit_rate(std::span<const Point> points, std::span<const Box> targets);

struct AttentionPoint {
  std::string image;
  Point point;
};

struct TargetBox {
  std::string image;
  Box box;
  std::string category;  // empty when the file has no category column
};

/// CSV with header image,x,y.
std::vector<AttentionPoint> read_attention_csv(const std::filesystem::path& path);
/// CSV with header image,x_min,y_min,x_max,y_max[,category].
std::vector<TargetBox> read_targets_csv(const std::filesystem::path& path);

struct HitReport {
  std::size_t images = 0;
  std::size_t hits = 0;
  double hit_rate = 0.0;
  struct Category {
    std::string name;
    std::size_t images = 0;
    std::size_t hits = 0;
  };
  std::vector<Category> categories;  // sorted by name
  std::vector<std::string> unmatched;  // targets without an attention point

  [[nodiscard]] std::string to_json() const;
};

/// Matches points to targets by image name.
HitReport evaluate_hits(const std::vector<AttentionPoint>& points,
                        const std::vector<TargetBox>& targets);

// ---------------------------------------------------------------- splits

struct SplitPlan {
  int folds = 5;
  std::vector<int> fold_of;               // fold index per sample
  std::vector<std::size_t> ood_train;     // sorted sample indices
  std::vector<std::size_t> ood_test;      // sorted sample indices
  std::vector<double> fractions;
  std::vector<std::vector<std::size_t>> few_shot;  // per fraction, nested, sorted

  [[nodiscard]] std::vector<std::size_t> fold_train(int f) const;
  [[nodiscard]] std::vector<std::size_t> fold_test(int f) const;
};

/// Stratified `folds`-way partition, stratified OOD split with
/// `ood_test_ratio` of each class held out, and nested few-shot subsets of
/// the OOD training part (a stratified prefix per fraction, at least two
/// samples). Deterministic in seed.
///
/// Throws ParameterError for fewer than 10 samples, a fraction outside
/// (0, 1], folds < 2 or a ratio outside (0, 1).
SplitPlan make_splits(std::span<const int> labels, std::uint64_t seed,
                      std::span<const double> fractions, int folds = 5,
                      double ood_test_ratio = 0.1);

}  // namespace lungforge
