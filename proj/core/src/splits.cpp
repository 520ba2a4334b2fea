#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "lungforge/errors.hpp"
#include "lungforge/metrics.hpp"
#include "lungforge/rng.hpp"

namespace lungforge {

namespace {

constexpr std::uint64_t kFoldStream = 21;
constexpr std::uint64_t kOodStream = 22;
constexpr std::uint64_t kFewShotStream = 23;

/// Sample indices per class (0, 1), each shuffled with `rng`.
std::array<std::vector<std::size_t>, 2> shuffled_classes(std::span<const int> labels,
                                                         std::span<const std::size_t> subset, Rng& rng) {
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i : subset) {
    if (labels[i] != 0 && labels[i] != 1) throw_parameter("labels must be 0 or 1");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  for (auto& c : by_class) rng.shuffle(c.begin(), c.end());
  return by_class;
}

/// Interleaves classes proportionally: element r of a class of size n gets
/// key (r + 0.5) / n, and the merged order sorts by key (class 1 first on ties).
std::vector<std::size_t> stratified_order(const std::array<std::vector<std::size_t>, 2>& by_class) {
  struct Keyed {
    double key;
    int cls;
    std::size_t idx;
  };
  std::vector<Keyed> all;
  for (int c = 0; c < 2; ++c) {
    const auto& v = by_class[static_cast<std::size_t>(c)];
    for (std::size_t r = 0; r < v.size(); ++r) {
      all.push_back({(static_cast<double>(r) + 0.5) / static_cast<double>(v.size()), c, v[r]});
    }
  }
  std::sort(all.begin(), all.end(), [](const Keyed& a, const Keyed& b) {
    return a.key != b.key ? a.key < b.key : a.cls > b.cls;
  });
  std::vector<std::size_t> out;
  for (const auto& k : all) out.push_back(k.idx);
  return out;
}

}  // namespace

std::vector<std::size_t> SplitPlan::fold_train(int f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != f) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> SplitPlan::fold_test(int f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == f) out.push_back(i);
  }
  return out;
}

SplitPlan make_splits(std::span<const int> labels, std::uint64_t seed,
                      std::span<const double> fractions, int folds, double ood_test_ratio) {
  if (labels.size() < 10) throw_parameter("splitting needs at least 10 samples");
  if (folds < 2) throw_parameter("at least two folds are required");
  if (!(ood_test_ratio > 0.0 && ood_test_ratio < 1.0)) throw_parameter("OOD test ratio must lie in (0, 1)");
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw_parameter("few-shot fraction must lie in (0, 1]");
  }
  SplitPlan plan;
  plan.folds = folds;
  plan.fractions.assign(fractions.begin(), fractions.end());
  std::vector<std::size_t> all(labels.size());
  std::iota(all.begin(), all.end(), std::size_t{0});

  // Folds: one round-robin over the class-grouped shuffled order.
  Rng fold_rng(derive_seed(seed, kFoldStream));
  const auto fold_classes = shuffled_classes(labels, all, fold_rng);
  plan.fold_of.assign(labels.size(), 0);
  std::size_t counter = 0;
  for (const auto& cls : fold_classes) {
    for (std::size_t idx : cls) plan.fold_of[idx] = static_cast<int>(counter++ % static_cast<std::size_t>(folds));
  }

  // OOD split: the first round(ratio * n_c) of each shuffled class are held out.
  Rng ood_rng(derive_seed(seed, kOodStream));
  const auto ood_classes = shuffled_classes(labels, all, ood_rng);
  for (const auto& cls : ood_classes) {
    const auto n_test = static_cast<std::size_t>(std::lround(ood_test_ratio * static_cast<double>(cls.size())));
    plan.ood_test.insert(plan.ood_test.end(), cls.begin(), cls.begin() + static_cast<std::ptrdiff_t>(n_test));
    plan.ood_train.insert(plan.ood_train.end(), cls.begin() + static_cast<std::ptrdiff_t>(n_test), cls.end());
  }
  std::sort(plan.ood_test.begin(), plan.ood_test.end());
  std::sort(plan.ood_train.begin(), plan.ood_train.end());

  // Few-shot subsets: prefixes of one stratified ordering, hence nested.
  Rng few_rng(derive_seed(seed, kFewShotStream));
  const auto order = stratified_order(shuffled_classes(labels, plan.ood_train, few_rng));
  for (double f : fractions) {
    const auto want = static_cast<std::size_t>(std::lround(f * static_cast<double>(order.size())));
    const std::size_t n = std::min(order.size(), std::max<std::size_t>(2, want));
    std::vector<std::size_t> subset(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
    std::sort(subset.begin(), subset.end());
    plan.few_shot.push_back(std::move(subset));
  }
  return plan;
}

}  // namespace lungforge
