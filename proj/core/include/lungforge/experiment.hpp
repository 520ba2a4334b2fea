#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lungforge/classifier.hpp"
#include "lungforge/config_file.hpp"
#include "lungforge/contrastive.hpp"
#include "lungforge/dce_trainer.hpp"
#include "lungforge/encoder.hpp"
#include "lungforge/phantom.hpp"

namespace lungforge {

/// baseline: raw images, fresh encoder. dce: enhanced images, fresh encoder.
/// simclr: raw images, encoder pretrained on the raw unlabeled pool.
/// scc: enhanced images, encoder pretrained on the enhanced pool.
enum class Variant { Baseline, Dce, Simclr, Scc };

Variant parse_variant(const std::string& s);
std::string to_string(Variant v);
bool uses_dce(Variant v);
bool uses_pretraining(Variant v);

/// A labeled corpus: either generated phantoms or a directory holding
/// images plus manifest.csv (file,label,...).
struct CorpusSource {
  std::string name;
  std::string domain = "A";  // preset name, used for phantoms
  std::optional<DomainConfig> domain_config;  // overrides the preset when set
  int count = 200;
  double positive_fraction = 0.5;
  std::filesystem::path directory;  // non-empty: load from disk instead

  [[nodiscard]] DomainConfig resolved_domain() const;

  static CorpusSource phantom(std::string name, std::string preset) {
    CorpusSource c;
    c.name = std::move(name);
    c.domain = std::move(preset);
    return c;
  }
};

struct ExperimentSpec {
  std::vector<Variant> variants{Variant::Baseline, Variant::Dce, Variant::Simclr, Variant::Scc};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::uint64_t corpus_seed = 0;  // fixes every generated corpus
  int working_size = 64;          // classifier input side

  CorpusSource id = CorpusSource::phantom("D_A", "A");
  std::vector<CorpusSource> ood{CorpusSource::phantom("D_B", "B"), CorpusSource::phantom("D_C", "C")};

  // Unlabeled pool for DCE and contrastive training, generated from
  // corpus seeds disjoint from the labeled corpora.
  std::vector<std::string> pool_domains{"A"};
  int pool_count = 100;

  int folds = 5;
  double ood_test_ratio = 0.1;
  std::vector<double> fractions{0.1, 0.5, 1.0};

  TrainConfig dce;
  int dce_images = 20;                   // first pool images used for DCE training
  std::filesystem::path dce_checkpoint;  // non-empty: load instead of training

  PretrainConfig pretrain;
  EncoderSpec encoder;
  ClassifierConfig classifier;
  ClassifierConfig fewshot;

  /// Throws ParameterError on inconsistent settings.
  void validate() const;
};

/// Parses the key = value experiment file. Unknown sections or keys throw
/// ParameterError.
ExperimentSpec read_experiment_spec(const ConfigFile& cfg);
/// Accepted sections and keys.
std::map<std::string, std::set<std::string>> experiment_spec_schema();

/// Scores of one evaluation: the AUC plus everything needed to recompute it.
struct ScoredSet {
  std::vector<std::string> samples;
  std::vector<int> labels;
  std::vector<double> scores;
  double auc = 0.0;
};

struct FoldOutcome {
  int fold = 0;
  std::vector<std::string> train_samples;
  ScoredSet test;
};

struct FewShotOutcome {
  double fraction = 0.0;
  std::vector<std::string> train_samples;
  ScoredSet test;
};

struct OodOutcome {
  std::string dataset;
  ScoredSet zero_shot;
  std::vector<FewShotOutcome> few_shot;  // one per fraction
};

/// Everything one (variant, seed) run produced.
struct SeedOutcome {
  Variant variant = Variant::Baseline;
  std::uint64_t seed = 0;
  std::vector<FoldOutcome> folds;
  std::vector<std::string> full_train_samples;  // training set of the zero-shot model
  std::vector<std::string> pretrain_samples;    // unlabeled pool, empty without pretraining
  std::vector<OodOutcome> ood;
  bool complete = false;

  [[nodiscard]] std::string to_json() const;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::size_t n = 0;
};

struct ExperimentReport {
  std::vector<SeedOutcome> runs;  // variant-major, seed-minor
  std::vector<std::string> id_datasets;
  std::vector<std::string> ood_datasets;
  std::vector<double> fractions;
  std::map<std::string, std::size_t> audit_checks;  // check name -> intersections found (all zero)

  /// In-distribution AUC over every fold of every seed.
  [[nodiscard]] Summary in_distribution(Variant v) const;
  /// Zero-shot AUC over seeds.
  [[nodiscard]] Summary zero_shot(Variant v, const std::string& dataset) const;
  /// Few-shot AUC over seeds at one fraction.
  [[nodiscard]] Summary few_shot(Variant v, const std::string& dataset, double fraction) const;
  [[nodiscard]] std::vector<Variant> variants() const;

  /// Deterministic report: summary columns, per-sample scores and the audit.
  [[nodiscard]] std::string to_json() const;
  /// variant,dataset,fraction,auc_mean,auc_std,seeds (fraction 0 is zero-shot).
  [[nodiscard]] std::string few_shot_csv() const;
};

/// Pre-built DCE model shared across experiments (skips training and the
/// checkpoint in the experiment spec).
struct ExperimentHooks {
  const DceModel* dce_model = nullptr;
  std::function<void(const std::string&)> log;
};

/// Runs every variant and seed of the protocol: stratified k-fold CV on the
/// in-distribution corpus, a model trained on the whole in-distribution
/// corpus evaluated zero-shot on every OOD test split, then fine-tuned on
/// the nested few-shot subsets of each OOD training split and evaluated on
/// the same test split.
///
/// When `out_dir` is non-empty, each (variant, seed) result is written to
/// out_dir/partial/<variant>_seed<seed>.json after every stage. Sample-ID
/// intersections between training and held-out sets are checked and throw
/// std::logic_error if ever non-empty.
ExperimentReport run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir = {},
                                const ExperimentHooks& hooks = {});

}  // namespace lungforge
