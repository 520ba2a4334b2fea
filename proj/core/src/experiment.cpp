#include "lungforge/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "lungforge/errors.hpp"
#include "lungforge/image_io.hpp"
#include "lungforge/image_ops.hpp"
#include "lungforge/metrics.hpp"
#include "lungforge/parallel.hpp"
#include "lungforge/rng.hpp"

namespace lungforge {

namespace {

using nlohmann::json;

// Corpus seed streams.
constexpr std::uint64_t kIdCorpusStream = 100;
constexpr std::uint64_t kOodCorpusStream = 101;  // + OOD index
constexpr std::uint64_t kPoolStream = 1000;      // + pool domain index
// Experiment seed streams.
constexpr std::uint64_t kEncoderInitStream = 41;
constexpr std::uint64_t kPretrainStream = 42;
constexpr std::uint64_t kIdSplitStream = 51;
constexpr std::uint64_t kOodSplitStream = 52;  // + OOD index
constexpr std::uint64_t kFoldClassifierStream = 60;
constexpr std::uint64_t kFullClassifierStream = 70;
constexpr std::uint64_t kFewShotClassifierStream = 80;

struct Dataset {
  std::string name;
  std::vector<GrayImage> full;  // original resolution
  std::vector<int> labels;
  std::vector<std::string> ids;
};

struct Prepared {
  std::vector<GrayImage> raw;
  std::vector<GrayImage> enhanced;  // empty when no variant needs DCE
  [[nodiscard]] const std::vector<GrayImage>& for_variant(Variant v) const {
    return uses_dce(v) ? enhanced : raw;
  }
};

Dataset load_dataset(const CorpusSource& src, std::uint64_t seed) {
  Dataset d;
  d.name = src.name;
  if (!src.directory.empty()) {
    const auto rows = read_manifest(src.directory / "manifest.csv");
    if (rows.empty()) throw_parameter("dataset '" + src.name + "' has an empty manifest");
    for (const auto& r : rows) {
      d.full.push_back(load_image(src.directory / r.file));
      d.labels.push_back(r.label);
      d.ids.push_back(src.name + ":" + r.file);
    }
    return d;
  }
  const auto samples = generate_corpus(src.count, seed, src.resolved_domain(), src.positive_fraction);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    d.full.push_back(samples[i].image);
    d.labels.push_back(samples[i].label);
    d.ids.push_back(src.name + ":" + phantom_file_name(i));
  }
  return d;
}

/// Unlabeled pool interleaving the pool domains.
Dataset load_pool(const ExperimentSpec& spec) {
  const auto k = spec.pool_domains.size();
  std::vector<std::vector<PhantomSample>> per_domain;
  for (std::size_t j = 0; j < k; ++j) {
    const int n = spec.pool_count / static_cast<int>(k) + (static_cast<int>(j) < spec.pool_count % static_cast<int>(k) ? 1 : 0);
    per_domain.push_back(n > 0 ? generate_corpus(n, derive_seed(spec.corpus_seed, kPoolStream + j),
                                                 DomainConfig::preset(spec.pool_domains[j]), 0.5)
                               : std::vector<PhantomSample>{});
  }
  Dataset d;
  d.name = "pool";
  for (std::size_t i = 0; d.full.size() < static_cast<std::size_t>(spec.pool_count); ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i >= per_domain[j].size()) continue;
      d.full.push_back(per_domain[j][i].image);
      d.labels.push_back(-1);
      d.ids.push_back("pool:" + spec.pool_domains[j] + ":" + phantom_file_name(i));
    }
  }
  return d;
}

GrayImage to_working(const GrayImage& img, int size) {
  if (img.width() == size && img.height() == size) return img;
  return GrayImage::from_clamped(resize_bilinear(img.view(), size, size));
}

/// Enhancement needs sides divisible by 2^levels; other sizes are resized
/// down to the nearest multiple first.
GrayImage enhance_one(const DceModel& model, const GrayImage& img, CurveShift shift) {
  const int m = 1 << model.config.levels;
  GrayImage src = img;
  if (img.width() % m != 0 || img.height() % m != 0) {
    const int w = std::max(m, img.width() / m * m);
    const int h = std::max(m, img.height() / m * m);
    src = GrayImage::from_clamped(resize_bilinear(img.view(), w, h));
  }
  return enhance(src, forward(model, src.view()), shift);
}

std::vector<GrayImage> enhance_all(const DceModel& model, const std::vector<GrayImage>& images,
                                   CurveShift shift) {
  std::vector<GrayImage> out(images.size());
  parallel_for(images.size(), [&](std::size_t i) { out[i] = enhance_one(model, images[i], shift); });
  return out;
}

std::vector<GrayImage> shrink_all(const std::vector<GrayImage>& images, int size) {
  std::vector<GrayImage> out(images.size());
  parallel_for(images.size(), [&](std::size_t i) { out[i] = to_working(images[i], size); });
  return out;
}

template <typename T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(v[i]);
  return out;
}

std::size_t intersection_size(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::unordered_set<std::string> sa(a.begin(), a.end());
  return static_cast<std::size_t>(std::count_if(b.begin(), b.end(), [&](const auto& s) { return sa.count(s) > 0; }));
}

std::uint64_t content_hash(const GrayImage& img) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a over the pixel bytes
  for (double v : img.pixels()) {
    const auto* p = reinterpret_cast<const unsigned char*>(&v);
    for (std::size_t b = 0; b < sizeof(double); ++b) h = (h ^ p[b]) * 1099511628211ULL;
  }
  return h;
}

ScoredSet score(const Classifier& model, const std::vector<GrayImage>& images, const Dataset& d,
                const std::vector<std::size_t>& idx) {
  ScoredSet s;
  s.samples = pick(d.ids, idx);
  s.labels = pick(d.labels, idx);
  s.scores = predict(model, pick(images, idx));
  s.auc = auc(s.scores, s.labels);
  return s;
}

json scored_json(const ScoredSet& s) {
  return {{"auc", s.auc}, {"samples", s.samples}, {"labels", s.labels}, {"scores", s.scores}};
}

Summary summarize(const std::vector<double>& v) {
  Summary s;
  s.n = v.size();
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  for (double x : v) s.std += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(s.std / static_cast<double>(v.size()));
  return s;
}

json summary_json(const Summary& s, const char* std_over) {
  return {{"auc_mean", s.mean}, {"auc_std", s.std}, {"n", s.n}, {"std_over", std_over}};
}

std::string fraction_key(double f) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", f);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp);
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

// ---------------------------------------------------------------- variants

Variant parse_variant(const std::string& s) {
  if (s == "baseline") return Variant::Baseline;
  if (s == "dce") return Variant::Dce;
  if (s == "simclr") return Variant::Simclr;
  if (s == "scc") return Variant::Scc;
  throw_parameter("unknown variant '" + s + "' (expected baseline, dce, simclr or scc)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Baseline: return "baseline";
    case Variant::Dce: return "dce";
    case Variant::Simclr: return "simclr";
    case Variant::Scc: return "scc";
  }
  return "?";
}

bool uses_dce(Variant v) { return v == Variant::Dce || v == Variant::Scc; }
bool uses_pretraining(Variant v) { return v == Variant::Simclr || v == Variant::Scc; }

DomainConfig CorpusSource::resolved_domain() const {
  return domain_config ? *domain_config : DomainConfig::preset(domain);
}

// ---------------------------------------------------------------- spec

void ExperimentSpec::validate() const {
  if (variants.empty()) throw_parameter("at least one variant is required");
  if (seeds.empty()) throw_parameter("at least one seed is required");
  if (ood.empty()) throw_parameter("at least one OOD corpus is required");
  if (working_size < 8) throw_parameter("working_size must be at least 8");
  if (working_size != encoder.input_size) throw_parameter("working_size must equal the encoder input size");
  std::set<std::string> names{id.name};
  for (const auto& c : ood) {
    if (!names.insert(c.name).second) throw_parameter("duplicate dataset name '" + c.name + "'");
  }
  for (const auto* c : [&] {
         std::vector<const CorpusSource*> all{&id};
         for (const auto& o : ood) all.push_back(&o);
         return all;
       }()) {
    if (c->directory.empty()) {
      if (c->count < 10) throw_parameter("dataset '" + c->name + "' needs at least 10 samples");
      if (!(c->positive_fraction > 0.0 && c->positive_fraction < 1.0)) {
        throw_parameter("positive_fraction of '" + c->name + "' must lie in (0, 1)");
      }
      c->resolved_domain().validate();
    }
  }
  const bool needs_dce = std::any_of(variants.begin(), variants.end(), uses_dce);
  const bool needs_pool = needs_dce || std::any_of(variants.begin(), variants.end(), uses_pretraining);
  if (needs_pool) {
    if (pool_domains.empty()) throw_parameter("pool domains must not be empty");
    for (const auto& d : pool_domains) DomainConfig::preset(d);
    if (pool_count < 2) throw_parameter("the unlabeled pool needs at least two images");
  }
  if (needs_dce && dce_checkpoint.empty()) {
    if (dce_images < 1 || dce_images > pool_count) throw_parameter("dce images must lie in [1, pool count]");
    dce.validate();
  }
  encoder.validate();
  pretrain.validate();
  classifier.validate();
  fewshot.validate();
}

std::map<std::string, std::set<std::string>> experiment_spec_schema() {
  std::map<std::string, std::set<std::string>> s;
  s["experiment"] = {"variants", "seeds", "working_size"};
  s["corpus"] = {"seed", "id_name", "id_domain", "id_count", "id_dir", "ood_names", "ood_domains",
                 "ood_count", "ood_dirs", "positive_fraction", "pool_domains", "pool_count"};
  s["protocol"] = {"folds", "ood_test_ratio"};
  s["dce"] = train_config_keys();
  s["dce"].insert({"images", "checkpoint"});
  s["pretrain"] = pretrain_config_keys();
  s["pretrain"].insert({"crop_min", "crop_max", "rotation"});
  s["encoder"] = {"channels", "projection_hidden", "projection_dim", "leaky_slope"};
  s["classifier"] = {"mode", "learning_rate", "weight_decay", "epochs", "batch_size"};
  s["fewshot"] = {"fractions", "mode", "learning_rate", "weight_decay", "epochs", "batch_size"};
  return s;
}

namespace {

ClassifierConfig read_classifier(const ConfigFile& cfg, const std::string& s, ClassifierConfig c) {
  c.mode = parse_fine_tune_mode(cfg.get_string(s, "mode", to_string(c.mode)));
  c.learning_rate = cfg.get_double(s, "learning_rate", c.learning_rate);
  c.weight_decay = cfg.get_double(s, "weight_decay", c.weight_decay);
  c.epochs = cfg.get_int(s, "epochs", c.epochs);
  c.batch_size = cfg.get_int(s, "batch_size", c.batch_size);
  return c;
}

}  // namespace

ExperimentSpec read_experiment_spec(const ConfigFile& cfg) {
  cfg.require_known(experiment_spec_schema());
  ExperimentSpec spec;
  std::vector<std::string> vnames;
  for (auto v : spec.variants) vnames.push_back(to_string(v));
  spec.variants.clear();
  for (const auto& v : cfg.get_list("experiment", "variants", vnames)) spec.variants.push_back(parse_variant(v));
  spec.seeds = cfg.get_u64s("experiment", "seeds", spec.seeds);
  spec.working_size = cfg.get_int("experiment", "working_size", spec.working_size);

  spec.corpus_seed = cfg.get_u64("corpus", "seed", spec.corpus_seed);
  const double pf = cfg.get_double("corpus", "positive_fraction", 0.5);
  spec.id.name = cfg.get_string("corpus", "id_name", spec.id.name);
  spec.id.domain = cfg.get_string("corpus", "id_domain", spec.id.domain);
  spec.id.count = cfg.get_int("corpus", "id_count", spec.id.count);
  spec.id.directory = cfg.get_string("corpus", "id_dir", "");
  spec.id.positive_fraction = pf;
  std::vector<std::string> def_names;
  std::vector<std::string> def_domains;
  for (const auto& o : spec.ood) {
    def_names.push_back(o.name);
    def_domains.push_back(o.domain);
  }
  const auto names = cfg.get_list("corpus", "ood_names", def_names);
  const auto domains = cfg.get_list("corpus", "ood_domains", def_domains);
  const auto dirs = cfg.get_list("corpus", "ood_dirs", {});
  const int ood_count = cfg.get_int("corpus", "ood_count", spec.ood.front().count);
  if (dirs.empty() && names.size() != domains.size()) throw_parameter("ood_names and ood_domains differ in length");
  if (!dirs.empty() && names.size() != dirs.size()) throw_parameter("ood_names and ood_dirs differ in length");
  spec.ood.clear();
  for (std::size_t i = 0; i < names.size(); ++i) {
    CorpusSource c;
    c.name = names[i];
    if (dirs.empty()) {
      c.domain = domains[i];
    } else {
      c.directory = dirs[i];
    }
    c.count = ood_count;
    c.positive_fraction = pf;
    spec.ood.push_back(c);
  }
  spec.pool_domains = cfg.get_list("corpus", "pool_domains", spec.pool_domains);
  spec.pool_count = cfg.get_int("corpus", "pool_count", spec.pool_count);

  spec.folds = cfg.get_int("protocol", "folds", spec.folds);
  spec.ood_test_ratio = cfg.get_double("protocol", "ood_test_ratio", spec.ood_test_ratio);

  spec.dce = read_train_config(cfg, "dce", spec.dce);
  spec.dce_images = cfg.get_int("dce", "images", spec.dce_images);
  spec.dce_checkpoint = cfg.get_string("dce", "checkpoint", "");

  spec.pretrain = read_pretrain_config(cfg, "pretrain", spec.pretrain);
  spec.pretrain.augment.crop_ratio_min = cfg.get_double("pretrain", "crop_min", spec.pretrain.augment.crop_ratio_min);
  spec.pretrain.augment.crop_ratio_max = cfg.get_double("pretrain", "crop_max", spec.pretrain.augment.crop_ratio_max);
  spec.pretrain.augment.max_rotation_deg = cfg.get_double("pretrain", "rotation", spec.pretrain.augment.max_rotation_deg);

  std::vector<std::string> ch_default;
  for (int c : spec.encoder.channels) ch_default.push_back(std::to_string(c));
  spec.encoder.channels.clear();
  for (const auto& c : cfg.get_list("encoder", "channels", ch_default)) {
    try {
      spec.encoder.channels.push_back(std::stoi(c));
    } catch (const std::exception&) {
      throw_parameter("encoder channels must be integers");
    }
  }
  spec.encoder.projection_hidden = cfg.get_int("encoder", "projection_hidden", spec.encoder.projection_hidden);
  spec.encoder.projection_dim = cfg.get_int("encoder", "projection_dim", spec.encoder.projection_dim);
  spec.encoder.leaky_slope = cfg.get_double("encoder", "leaky_slope", spec.encoder.leaky_slope);
  spec.encoder.input_size = spec.working_size;

  spec.classifier = read_classifier(cfg, "classifier", spec.classifier);
  spec.fewshot = read_classifier(cfg, "fewshot", spec.fewshot);
  spec.fractions = cfg.get_doubles("fewshot", "fractions", spec.fractions);
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------- report

std::string SeedOutcome::to_json() const {
  json j;
  j["variant"] = to_string(variant);
  j["seed"] = seed;
  j["complete"] = complete;
  auto& folds_j = j["in_distribution_folds"] = json::array();
  for (const auto& f : folds) {
    folds_j.push_back({{"fold", f.fold}, {"train_samples", f.train_samples}, {"test", scored_json(f.test)}});
  }
  j["full_train_samples"] = full_train_samples;
  j["pretrain_samples"] = pretrain_samples;
  auto& ood_j = j["ood"] = json::array();
  for (const auto& o : ood) {
    json oj{{"dataset", o.dataset}, {"zero_shot", scored_json(o.zero_shot)}};
    auto& fs = oj["few_shot"] = json::array();
    for (const auto& f : o.few_shot) {
      fs.push_back({{"fraction", f.fraction}, {"train_samples", f.train_samples}, {"test", scored_json(f.test)}});
    }
    ood_j.push_back(std::move(oj));
  }
  return j.dump(1) + "\n";
}

std::vector<Variant> ExperimentReport::variants() const {
  std::vector<Variant> out;
  for (const auto& r : runs) {
    if (std::find(out.begin(), out.end(), r.variant) == out.end()) out.push_back(r.variant);
  }
  return out;
}

Summary ExperimentReport::in_distribution(Variant v) const {
  std::vector<double> a;
  for (const auto& r : runs) {
    if (r.variant != v) continue;
    for (const auto& f : r.folds) a.push_back(f.test.auc);
  }
  return summarize(a);
}

Summary ExperimentReport::zero_shot(Variant v, const std::string& dataset) const {
  std::vector<double> a;
  for (const auto& r : runs) {
    if (r.variant != v) continue;
    for (const auto& o : r.ood) {
      if (o.dataset == dataset) a.push_back(o.zero_shot.auc);
    }
  }
  return summarize(a);
}

Summary ExperimentReport::few_shot(Variant v, const std::string& dataset, double fraction) const {
  std::vector<double> a;
  for (const auto& r : runs) {
    if (r.variant != v) continue;
    for (const auto& o : r.ood) {
      if (o.dataset != dataset) continue;
      for (const auto& f : o.few_shot) {
        if (f.fraction == fraction) a.push_back(f.test.auc);
      }
    }
  }
  return summarize(a);
}

std::string ExperimentReport::to_json() const {
  json j;
  j["columns"] = {"in_distribution", "ood_zero", "ood_fraction"};
  j["id_datasets"] = id_datasets;
  j["ood_datasets"] = ood_datasets;
  j["fractions"] = fractions;
  auto& res = j["results"] = json::object();
  for (Variant v : variants()) {
    json vj;
    for (const auto& d : id_datasets) vj["in_distribution"][d] = summary_json(in_distribution(v), "folds");
    for (const auto& d : ood_datasets) {
      vj["ood_zero"][d] = summary_json(zero_shot(v, d), "seeds");
      for (double f : fractions) vj["ood_fraction"][d][fraction_key(f)] = summary_json(few_shot(v, d, f), "seeds");
    }
    res[to_string(v)] = std::move(vj);
  }
  auto& runs_j = j["runs"] = json::array();
  for (const auto& r : runs) runs_j.push_back(json::parse(r.to_json()));
  j["audit"] = {{"intersections", audit_checks},
                {"all_disjoint", std::all_of(audit_checks.begin(), audit_checks.end(),
                                             [](const auto& kv) { return kv.second == 0; })}};
  return j.dump(1) + "\n";
}

std::string ExperimentReport::few_shot_csv() const {
  std::string out = "variant,dataset,fraction,auc_mean,auc_std,seeds\n";
  char buf[256];
  for (Variant v : variants()) {
    for (const auto& d : ood_datasets) {
      const auto row = [&](double f, const Summary& s) {
        std::snprintf(buf, sizeof buf, "%s,%s,%g,%.6f,%.6f,%zu\n", to_string(v).c_str(), d.c_str(), f, s.mean,
                      s.std, s.n);
        out += buf;
      };
      row(0.0, zero_shot(v, d));
      for (double f : fractions) row(f, few_shot(v, d, f));
    }
  }
  return out;
}

// ---------------------------------------------------------------- run

ExperimentReport run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir,
                                const ExperimentHooks& hooks) {
  spec.validate();
  const auto log = [&](const std::string& msg) {
    if (hooks.log) hooks.log(msg);
  };
  std::filesystem::path partial_dir;
  if (!out_dir.empty()) {
    partial_dir = out_dir / "partial";
    std::filesystem::create_directories(partial_dir);
  }

  ExperimentReport report;
  report.fractions = spec.fractions;
  const auto audit = [&](const std::string& check, std::size_t n) {
    report.audit_checks[check] += n;
    if (n != 0) throw std::logic_error("sample leakage detected: " + check);
  };

  // Corpora.
  std::vector<Dataset> labeled;
  labeled.push_back(load_dataset(spec.id, derive_seed(spec.corpus_seed, kIdCorpusStream)));
  for (std::size_t k = 0; k < spec.ood.size(); ++k) {
    labeled.push_back(load_dataset(spec.ood[k], derive_seed(spec.corpus_seed, kOodCorpusStream + k)));
  }
  report.id_datasets = {labeled[0].name};
  for (std::size_t k = 1; k < labeled.size(); ++k) report.ood_datasets.push_back(labeled[k].name);
  log("loaded " + std::to_string(labeled.size()) + " labeled datasets");

  const bool needs_dce = std::any_of(spec.variants.begin(), spec.variants.end(), uses_dce);
  const bool needs_pool = needs_dce || std::any_of(spec.variants.begin(), spec.variants.end(), uses_pretraining);
  Dataset pool;
  if (needs_pool) {
    pool = load_pool(spec);
    std::unordered_set<std::uint64_t> pool_hashes;
    for (const auto& img : pool.full) pool_hashes.insert(content_hash(img));
    for (const auto& d : labeled) {
      audit("pool_vs_" + d.name + "_ids", intersection_size(pool.ids, d.ids));
      std::size_t same = 0;
      for (const auto& img : d.full) same += pool_hashes.count(content_hash(img));
      audit("pool_vs_" + d.name + "_pixels", same);
    }
  }

  // DCE model.
  DceModel dce_model;
  if (needs_dce) {
    if (hooks.dce_model != nullptr) {
      dce_model = *hooks.dce_model;
      log("using provided DCE model");
    } else if (!spec.dce_checkpoint.empty()) {
      dce_model = load_dce_model(spec.dce_checkpoint);
      log("loaded DCE model " + spec.dce_checkpoint.string());
    } else {
      const std::vector<GrayImage> train(pool.full.begin(), pool.full.begin() + spec.dce_images);
      log("training DCE on " + std::to_string(train.size()) + " pool images");
      dce_model = train_dce(train, spec.dce).model;
    }
  }

  // Preprocessed working-resolution images.
  std::vector<Prepared> prepared(labeled.size());
  for (std::size_t k = 0; k < labeled.size(); ++k) {
    prepared[k].raw = shrink_all(labeled[k].full, spec.working_size);
    if (needs_dce) {
      prepared[k].enhanced = shrink_all(enhance_all(dce_model, labeled[k].full, spec.dce.shift), spec.working_size);
    }
  }
  std::vector<GrayImage> pool_enhanced;
  if (needs_dce && std::find(spec.variants.begin(), spec.variants.end(), Variant::Scc) != spec.variants.end()) {
    pool_enhanced = enhance_all(dce_model, pool.full, spec.dce.shift);
  }
  log("preprocessing done");

  const Dataset& id = labeled[0];
  for (Variant variant : spec.variants) {
    for (std::uint64_t seed : spec.seeds) {
      SeedOutcome run;
      run.variant = variant;
      run.seed = seed;
      const std::string tag = to_string(variant) + "_seed" + std::to_string(seed);
      const auto persist = [&] {
        if (!partial_dir.empty()) write_text(partial_dir / (tag + ".json"), run.to_json());
      };

      Encoder encoder;
      if (uses_pretraining(variant)) {
        PretrainConfig pc = spec.pretrain;
        pc.seed = derive_seed(seed, kPretrainStream);
        const auto& images = uses_dce(variant) ? pool_enhanced : pool.full;
        log(tag + ": contrastive pretraining on " + std::to_string(images.size()) + " images");
        encoder = pretrain_encoder(images, spec.encoder, pc).encoder;
        run.pretrain_samples = pool.ids;
      } else {
        encoder = init_encoder(spec.encoder, derive_seed(seed, kEncoderInitStream), false);
      }
      const Classifier start = make_classifier(encoder);

      // In-distribution cross-validation.
      const auto& id_images = prepared[0].for_variant(variant);
      const SplitPlan id_plan = make_splits(id.labels, derive_seed(seed, kIdSplitStream), spec.fractions,
                                            spec.folds, spec.ood_test_ratio);
      for (int f = 0; f < spec.folds; ++f) {
        const auto train_idx = id_plan.fold_train(f);
        const auto test_idx = id_plan.fold_test(f);
        ClassifierConfig cc = spec.classifier;
        cc.seed = derive_seed(seed, kFoldClassifierStream + static_cast<std::uint64_t>(f));
        const auto trained = train_classifier(start, pick(id_images, train_idx), pick(id.labels, train_idx), cc);
        FoldOutcome fo;
        fo.fold = f;
        fo.train_samples = pick(id.ids, train_idx);
        fo.test = score(trained.model, id_images, id, test_idx);
        audit("id_fold_train_vs_test", intersection_size(fo.train_samples, fo.test.samples));
        log(tag + ": fold " + std::to_string(f) + " auc " + std::to_string(fo.test.auc));
        run.folds.push_back(std::move(fo));
        persist();
      }

      // Zero-shot model on the whole in-distribution corpus.
      std::vector<std::size_t> all_id(id.labels.size());
      for (std::size_t i = 0; i < all_id.size(); ++i) all_id[i] = i;
      ClassifierConfig full_cfg = spec.classifier;
      full_cfg.seed = derive_seed(seed, kFullClassifierStream);
      const Classifier m0 = train_classifier(start, id_images, id.labels, full_cfg).model;
      run.full_train_samples = id.ids;

      for (std::size_t k = 1; k < labeled.size(); ++k) {
        const Dataset& d = labeled[k];
        const auto& images = prepared[k].for_variant(variant);
        const SplitPlan plan = make_splits(d.labels, derive_seed(seed, kOodSplitStream + k - 1), spec.fractions,
                                           spec.folds, spec.ood_test_ratio);
        OodOutcome oo;
        oo.dataset = d.name;
        oo.zero_shot = score(m0, images, d, plan.ood_test);
        audit("zero_shot_train_vs_" + d.name, intersection_size(run.full_train_samples, d.ids));
        audit("pretrain_vs_" + d.name + "_test", intersection_size(run.pretrain_samples, oo.zero_shot.samples));
        log(tag + ": " + d.name + " zero-shot auc " + std::to_string(oo.zero_shot.auc));
        for (std::size_t fi = 0; fi < spec.fractions.size(); ++fi) {
          const auto& subset = plan.few_shot[fi];
          ClassifierConfig fc = spec.fewshot;
          fc.seed = derive_seed(seed, kFewShotClassifierStream + 10 * (k - 1) + fi);
          const auto tuned = train_classifier(m0, pick(images, subset), pick(d.labels, subset), fc);
          FewShotOutcome fs;
          fs.fraction = spec.fractions[fi];
          fs.train_samples = pick(d.ids, subset);
          fs.test = score(tuned.model, images, d, plan.ood_test);
          audit("few_shot_train_vs_" + d.name + "_test", intersection_size(fs.train_samples, fs.test.samples));
          log(tag + ": " + d.name + " fraction " + fraction_key(fs.fraction) + " (" +
              std::to_string(subset.size()) + " images) auc " + std::to_string(fs.test.auc));
          oo.few_shot.push_back(std::move(fs));
        }
        run.ood.push_back(std::move(oo));
        persist();
      }
      run.complete = true;
      persist();
      report.runs.push_back(std::move(run));
    }
  }
  return report;
}

}  // namespace lungforge
