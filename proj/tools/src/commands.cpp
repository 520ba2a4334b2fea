#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lungforge/config_file.hpp"
#include "lungforge/contrastive.hpp"
#include "lungforge/dce_trainer.hpp"
#include "lungforge/domain_gap.hpp"
#include "lungforge/encoder.hpp"
#include "lungforge/errors.hpp"
#include "lungforge/experiment.hpp"
#include "lungforge/image_io.hpp"
#include "lungforge/metrics.hpp"
#include "lungforge/parallel.hpp"
#include "lungforge/phantom.hpp"
#include "lungforge/unet.hpp"
#include "run_support.hpp"

namespace lungforge::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<GrayImage> load_all(const std::vector<fs::path>& files) {
  std::vector<GrayImage> out(files.size());
  parallel_for(files.size(), [&](std::size_t i) { out[i] = load_image(files[i]); });
  return out;
}

std::vector<fs::path> require_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ParameterError("not a directory: " + dir.string());
  auto files = list_images(dir);
  if (files.empty()) throw ParameterError("no images in " + dir.string());
  return files;
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw ParameterError(what + " not found: " + p.string());
}

fs::path manifest_beside(const fs::path& file) { return fs::path(file.string() + ".manifest.json"); }

fs::path parent_or_cwd(const fs::path& file) {
  return file.has_parent_path() ? file.parent_path() : fs::path(".");
}

json train_config_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"weight_decay", c.weight_decay}, {"lr_decay", c.lr_decay},
          {"batch_size", c.batch_size},       {"epochs", c.epochs},             {"seed", c.seed},
          {"w_adaptive", c.weights.adaptive}, {"w_local", c.weights.local},     {"w_region", c.weights.region},
          {"ts", c.ts},                       {"kernel_size", c.kernel_size},   {"temperature", c.temperature},
          {"x_shift", c.shift.x_shift},       {"y_shift", c.shift.y_shift},     {"unet_levels", c.unet.levels},
          {"unet_base", c.unet.base_channels}, {"force", c.force}};
}

json pretrain_config_json(const PretrainConfig& c, const EncoderSpec& e) {
  return {{"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"lr_decay", c.lr_decay},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"tau", c.tau},
          {"crop_min", c.augment.crop_ratio_min},
          {"crop_max", c.augment.crop_ratio_max},
          {"rotation", c.augment.max_rotation_deg},
          {"channels", e.channels},
          {"projection_hidden", e.projection_hidden},
          {"projection_dim", e.projection_dim},
          {"leaky_slope", e.leaky_slope},
          {"input_size", e.input_size}};
}

json domain_json(const DomainConfig& d) {
  return {{"name", d.name},
          {"brightness_offset", d.brightness_offset},
          {"contrast_gain", d.contrast_gain},
          {"noise_sigma", d.noise_sigma},
          {"text_probability", d.text_probability},
          {"text_intensity", d.text_intensity},
          {"artifact_probability", d.artifact_probability},
          {"artifact_intensity", d.artifact_intensity},
          {"background_intensity", d.background_intensity},
          {"body_intensity", d.body_intensity},
          {"lung_intensity", d.lung_intensity},
          {"lesion_contrast", d.lesion_contrast}};
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// ---------------------------------------------------------------- phantom-gen

Command phantom_gen(CLI::App& app, const std::vector<std::string>& argv) {
  struct Opts {
    int n = 0;
    std::uint64_t seed = 0;
    std::string domain = "A";
    double positive_fraction = 0.5;
    fs::path out;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("phantom-gen", "Generate a labeled synthetic chest-phantom corpus");
  sub->add_option("--n", o->n, "Number of phantoms")->required()->check(CLI::PositiveNumber);
  sub->add_option("--seed", o->seed, "Corpus seed")->capture_default_str();
  sub->add_option("--domain", o->domain,
                  "Stock domain A (clean), B (bright, corner text), C (noisy, artifacts) or an INI file "
                  "with a [domain] section")
      ->capture_default_str();
  sub->add_option("--positive-fraction", o->positive_fraction, "Fraction of lesion-positive samples")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  sub->add_option("--out", o->out, "Output directory (PNGs + manifest.csv)")->required();
  return {sub, [o, argv] {
            DomainConfig domain;
            if (o->domain == "A" || o->domain == "B" || o->domain == "C") {
              domain = DomainConfig::preset(o->domain);
            } else if (fs::is_regular_file(o->domain)) {
              const auto cfg = ConfigFile::load(o->domain);
              cfg.require_known({{"domain", domain_config_keys()}});
              domain = read_domain_config(cfg, "domain");
            } else {
              throw ParameterError("unknown domain '" + o->domain + "' (expected A, B, C or a config file)");
            }
            DirectoryLock lock(o->out);
            Manifest manifest("phantom-gen", argv);
            manifest.set_seed(o->seed);
            manifest.set_config({{"n", o->n}, {"positive_fraction", o->positive_fraction}, {"domain", domain_json(domain)}});
            const auto samples = generate_corpus(o->n, o->seed, domain, o->positive_fraction);
            write_corpus(o->out, samples);
            manifest.add_output(o->out / "manifest.csv");
            manifest.write(o->out / "manifest.json");
            std::cout << "wrote " << samples.size() << " phantoms to " << o->out.string() << "\n";
            return kExitOk;
          }};
}

// ---------------------------------------------------------------- train-dce

Command train_dce_cmd(CLI::App& app, const std::vector<std::string>& argv) {
  struct Opts {
    fs::path corpus;
    fs::path config;
    fs::path out;
    fs::path report;
    std::optional<int> epochs;
    std::optional<std::uint64_t> seed;
    bool force = false;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("train-dce", "Train the self-supervised contrast-enhancement U-Net");
  sub->add_option("--corpus", o->corpus, "Directory of training images (equal sizes, divisible by 4)")->required();
  sub->add_option("--config", o->config, "INI file with a [dce] section");
  sub->add_option("--out", o->out, "Checkpoint path")->required();
  sub->add_option("--report", o->report, "Training report JSON (default: <out>.report.json)");
  sub->add_option("--epochs", o->epochs, "Override the number of epochs");
  sub->add_option("--seed", o->seed, "Override the seed");
  sub->add_flag("--force", o->force, "Allow optimizer settings outside the supported ranges");
  return {sub, [o, argv] {
            TrainConfig config;
            if (!o->config.empty()) {
              const auto cfg = ConfigFile::load(o->config);
              cfg.require_known({{"dce", train_config_keys()}});
              config = read_train_config(cfg, "dce");
            }
            if (o->epochs) config.epochs = *o->epochs;
            if (o->seed) config.seed = *o->seed;
            config.force = config.force || o->force;
            config.validate();
            const auto images = load_all(require_images(o->corpus));
            const fs::path report_path = o->report.empty() ? fs::path(o->out.string() + ".report.json") : o->report;

            DirectoryLock lock(parent_or_cwd(o->out));
            Manifest manifest("train-dce", argv);
            manifest.set_seed(config.seed);
            manifest.set_config(train_config_json(config));
            const json meta{{"epochs", config.epochs}, {"seed", config.seed}, {"images", images.size()}};
            DceModel last_good;
            try {
              auto result = train_dce(images, config, &last_good, [](int e, const EpochRecord& r) {
                std::cout << "epoch " << e << " loss " << fmt(r.mean.total) << "\n" << std::flush;
              });
              result.report.checkpoint_path = o->out.string();
              save_dce_model(o->out, result.model, meta.dump());
              write_file(report_path, result.report.to_json());
            } catch (const DivergenceError& e) {
              save_dce_model(o->out, last_good, json{{"diverged", true}, {"seed", config.seed}}.dump());
              manifest.add_output(o->out);
              manifest.write(manifest_beside(o->out));
              std::cerr << "error: " << e.what() << "; last good checkpoint written to " << o->out.string() << "\n";
              return kExitNumerical;
            }
            manifest.add_output(o->out);
            manifest.add_output(report_path);
            manifest.write(manifest_beside(o->out));
            return kExitOk;
          }};
}

// ---------------------------------------------------------------- enhance

Command enhance_cmd(CLI::App& app, const std::vector<std::string>& argv) {
  struct Opts {
    fs::path checkpoint;
    fs::path input;
    fs::path out;
    fs::path mask_dir;
    double x_shift = 0.0;
    double y_shift = 0.0;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("enhance", "Enhance images with a trained DCE checkpoint");
  sub->add_option("--checkpoint", o->checkpoint, "DCE checkpoint")->required();
  sub->add_option("--input", o->input, "Directory of images")->required();
  sub->add_option("--out", o->out, "Output directory")->required();
  sub->add_option("--text-mask-dir", o->mask_dir,
                  "Directory of same-named 8-bit masks; masked pixels are inpainted before enhancement");
  sub->add_option("--x-shift", o->x_shift, "Horizontal curve offset")->capture_default_str();
  sub->add_option("--y-shift", o->y_shift, "Vertical curve offset")->capture_default_str();
  return {sub, [o, argv] {
            require_file(o->checkpoint, "checkpoint");
            const DceModel model = load_dce_model(o->checkpoint);
            if (!fs::is_directory(o->input)) throw ParameterError("not a directory: " + o->input.string());
            if (!o->mask_dir.empty() && !fs::is_directory(o->mask_dir)) {
              throw ParameterError("not a directory: " + o->mask_dir.string());
            }
            DirectoryLock lock(o->out);
            Manifest manifest("enhance", argv);
            manifest.set_config({{"checkpoint_sha256", sha256_hex([&] {
                                    std::ifstream in(o->checkpoint, std::ios::binary);
                                    std::stringstream ss;
                                    ss << in.rdbuf();
                                    return ss.str();
                                  }())},
                                 {"x_shift", o->x_shift},
                                 {"y_shift", o->y_shift},
                                 {"text_masks", !o->mask_dir.empty()}});
            const auto result = enhance_files(model, list_images(o->input), o->out, {o->x_shift, o->y_shift}, o->mask_dir);

            std::string csv = "file,output,entropy_before,entropy_after,inpainted\n";
            for (const auto& f : result.files) {
              csv += csv_escape(f.source.filename().string()) + "," + csv_escape(f.output.filename().string()) + "," +
                     fmt(f.entropy_before) + "," + fmt(f.entropy_after) + "," + (f.inpainted ? "1" : "0") + "\n";
            }
            write_file(o->out / "entropy.csv", csv);
            std::string errors = "file,error\n";
            for (const auto& e : result.errors) {
              errors += csv_escape(e.source.filename().string()) + "," + csv_escape(e.message) + "\n";
              std::cerr << "warning: " << e.source.string() << ": " << e.message << "\n";
            }
            write_file(o->out / "errors.csv", errors);
            std::string log;
            for (const auto& line : result.log) log += line + "\n";
            write_file(o->out / "pipeline.log", log);
            manifest.add_output(o->out / "entropy.csv");
            manifest.add_output(o->out / "errors.csv");
            manifest.add_output(o->out / "pipeline.log");
            manifest.write(o->out / "manifest.json");
            std::cout << "enhanced " << result.files.size() << " images, " << result.errors.size() << " errors\n";
            return kExitOk;
          }};
}

// ---------------------------------------------------------------- domain-gap

Command domain_gap_cmd(CLI::App& app, const std::vector<std::string>& argv) {
  struct Opts {
    std::vector<std::string> datasets;
    fs::path out;
    int levels = kDefaultGlcmLevels;
    int distance = 1;
    double bandwidth = 0.0;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("domain-gap", "GLCM texture features, MMD distances and an MDS map of datasets");
  sub->add_option("--datasets", o->datasets, "Datasets as name=directory (at least two)")->required();
  sub->add_option("--out", o->out, "Output directory")->required();
  sub->add_option("--levels", o->levels, "GLCM gray levels")->check(CLI::Range(2, 256))->capture_default_str();
  sub->add_option("--distance", o->distance, "GLCM pixel offset")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--bandwidth", o->bandwidth, "Gaussian kernel bandwidth; 0 selects the median heuristic")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  return {sub, [o, argv] {
            if (o->datasets.size() < 2) throw ParameterError("domain-gap needs at least two datasets");
            std::vector<std::pair<std::string, fs::path>> named;
            for (const auto& d : o->datasets) {
              const auto eq = d.find('=');
              if (eq == std::string::npos || eq == 0 || eq + 1 == d.size()) {
                throw ParameterError("dataset must be name=directory, got '" + d + "'");
              }
              named.emplace_back(d.substr(0, eq), d.substr(eq + 1));
            }
            std::vector<std::vector<fs::path>> files;
            for (const auto& [name, dir] : named) files.push_back(require_images(dir));

            DirectoryLock lock(o->out);
            Manifest manifest("domain-gap", argv);
            json datasets_j = json::object();
            for (const auto& [name, dir] : named) datasets_j[name] = dir.string();
            manifest.set_config({{"datasets", datasets_j},
                                 {"levels", o->levels},
                                 {"distance", o->distance},
                                 {"bandwidth", o->bandwidth}});
            std::vector<ImageFeatures> rows;
            std::vector<NamedFeatureSet> sets;
            for (std::size_t k = 0; k < named.size(); ++k) {
              std::vector<DomainFeatureVector> fv(files[k].size());
              parallel_for(files[k].size(), [&](std::size_t i) {
                fv[i] = feature_vector(load_image(files[k][i]).view(), o->levels, o->distance);
              });
              NamedFeatureSet set{named[k].first, {}};
              for (std::size_t i = 0; i < fv.size(); ++i) {
                rows.push_back({named[k].first, files[k][i].filename().string(), fv[i]});
                set.features.emplace_back(fv[i].values.begin(), fv[i].values.end());
              }
              sets.push_back(std::move(set));
            }
            BandwidthPolicy policy;
            policy.median_heuristic = o->bandwidth == 0.0;
            policy.fixed = o->bandwidth > 0.0 ? o->bandwidth : 1.0;
            const auto dist = domain_distance_matrix(sets, policy);
            const auto mds = classical_mds(dist, std::min<std::size_t>(2, dist.size() - 1));
            write_features_csv(o->out / "features.csv", rows);
            write_file(o->out / "domain_gap.json", domain_report_json(dist, mds, rows, policy));
            write_file(o->out / "mds.svg", mds_svg(dist, mds));
            manifest.add_output(o->out / "features.csv");
            manifest.add_output(o->out / "domain_gap.json");
            manifest.add_output(o->out / "mds.svg");
            manifest.write(o->out / "manifest.json");
            for (std::size_t i = 0; i < dist.size(); ++i) {
              for (std::size_t j = i + 1; j < dist.size(); ++j) {
                std::cout << dist.labels[i] << " - " << dist.labels[j] << ": " << fmt(dist.at(i, j)) << "\n";
              }
            }
            return kExitOk;
          }};
}

// ---------------------------------------------------------------- pretrain

Command pretrain_cmd(CLI::App& app, const std::vector<std::string>& argv) {
  struct Opts {
    fs::path corpus;
    fs::path config;
    fs::path out;
    fs::path report;
    fs::path dce;
    std::optional<int> epochs;
    std::optional<std::uint64_t> seed;
    bool force = false;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("pretrain", "Contrastive (NT-Xent) pretraining of the image encoder");
  sub->add_option("--corpus", o->corpus, "Directory of unlabeled images")->required();
  sub->add_option("--config", o->config, "INI file with [pretrain] and [encoder] sections");
  sub->add_option("--out", o->out, "Encoder checkpoint path")->required();
  sub->add_option("--report", o->report, "Loss report JSON (default: <out>.report.json)");
  sub->add_option("--dce", o->dce, "Enhance every image with this DCE checkpoint first");
  sub->add_option("--epochs", o->epochs, "Override the number of epochs");
  sub->add_option("--seed", o->seed, "Override the seed");
  sub->add_flag("--force", o->force, "Allow optimizer settings outside the supported ranges");
  return {sub, [o, argv] {
            PretrainConfig config;
            EncoderSpec spec;
            if (!o->config.empty()) {
              const auto cfg = ConfigFile::load(o->config);
              auto keys = pretrain_config_keys();
              keys.insert({"crop_min", "crop_max", "rotation"});
              cfg.require_known({{"pretrain", keys},
                                 {"encoder", {"channels", "projection_hidden", "projection_dim", "leaky_slope", "input_size"}}});
              config = read_pretrain_config(cfg, "pretrain");
              config.augment.crop_ratio_min = cfg.get_double("pretrain", "crop_min", config.augment.crop_ratio_min);
              config.augment.crop_ratio_max = cfg.get_double("pretrain", "crop_max", config.augment.crop_ratio_max);
              config.augment.max_rotation_deg = cfg.get_double("pretrain", "rotation", config.augment.max_rotation_deg);
              std::vector<std::string> ch;
              for (int c : spec.channels) ch.push_back(std::to_string(c));
              spec.channels.clear();
              for (const auto& c : cfg.get_list("encoder", "channels", ch)) {
                try {
                  spec.channels.push_back(std::stoi(c));
                } catch (const std::exception&) {
                  throw ParameterError("encoder channels must be integers");
                }
              }
              spec.projection_hidden = cfg.get_int("encoder", "projection_hidden", spec.projection_hidden);
              spec.projection_dim = cfg.get_int("encoder", "projection_dim", spec.projection_dim);
              spec.leaky_slope = cfg.get_double("encoder", "leaky_slope", spec.leaky_slope);
              spec.input_size = cfg.get_int("encoder", "input_size", spec.input_size);
            }
            if (o->epochs) config.epochs = *o->epochs;
            if (o->seed) config.seed = *o->seed;
            config.force = config.force || o->force;
            config.validate();
            spec.validate();
            std::optional<DceModel> enhancer;
            if (!o->dce.empty()) {
              require_file(o->dce, "DCE checkpoint");
              enhancer = load_dce_model(o->dce);
            }
            const auto images = load_all(require_images(o->corpus));
            const fs::path report_path = o->report.empty() ? fs::path(o->out.string() + ".report.json") : o->report;

            DirectoryLock lock(parent_or_cwd(o->out));
            Manifest manifest("pretrain", argv);
            manifest.set_seed(config.seed);
            auto cj = pretrain_config_json(config, spec);
            cj["dce"] = !o->dce.empty();
            manifest.set_config(cj);
            const auto result = pretrain_encoder(images, spec, config, enhancer ? &*enhancer : nullptr);
            const json report{{"epoch_loss", result.epoch_loss},
                              {"initial_loss", result.initial_loss},
                              {"final_loss", result.final_loss},
                              {"images", images.size()},
                              {"seed", config.seed}};
            save_encoder(o->out, result.encoder, {}, json{{"seed", config.seed}, {"epochs", config.epochs}}.dump());
            write_file(report_path, report.dump(2) + "\n");
            manifest.add_output(o->out);
            manifest.add_output(report_path);
            manifest.write(manifest_beside(o->out));
            std::cout << "NT-Xent " << fmt(result.initial_loss) << " -> " << fmt(result.final_loss) << "\n";
            return kExitOk;
          }};
}

// ---------------------------------------------------------------- evaluate

Command evaluate_cmd(CLI::App& app, const std::vector<std::string>& argv) {
  struct Opts {
    fs::path spec;
    fs::path out;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("evaluate",
                                 "Run the ID cross-validation, zero-shot and few-shot OOD protocol for every variant");
  sub->add_option("--spec", o->spec, "Experiment spec (INI key = value file)")->required();
  sub->add_option("--out", o->out, "Report directory")->required();
  return {sub, [o, argv] {
            const auto cfg = ConfigFile::load(o->spec);
            const ExperimentSpec spec = read_experiment_spec(cfg);
            DirectoryLock lock(o->out);
            Manifest manifest("evaluate", argv);
            manifest.set_config({{"spec_file", o->spec.string()}, {"spec_text", cfg.text()}});
            std::ofstream log(o->out / "run.log", std::ios::binary);
            ExperimentHooks hooks;
            hooks.log = [&log](const std::string& line) {
              log << line << "\n" << std::flush;
              std::cout << line << "\n" << std::flush;
            };
            const auto report = run_experiment(spec, o->out, hooks);
            write_file(o->out / "report.json", report.to_json());
            write_file(o->out / "few_shot.csv", report.few_shot_csv());
            manifest.add_output(o->out / "report.json");
            manifest.add_output(o->out / "few_shot.csv");
            manifest.add_output(o->out / "partial");
            manifest.write(o->out / "manifest.json");
            for (Variant v : report.variants()) {
              const auto id = report.in_distribution(v);
              std::cout << to_string(v) << ": in-distribution AUC " << fmt(id.mean) << " +- " << fmt(id.std);
              for (const auto& d : report.ood_datasets) std::cout << ", " << d << " zero-shot " << fmt(report.zero_shot(v, d).mean);
              std::cout << "\n";
            }
            return kExitOk;
          }};
}

// ---------------------------------------------------------------- hit-rate

Command hit_rate_cmd(CLI::App& app, const std::vector<std::string>& argv) {
  struct Opts {
    fs::path attention;
    fs::path attention_dir;
    fs::path targets;
    fs::path out;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("hit-rate", "Pointing-game hit rate of attention maxima against lesion boxes");
  auto* csv = sub->add_option("--attention", o->attention, "CSV of image,x,y attention maxima");
  auto* dir = sub->add_option("--attention-dir", o->attention_dir,
                              "Directory of attention maps; the argmax of each map is used");
  csv->excludes(dir);
  sub->add_option("--targets", o->targets, "CSV of image,x_min,y_min,x_max,y_max[,category]")->required();
  sub->add_option("--out", o->out, "Result JSON")->required();
  return {sub, [o, argv] {
            if (o->attention.empty() == o->attention_dir.empty()) {
              throw ParameterError("give exactly one of --attention or --attention-dir");
            }
            require_file(o->targets, "targets file");
            std::vector<AttentionPoint> points;
            if (!o->attention.empty()) {
              require_file(o->attention, "attention file");
              points = read_attention_csv(o->attention);
            } else {
              for (const auto& f : require_images(o->attention_dir)) {
                points.push_back({f.filename().string(), attention_argmax(load_image(f).view())});
              }
            }
            const auto targets = read_targets_csv(o->targets);
            DirectoryLock lock(parent_or_cwd(o->out));
            Manifest manifest("hit-rate", argv);
            manifest.set_config({{"attention", o->attention.empty() ? o->attention_dir.string() : o->attention.string()},
                                 {"targets", o->targets.string()}});
            const auto report = evaluate_hits(points, targets);
            write_file(o->out, report.to_json());
            manifest.add_output(o->out);
            manifest.write(manifest_beside(o->out));
            std::cout << "hit rate " << fmt(report.hit_rate) << " (" << report.hits << "/" << report.images << ")\n";
            return kExitOk;
          }};
}

}  // namespace

std::vector<Command> register_commands(CLI::App& app, const std::vector<std::string>& argv) {
  return {phantom_gen(app, argv), train_dce_cmd(app, argv), enhance_cmd(app, argv), domain_gap_cmd(app, argv),
          pretrain_cmd(app, argv), evaluate_cmd(app, argv), hit_rate_cmd(app, argv)};
}

}  // namespace lungforge::cli
