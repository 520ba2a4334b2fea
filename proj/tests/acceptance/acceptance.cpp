// Acceptance suite: one PASS/FAIL line per criterion.
//
// Usage: lungforge_acceptance [--cli <lungforge>] [--work <dir>] [--spec <benchmark.cfg>]
// Criteria 8 and 9 need --spec, criterion 10 needs --cli; without them the
// line reads SKIP and the exit code is non-zero.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "lungforge/config_file.hpp"
#include "lungforge/dce_losses.hpp"
#include "lungforge/dce_trainer.hpp"
#include "lungforge/domain_gap.hpp"
#include "lungforge/experiment.hpp"
#include "lungforge/metrics.hpp"
#include "lungforge/ntxent.hpp"
#include "lungforge/phantom.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
namespace lf = lungforge;
namespace lt = lungforge::testing;

namespace {

// Tolerances and sizes.
constexpr double kFdStep = 1e-4;
constexpr double kFdRelTol = 1e-4;
constexpr int kFdSide = 8;
constexpr int kCompositeCoords = 100;
constexpr double kGradientSeconds = 60.0;

// First verified run of the 20-phantom, 30-epoch default training gave a
// final/first ratio of 0.878; the bound sits just above it.
constexpr double kConvergenceRatio = 0.90;
constexpr int kConvergenceImages = 20;
constexpr int kConvergenceEpochs = 30;
constexpr double kConvergenceSeconds = 600.0;

constexpr int kEntropyImages = 50;
constexpr double kEntropyFraction = 0.8;

constexpr double kBenchmarkSeconds = 1800.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  bool skipped = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
  const char* tag = o.skipped ? "SKIP" : (o.pass ? "PASS" : "FAIL");
  if (!o.pass || o.skipped) ++failures;
  std::printf("%s %2d %s: %s\n", tag, id, name.c_str(), o.detail.c_str());
  std::fflush(stdout);
}

template <typename... Args>
std::string format(const char* fmt, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

std::vector<lf::PlaneView> one(const lf::Plane& p) { return {p.view()}; }

/// Tracks the worst relative error of a gradient check.
struct FdTracker {
  double worst = 0.0;
  int checked = 0;
  void add(double analytic, double numeric) {
    worst = std::max(worst, lt::relative_error(analytic, numeric));
    ++checked;
  }
};

// ---------------------------------------------------------------- 1

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  FdTracker adaptive, local, region, ntxent, composite;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto x = lt::random_plane(kFdSide, kFdSide, seed);
    {
      auto a = lt::random_plane(kFdSide, kFdSide, seed + 100, 0.05, 2.0);
      const std::vector<lf::AdaptiveLossParams> ps{{1.2, 0.05, 0.3}};
      const auto g = lf::adaptive_loss_grad(one(a), one(x), ps);
      for (std::size_t i = 0; i < a.size(); ++i) {
        adaptive.add(g.grad[0].values()[i],
                     lt::central_difference([&] { return lf::adaptive_loss(one(a), one(x), ps); }, a.values()[i], kFdStep));
      }
    }
    {
      auto y = lt::random_plane(kFdSide, kFdSide, seed + 200);
      const auto g = lf::local_conflict_loss_smooth_grad(one(y), one(x), 0.1);
      for (std::size_t i = 0; i < y.size(); ++i) {
        local.add(g.grad[0].values()[i],
                  lt::central_difference([&] { return lf::local_conflict_loss_smooth(one(y), one(x), 0.1); },
                                         y.values()[i], kFdStep));
      }
    }
    {
      auto y = lt::random_plane(kFdSide, kFdSide, seed + 300);
      const auto g = lf::region_conflict_loss_grad(one(x), one(y), 4);
      for (std::size_t i = 0; i < y.size(); ++i) {
        region.add(g.grad[0].values()[i],
                   lt::central_difference([&] { return lf::region_conflict_loss(one(x), one(y), 4); }, y.values()[i],
                                          kFdStep));
      }
    }
    {
      const auto p = lt::random_plane(kFdSide, kFdSide, seed + 400);
      lf::EmbeddingBatch z(kFdSide, kFdSide, std::vector<double>(p.values().begin(), p.values().end()));
      const auto g = lf::ntxent_batch_loss_grad(z, 0.5);
      for (std::size_t i = 0; i < z.data.size(); ++i) {
        ntxent.add(g.grad[i], lt::central_difference([&] { return lf::ntxent_batch_loss(z, 0.5); }, z.data[i], kFdStep));
      }
    }
    {
      auto model = lf::init_dce_model({}, seed);
      const auto img = lt::random_image(kFdSide, kFdSide, seed + 10);
      const lf::AdaptiveLossParams prm{1.0, 0.0, 0.4};
      const lf::LossWeights w{1.0, 1.0, 1.0};
      const auto grad = lt::composite_grad(model, img.view(), prm, w, 4, 0.1);
      const auto value = [&] { return lt::composite_loss(model, img.view(), prm, w, 4, 0.1); };
      lf::Rng rng(seed + 20);
      int checked = 0;
      int guard = 0;
      while (checked < kCompositeCoords && guard++ < 20 * kCompositeCoords) {
        auto& t = model.params.tensors()[rng.index(model.params.tensors().size())];
        const std::size_t i = rng.index(t.values.size());
        const double keep = t.values[i];
        // Skip coordinates whose probe points cross a ReLU or pooling switch.
        t.values[i] = keep + kFdStep;
        const auto up = lt::unet_pattern(model, img.view());
        t.values[i] = keep - kFdStep;
        const auto down = lt::unet_pattern(model, img.view());
        t.values[i] = keep;
        if (up != down) continue;
        composite.add(grad.at(t.name).values[i], lt::central_difference(value, t.values[i], kFdStep));
        ++checked;
      }
      if (checked < kCompositeCoords) return {false, false, format("composite seed %d: only %d coordinates", int(seed), checked)};
    }
  }
  const double secs = seconds_since(t0);
  const double worst = std::max({adaptive.worst, local.worst, region.worst, ntxent.worst, composite.worst});
  Outcome o;
  o.pass = worst < kFdRelTol && secs < kGradientSeconds;
  o.detail = format(
      "max rel err adaptive %.2e, local %.2e, region %.2e, ntxent %.2e, composite %.2e (%d coords); %.1f s",
      adaptive.worst, local.worst, region.worst, ntxent.worst, composite.worst, composite.checked, secs);
  return o;
}

// ---------------------------------------------------------------- 2

double local_conflict_oracle(const lf::Plane& y, const lf::Plane& x) {
  const int dx[4] = {1, -1, 0, 0};
  const int dy[4] = {0, 0, 1, -1};
  double conflicts = 0.0;
  for (int r = 0; r < x.height(); ++r) {
    for (int c = 0; c < x.width(); ++c) {
      for (int d = 0; d < 4; ++d) {
        const int c2 = c + dx[d];
        const int r2 = r + dy[d];
        if (c2 < 0 || c2 >= x.width() || r2 < 0 || r2 >= x.height()) continue;
        conflicts += ((y.at(c, r) > y.at(c2, r2)) != (x.at(c, r) > x.at(c2, r2))) ? 1.0 : 0.0;
      }
    }
  }
  return conflicts / (4.0 * x.width() * x.height());
}

Outcome loss_oracles() {
  std::vector<std::string> bad;
  // Local conflict on hand cases.
  const lf::Plane x2(2, 2, std::vector<double>{0.1, 0.7, -0.3, 0.4});
  lf::Plane neg = x2;
  for (double& v : neg.values()) v = -v;
  if (lf::local_conflict_loss_exact(one(x2), one(x2)) != 0.0) bad.push_back("2x2 identity");
  if (lf::local_conflict_loss_exact(one(neg), one(x2)) != 0.5) bad.push_back("2x2 negation");
  const lf::Plane a3(3, 3, std::vector<double>{0, 0, 1, 2, 3, 4, 5, 6, 7});
  const lf::Plane b3(3, 3, std::vector<double>{0, 0, 1, 2, 3, 4, 5, 7, 6});
  if (lf::local_conflict_loss_exact(one(b3), one(a3)) != 2.0 / 36.0) bad.push_back("3x3 swap");
  if (lf::local_conflict_loss_exact(one(b3), one(a3)) != local_conflict_oracle(b3, a3)) bad.push_back("3x3 oracle");

  // Region loss is zero exactly when the gram matrices agree.
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto x = lt::random_plane(8, 8, s);
    const auto y = lt::random_plane(8, 8, s + 50);
    const bool equal_gram = lf::gram(lf::square_flatten(x.view(), 4)).data == lf::gram(lf::square_flatten(y.view(), 4)).data;
    if (lf::region_conflict_loss(one(x), one(x), 4) != 0.0) bad.push_back("region self");
    if ((lf::region_conflict_loss(one(x), one(y), 4) == 0.0) != equal_gram) bad.push_back("region random");
    // Sign flip keeps every inner product, so the gram matrices match.
    lf::Plane flipped = x;
    for (double& v : flipped.values()) v = -v;
    if (lf::gram(lf::square_flatten(flipped.view(), 4)).data != lf::gram(lf::square_flatten(x.view(), 4)).data ||
        lf::region_conflict_loss(one(x), one(flipped), 4) != 0.0) {
      bad.push_back("region sign flip");
    }
  }

  // Adaptive loss closed forms.
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto x = lt::random_plane(8, 8, s);
    const lf::AdaptiveLossParams prm{1.5, 0.1, 0.3};
    auto target = lf::gaussian_weight_map(x.view(), prm.sigma, prm.theta);
    for (double& v : target.values()) v *= prm.ts;
    const std::vector<lf::AdaptiveLossParams> ps{prm};
    worst = std::max(worst, std::abs(lf::adaptive_loss(one(target), one(x), ps)));
    for (double& v : target.values()) v += 1.0;
    worst = std::max(worst, std::abs(lf::adaptive_loss(one(target), one(x), ps) - 0.5));
  }
  if (worst > 1e-12) bad.push_back("adaptive closed forms");

  Outcome o;
  o.pass = bad.empty();
  o.detail = bad.empty() ? format("hand cases exact, gram equivalence both ways, adaptive max err %.1e", worst)
                         : "failed: " + bad.front();
  return o;
}

// ---------------------------------------------------------------- 3

Outcome ntxent_closed_forms() {
  const lf::EmbeddingBatch pair(2, 3, {0.3, -1.2, 0.5, 2.0, 0.1, -0.7});
  const double single = lf::ntxent_batch_loss(pair, 0.5);
  const lf::EmbeddingBatch same(4, 2, {1, 2, 1, 2, 1, 2, 1, 2});
  const double ln3 = std::abs(lf::ntxent_batch_loss(same, 0.5) - std::log(3.0));
  double scale_err = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto p = lt::random_plane(5, 8, s);
    lf::EmbeddingBatch z(8, 5, std::vector<double>(p.values().begin(), p.values().end()));
    const double v = lf::ntxent_batch_loss(z, 0.5);
    lf::Rng rng(s + 9);
    for (std::size_t r = 0; r < z.rows; ++r) {
      const double k = rng.uniform(0.1, 10.0);
      for (double& e : z.row(r)) e *= k;
    }
    scale_err = std::max(scale_err, std::abs(lf::ntxent_batch_loss(z, 0.5) - v));
  }
  Outcome o;
  o.pass = single == 0.0 && ln3 < 1e-9 && scale_err < 1e-9;
  o.detail = format("2N=2 -> %g, |l - ln 3| = %.1e, rescaling err %.1e", single, ln3, scale_err);
  return o;
}

// ---------------------------------------------------------------- 4

Outcome domain_gap_pipeline() {
  bool glcm_ok = true;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto img = lt::random_plane(8, 8, s);
    std::vector<int> q;
    for (double v : img.values()) q.push_back(lf::quantize_level(v, 4));
    for (auto dir : lf::kGlcmDirections) {
      const int d = 1;
      const int dx = dir == lf::GlcmDirection::Deg90 ? 0 : (dir == lf::GlcmDirection::Deg135 ? -d : d);
      const int dy = dir == lf::GlcmDirection::Deg0 ? 0 : -d;
      glcm_ok = glcm_ok && lf::glcm(img.view(), 4, dir, d).p == lt::brute_force_glcm(q, 8, 8, 4, dx, dy);
    }
  }
  lf::FeatureSet a;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto p = lt::random_plane(6, 1, s);
    a.emplace_back(p.values().begin(), p.values().end());
  }
  const double self = lf::mmd(a, a, 1.0);
  const double two_point = lf::mmd({{0.0}}, {{1.0}}, 1.0);
  const double two_point_err = std::abs(two_point - 2.0 * (1.0 - std::exp(-0.5)));
  double mds_err = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const std::size_t n = 5 + s;
    const auto p = lt::random_plane(2, static_cast<int>(n), s, -3.0, 3.0);
    const auto dist = [&](const std::vector<double>& pts, std::size_t i, std::size_t j) {
      return std::hypot(pts[2 * i] - pts[2 * j], pts[2 * i + 1] - pts[2 * j + 1]);
    };
    const std::vector<double> pts(p.values().begin(), p.values().end());
    std::vector<double> d(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) d[i * n + j] = dist(pts, i, j);
    }
    const auto r = lf::classical_mds(d, n, 2);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) mds_err = std::max(mds_err, std::abs(dist(r.coords, i, j) - d[i * n + j]));
    }
  }
  Outcome o;
  o.pass = glcm_ok && self < 1e-12 && two_point_err < 1e-9 && mds_err < 1e-6;
  o.detail = format("GLCM oracle %s, mmd(A,A) %.1e, two-point err %.1e, MDS err %.1e", glcm_ok ? "exact" : "MISMATCH",
                    self, two_point_err, mds_err);
  return o;
}

// ---------------------------------------------------------------- 5

Outcome metric_oracles() {
  lf::Rng rng(5);
  int mismatches = 0;
  int instances = 0;
  while (instances < 200) {
    const std::size_t n = 2 + rng.index(19);
    std::vector<double> s(n);
    std::vector<int> y(n);
    // Coarse scores force ties.
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.index(6)) / 5.0;
      y[i] = static_cast<int>(rng.index(2));
    }
    if (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), 0) == 0) continue;
    ++instances;
    if (lf::auc(s, y) != lt::brute_force_auc(s, y)) ++mismatches;
  }
  const std::vector<lf::Point> pts{{1, 1}, {5, 5}, {9, 2}, {3, 8}};
  const std::vector<lf::Box> boxes{{0, 0, 2, 2}, {0, 0, 4, 4}, {8, 1, 9, 2}, {0, 0, 2, 2}};
  const double hits = lf::hit_rate(pts, boxes);
  Outcome o;
  o.pass = mismatches == 0 && hits == 0.5;
  o.detail = format("%d/200 AUC mismatches vs pairwise counting, hit rate %g (hand count 0.5)", mismatches, hits);
  return o;
}

// ---------------------------------------------------------------- 6, 7

std::vector<lf::GrayImage> phantom_images(int n, std::uint64_t seed) {
  std::vector<lf::GrayImage> out;
  for (auto& s : lf::generate_corpus(n, seed, lf::DomainConfig::preset("A"), 0.5)) out.push_back(std::move(s.image));
  return out;
}

Outcome convergence(lf::DceModel& trained) {
  const auto t0 = Clock::now();
  lf::TrainConfig cfg;
  cfg.epochs = kConvergenceEpochs;
  auto result = lf::train_dce(phantom_images(kConvergenceImages, 0), cfg);
  const double secs = seconds_since(t0);
  trained = std::move(result.model);
  const double first = result.report.epochs.front().mean.total;
  const double last = result.report.epochs.back().mean.total;
  Outcome o;
  o.pass = last <= kConvergenceRatio * first && secs < kConvergenceSeconds;
  o.detail = format("loss %.5f -> %.5f, ratio %.4f (bound %.2f), %.0f s", first, last, last / first, kConvergenceRatio,
                    secs);
  return o;
}

Outcome histogram_flattening(const lf::DceModel& model) {
  const auto originals = phantom_images(kEntropyImages, 1);
  const auto enhanced = lf::enhance_images(model, originals);
  int improved = 0;
  for (std::size_t i = 0; i < originals.size(); ++i) {
    const double before = lf::histogram_entropy(lf::histogram(originals[i].view(), lf::kEntropyBins));
    const double after = lf::histogram_entropy(lf::histogram(enhanced[i].view(), lf::kEntropyBins));
    if (after >= before) ++improved;
  }
  Outcome o;
  o.pass = improved >= kEntropyFraction * kEntropyImages;
  o.detail = format("entropy not lower on %d/%d images (need %.0f%%)", improved, kEntropyImages, 100 * kEntropyFraction);
  return o;
}

// ---------------------------------------------------------------- 8, 9

void benchmark(const fs::path& spec_path, const fs::path& work, Outcome& ood, Outcome& fewshot) {
  const auto t0 = Clock::now();
  const auto spec = lf::read_experiment_spec(lf::ConfigFile::load(spec_path));
  lf::ExperimentHooks hooks;
  hooks.log = [&](const std::string& line) { std::fprintf(stderr, "[%7.1f] %s\n", seconds_since(t0), line.c_str()); };
  const auto rep = lf::run_experiment(spec, work / "benchmark", hooks);
  const double secs = seconds_since(t0);

  const auto mean_zero = [&](lf::Variant v) {
    double s = 0.0;
    for (const auto& d : rep.ood_datasets) s += rep.zero_shot(v, d).mean;
    return s / static_cast<double>(rep.ood_datasets.size());
  };
  const double base = mean_zero(lf::Variant::Baseline);
  const double dce = mean_zero(lf::Variant::Dce);
  bool scc_ge = false;
  std::string per_domain;
  for (const auto& d : rep.ood_datasets) {
    const double s = rep.zero_shot(lf::Variant::Scc, d).mean;
    const double e = rep.zero_shot(lf::Variant::Dce, d).mean;
    scc_ge = scc_ge || s >= e;
    per_domain += format(" %s scc %.4f/dce %.4f", d.c_str(), s, e);
  }
  ood.pass = dce > base && scc_ge && secs < kBenchmarkSeconds;
  ood.detail = format("mean zero-shot dce %.4f vs baseline %.4f;", dce, base) + per_domain + format("; %.0f s", secs);

  fewshot.pass = true;
  for (const auto& d : rep.ood_datasets) {
    const double z = rep.zero_shot(lf::Variant::Scc, d).mean;
    const double f01 = rep.few_shot(lf::Variant::Scc, d, 0.1).mean;
    const double f10 = rep.few_shot(lf::Variant::Scc, d, 1.0).mean;
    fewshot.pass = fewshot.pass && f10 >= f01 && f01 >= z;
    fewshot.detail += format("%s zero %.4f <= f0.1 %.4f <= f1.0 %.4f; ", d.c_str(), z, f01, f10);
  }
}

// ---------------------------------------------------------------- 10

int run_cli(const std::string& cmd) {
  const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

bool is_manifest(const fs::path& p) {
  const auto name = p.filename().string();
  return name == "manifest.json" || name.ends_with(".manifest.json") || name == ".lungforge.lock";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Files under `dir` (relative paths), manifests excluded.
std::vector<fs::path> outputs(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && !is_manifest(e.path())) files.push_back(fs::relative(e.path(), dir));
  }
  std::sort(files.begin(), files.end());
  return files;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

/// Runs every subcommand into `dir` with the same flags.
bool cli_pass(const std::string& cli, const fs::path& dir, std::string& failed) {
  fs::create_directories(dir);
  const auto q = [&](const fs::path& p) { return "'" + (dir / p).string() + "'"; };
  write_text(dir / "dce.cfg", "[dce]\nepochs = 2\nbatch_size = 4\nunet_base = 4\nforce = true\n");
  write_text(dir / "pretrain.cfg", "[pretrain]\nepochs = 2\nbatch_size = 4\nforce = true\n[encoder]\nchannels = 4, 8\ninput_size = 32\n");
  write_text(dir / "spec.cfg",
             "[experiment]\nvariants = baseline, dce, simclr, scc\nseeds = 0, 1\nworking_size = 16\n"
             "[corpus]\nid_count = 24\nood_names = D_B, D_C\nood_domains = B, C\nood_count = 24\npool_count = 8\n"
             "[protocol]\nfolds = 2\nood_test_ratio = 0.25\n"
             "[dce]\nimages = 4\nepochs = 1\nbatch_size = 2\nunet_base = 2\nforce = true\n"
             "[pretrain]\nepochs = 1\nbatch_size = 4\nforce = true\n"
             "[encoder]\nchannels = 4, 8\n[classifier]\nepochs = 2\n[fewshot]\nfractions = 0.5, 1.0\nepochs = 2\n");
  write_text(dir / "att.csv", "image,x,y\nphantom_00000.png,30,30\nphantom_00001.png,2,2\n");
  write_text(dir / "targets.csv", "image,x_min,y_min,x_max,y_max\nphantom_00000.png,20,20,40,40\nphantom_00001.png,50,50,60,60\n");
  const std::vector<std::string> cmds{
      cli + " phantom-gen --n 8 --seed 3 --domain A --out " + q("a"),
      cli + " phantom-gen --n 8 --seed 4 --domain B --out " + q("b"),
      cli + " train-dce --corpus " + q("a") + " --config " + q("dce.cfg") + " --seed 7 --out " + q("model.dce"),
      cli + " enhance --checkpoint " + q("model.dce") + " --input " + q("b") + " --out " + q("enh"),
      cli + " domain-gap --datasets A=" + q("a") + " B=" + q("b") + " --out " + q("gap"),
      cli + " pretrain --corpus " + q("a") + " --config " + q("pretrain.cfg") + " --dce " + q("model.dce") +
          " --seed 7 --out " + q("enc.enc"),
      cli + " hit-rate --attention " + q("att.csv") + " --targets " + q("targets.csv") + " --out " + q("hits.json"),
      cli + " evaluate --spec " + q("spec.cfg") + " --out " + q("report"),
  };
  for (const auto& c : cmds) {
    if (run_cli(c) != 0) {
      failed = c;
      return false;
    }
  }
  return true;
}

Outcome determinism(const std::string& cli, const fs::path& work) {
  // Both passes run in the same directory so flags match exactly; outputs are moved aside after each.
  const fs::path cur = work / "determinism" / "cur";
  const fs::path r1 = work / "determinism" / "run1";
  const fs::path r2 = work / "determinism" / "run2";
  fs::remove_all(work / "determinism");
  std::string failed;
  for (const auto& dst : {r1, r2}) {
    if (!cli_pass(cli, cur, failed)) return {false, false, "command failed: " + failed};
    fs::rename(cur, dst);
  }
  const auto f1 = outputs(r1);
  const auto f2 = outputs(r2);
  if (f1 != f2) return {false, false, "output file sets differ"};
  std::size_t differing = 0;
  std::string first;
  for (const auto& f : f1) {
    if (slurp(r1 / f) != slurp(r2 / f)) {
      if (differing++ == 0) first = f.string();
    }
  }
  Outcome o;
  o.pass = differing == 0;
  o.detail = differing == 0 ? format("8 commands, %zu output files byte-identical", f1.size())
                            : format("%zu files differ, first ", differing) + first;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  fs::path work = fs::temp_directory_path() / "lungforge_acceptance";
  fs::path spec;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string k = argv[i];
    if (k == "--cli") {
      cli = argv[i + 1];
    } else if (k == "--work") {
      work = argv[i + 1];
    } else if (k == "--spec") {
      spec = argv[i + 1];
    } else {
      std::fprintf(stderr, "unknown argument %s\n", k.c_str());
      return 2;
    }
  }
  fs::create_directories(work);

  const auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, false, std::string("exception: ") + e.what()};
    }
  };

  report(1, "gradient correctness", guarded(gradient_correctness));
  report(2, "loss oracles", guarded(loss_oracles));
  report(3, "NT-Xent closed forms", guarded(ntxent_closed_forms));
  report(4, "domain-gap pipeline", guarded(domain_gap_pipeline));
  report(5, "metric oracles", guarded(metric_oracles));

  lf::DceModel trained;
  bool have_model = false;
  report(6, "DCE training convergence", guarded([&] {
           auto o = convergence(trained);
           have_model = true;
           return o;
         }));
  report(7, "histogram flattening", have_model ? guarded([&] { return histogram_flattening(trained); })
                                               : Outcome{false, false, "no trained model"});

  Outcome ood{true, true, "no --spec given"};
  Outcome fewshot{true, true, "no --spec given"};
  if (!spec.empty()) {
    try {
      ood = Outcome{};
      fewshot = Outcome{};
      benchmark(spec, work, ood, fewshot);
    } catch (const std::exception& e) {
      ood = fewshot = Outcome{false, false, std::string("exception: ") + e.what()};
    }
  }
  report(8, "OOD direction", ood);
  report(9, "few-shot monotone trend", fewshot);

  report(10, "CLI determinism",
         cli.empty() ? Outcome{true, true, "no --cli given"} : guarded([&] { return determinism(cli, work); }));

  std::printf("%s: %d of 10 criteria not passed\n", failures == 0 ? "ALL PASS" : "NOT ALL PASS", failures);
  return failures == 0 ? 0 : 1;
}
