#include "lungforge/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "lungforge/errors.hpp"
#include "lungforge/image_io.hpp"
#include "lungforge/rng.hpp"

namespace lungforge {

namespace {

constexpr std::uint64_t kLabelStream = 0xC0FFEE;

bool finite_all(std::initializer_list<double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double v) { return std::isfinite(v); });
}

void check_probability(const char* name, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw_parameter(std::string(name) + " must lie in [0, 1]");
}

// 5x7 glyph rows for the burned-in label, drawn at random from this set.
constexpr std::uint8_t kGlyphs[][7] = {
    {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}, {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},
    {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}, {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11},
    {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}, {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F},
    {0x0E, 0x11, 0x10, 0x0E, 0x01, 0x11, 0x0E}, {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11},
};

void draw_text(Plane& img, Rng& rng, double intensity) {
  constexpr int kScale = 2;
  const int chars = 3 + static_cast<int>(rng.index(3));
  const int text_w = chars * 6 * kScale;
  const int text_h = 7 * kScale;
  const int margin = 6;
  const bool right = rng.bernoulli(0.5);
  const bool bottom = rng.bernoulli(0.5);
  const int x0 = right ? img.width() - margin - text_w : margin;
  const int y0 = bottom ? img.height() - margin - text_h : margin;
  for (int c = 0; c < chars; ++c) {
    const auto& glyph = kGlyphs[rng.index(std::size(kGlyphs))];
    for (int r = 0; r < 7; ++r) {
      for (int b = 0; b < 5; ++b) {
        if (((glyph[r] >> (4 - b)) & 1) == 0) continue;
        for (int dy = 0; dy < kScale; ++dy) {
          for (int dx = 0; dx < kScale; ++dx) {
            img.at(x0 + (c * 6 + b) * kScale + dx, y0 + r * kScale + dy) = intensity;
          }
        }
      }
    }
  }
}

void draw_stroke(Plane& img, double x0, double y0, double x1, double y1, double half_width,
                 double intensity) {
  const double dx = x1 - x0;
  const double dy = y1 - y0;
  const double len2 = dx * dx + dy * dy;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double t = len2 > 0 ? ((x - x0) * dx + (y - y0) * dy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double ex = x - (x0 + t * dx);
      const double ey = y - (y0 + t * dy);
      if (ex * ex + ey * ey <= half_width * half_width) img.at(x, y) = intensity;
    }
  }
}

Box box_around(double cx, double cy, double r) {
  return {static_cast<int>(std::floor(cx - r)), static_cast<int>(std::floor(cy - r)),
          static_cast<int>(std::ceil(cx + r)), static_cast<int>(std::ceil(cy + r))};
}

bool box_inside(const Box& b, const Ellipse& e) {
  return e.contains(b.x_min, b.y_min) && e.contains(b.x_max, b.y_min) &&
         e.contains(b.x_min, b.y_max) && e.contains(b.x_max, b.y_max);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

void DomainConfig::validate() const {
  if (!finite_all({brightness_offset, contrast_gain, noise_sigma, text_intensity,
                   artifact_intensity, background_intensity, body_intensity, lung_intensity,
                   lesion_contrast})) {
    throw_parameter("domain " + name + " has non-finite values");
  }
  if (!(contrast_gain > 0.0)) throw_parameter("contrast_gain must be positive");
  if (noise_sigma < 0.0) throw_parameter("noise_sigma must be non-negative");
  check_probability("text_probability", text_probability);
  check_probability("artifact_probability", artifact_probability);
}

DomainConfig DomainConfig::preset(const std::string& name) {
  DomainConfig d;
  d.name = name;
  if (name == "A") return d;
  if (name == "B") {
    d.brightness_offset = 0.25;
    d.contrast_gain = 0.9;
    d.text_probability = 0.8;
    d.text_intensity = 0.95;
    return d;
  }
  if (name == "C") {
    d.noise_sigma = 0.08;
    d.artifact_probability = 0.7;
    d.artifact_intensity = 0.9;
    return d;
  }
  throw_parameter("unknown domain preset '" + name + "' (expected A, B or C)");
}

PhantomSample generate_phantom(std::uint64_t seed, const DomainConfig& domain, int label) {
  domain.validate();
  if (label != 0 && label != 1) throw_parameter("label must be 0 or 1");
  Rng rng(seed);
  const int n = kPhantomSize;
  const double s = n;

  PhantomSample out;
  out.label = label;
  out.domain = domain.name;
  out.seed = seed;

  const Ellipse body{s * 0.5 + rng.uniform(-4, 4), s * 0.54 + rng.uniform(-4, 4),
                     s * rng.uniform(0.40, 0.45), s * rng.uniform(0.42, 0.46)};
  const double lung_dx = s * rng.uniform(0.16, 0.19);
  const double lung_cy = s * 0.48 + rng.uniform(-5, 5);
  for (int k = 0; k < 2; ++k) {
    out.lungs[k] = Ellipse{body.cx + (k == 0 ? -lung_dx : lung_dx) + rng.uniform(-3, 3),
                           lung_cy + rng.uniform(-3, 3), s * rng.uniform(0.115, 0.14),
                           s * rng.uniform(0.25, 0.30)};
  }
  const double spine_half = s * rng.uniform(0.03, 0.045);
  const double rib_freq = rng.uniform(7.0, 9.0) / s;
  const double rib_phase = rng.uniform(0.0, 1.0);
  const double level_jitter = rng.uniform(-0.03, 0.03);

  double lesion_sigma = 0.0;
  if (label == 1) {
    lesion_sigma = rng.uniform(9.0, 14.0);
    const int side = static_cast<int>(rng.index(2));
    const Ellipse& lung = out.lungs[side];
    for (int attempt = 0;; ++attempt) {
      const double cx = lung.cx + rng.uniform(-lung.rx, lung.rx);
      const double cy = lung.cy + rng.uniform(-lung.ry, lung.ry);
      const Box box = box_around(cx, cy, 2.0 * lesion_sigma);
      if (box_inside(box, lung)) {
        out.lesion_cx = cx;
        out.lesion_cy = cy;
        out.lesion_box = box;
        break;
      }
      if (attempt > 1000) {  // shrink until it fits; always terminates near the center
        lesion_sigma *= 0.9;
        attempt = 0;
      }
    }
  }

  Plane img(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double v = domain.background_intensity;
      if (body.contains(x, y)) {
        v = domain.body_intensity + level_jitter;
        if (std::abs(x - body.cx) < spine_half) v = 0.5 + level_jitter;
        for (const auto& lung : out.lungs) {
          if (lung.contains(x, y)) {
            v = domain.lung_intensity + level_jitter;
            const double rib = std::sin(2.0 * std::numbers::pi *
                                        (rib_freq * y + 0.002 * std::abs(x - body.cx) + rib_phase));
            if (rib > 0.55) v += 0.12;
          }
        }
      }
      if (label == 1) {
        const double dx = x - out.lesion_cx;
        const double dy = y - out.lesion_cy;
        const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * lesion_sigma * lesion_sigma));
        if (out.lungs[0].contains(x, y) || out.lungs[1].contains(x, y)) {
          v += domain.lesion_contrast * w;
        }
      }
      v = domain.contrast_gain * v + domain.brightness_offset;
      img.at(x, y) = v;
    }
  }
  if (domain.noise_sigma > 0.0) {
    for (double& v : img.values()) v += domain.noise_sigma * rng.normal();
  }
  if (rng.bernoulli(domain.text_probability)) draw_text(img, rng, domain.text_intensity);
  if (rng.bernoulli(domain.artifact_probability)) {
    const int strokes = 1 + static_cast<int>(rng.index(3));
    for (int k = 0; k < strokes; ++k) {
      const double x0 = rng.uniform(0.1, 0.9) * s;
      const double y0 = rng.uniform(0.0, 0.3) * s;
      const double x1 = rng.uniform(0.1, 0.9) * s;
      const double y1 = rng.uniform(0.5, 1.0) * s;
      draw_stroke(img, x0, y0, x1, y1, rng.uniform(1.0, 2.0), domain.artifact_intensity);
    }
  }
  out.image = GrayImage::from_clamped(std::move(img));
  return out;
}

std::vector<PhantomSample> generate_corpus(int n, std::uint64_t seed, const DomainConfig& domain,
                                           double positive_fraction) {
  if (n < 1) throw_parameter("corpus size must be at least 1");
  check_probability("positive_fraction", positive_fraction);
  domain.validate();
  const auto positives = static_cast<std::size_t>(std::lround(n * positive_fraction));
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, kLabelStream));
  rng.shuffle(order.begin(), order.end());
  std::vector<int> labels(order.size(), 0);
  for (std::size_t i = 0; i < positives; ++i) labels[order[i]] = 1;

  std::vector<PhantomSample> out(order.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = generate_phantom(derive_seed(seed, i), domain, labels[i]);
  }
  return out;
}

std::string phantom_file_name(std::size_t index) {
  std::ostringstream os;
  os << "phantom_";
  os.width(5);
  os.fill('0');
  os << index << ".png";
  return os.str();
}

void write_corpus(const std::filesystem::path& dir, const std::vector<PhantomSample>& samples) {
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / "manifest.csv", std::ios::trunc);
  if (!csv) throw IoError("cannot write " + (dir / "manifest.csv").string());
  csv << "file,label,x_min,y_min,x_max,y_max,domain\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& smp = samples[i];
    const std::string file = phantom_file_name(i);
    save_png16(dir / file, smp.image);
    csv << file << ',' << smp.label << ',';
    if (smp.lesion_box) {
      const auto& b = *smp.lesion_box;
      csv << b.x_min << ',' << b.y_min << ',' << b.x_max << ',' << b.y_max;
    } else {
      csv << ",,,";
    }
    csv << ',' << smp.domain << '\n';
  }
  if (!csv) throw IoError("failed writing manifest in " + dir.string());
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "file,label,x_min,y_min,x_max,y_max,domain") {
    throw FormatError(path.string() + ": unexpected manifest header");
  }
  std::vector<ManifestRow> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(trim(cell));
    if (f.size() == 6) f.emplace_back();
    if (f.size() != 7) throw FormatError(path.string() + ": malformed row '" + line + "'");
    ManifestRow row;
    row.file = f[0];
    row.domain = f[6];
    try {
      row.label = std::stoi(f[1]);
      if (!f[2].empty()) row.box = Box{std::stoi(f[2]), std::stoi(f[3]), std::stoi(f[4]), std::stoi(f[5])};
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": malformed row '" + line + "'");
    }
    if (row.label != 0 && row.label != 1) throw FormatError(path.string() + ": label must be 0 or 1");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace lungforge
