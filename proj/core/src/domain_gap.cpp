#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lungforge/domain_gap.hpp"
#include "lungforge/errors.hpp"

namespace lungforge {

namespace {

std::size_t check_sets(const FeatureSet& a, const FeatureSet& b) {
  if (a.empty() || b.empty()) throw_parameter("MMD needs two non-empty feature sets");
  const std::size_t dim = a.front().size();
  auto same = [dim](const std::vector<double>& v) { return v.size() == dim; };
  if (!std::all_of(a.begin(), a.end(), same) || !std::all_of(b.begin(), b.end(), same)) {
    throw_dimension("feature vectors differ in length");
  }
  return dim;
}

double squared_distance(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return s;
}

double mean_kernel(const FeatureSet& x, const FeatureSet& y, double inv2h2) {
  double s = 0.0;
  for (const auto& u : x) {
    for (const auto& v : y) s += std::exp(-squared_distance(u, v) * inv2h2);
  }
  return s / (static_cast<double>(x.size()) * static_cast<double>(y.size()));
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

double mmd(const FeatureSet& a, const FeatureSet& b, double bandwidth) {
  check_sets(a, b);
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw_parameter("MMD bandwidth must be positive");
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  const double v = mean_kernel(a, a, inv) + mean_kernel(b, b, inv) - 2.0 * mean_kernel(a, b, inv);
  return std::max(0.0, v);
}

double median_bandwidth(const FeatureSet& a, const FeatureSet& b) {
  check_sets(a, b);
  FeatureSet all(a);
  all.insert(all.end(), b.begin(), b.end());
  std::vector<double> d;
  d.reserve(all.size() * (all.size() - 1) / 2);
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = i + 1; j < all.size(); ++j) d.push_back(std::sqrt(squared_distance(all[i], all[j])));
  }
  if (d.empty()) return 1.0;
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  double med = *mid;
  if (d.size() % 2 == 0) med = 0.5 * (med + *std::max_element(d.begin(), mid));
  return med > 0.0 ? med : 1.0;
}

std::pair<FeatureSet, FeatureSet> standardize_jointly(const FeatureSet& a, const FeatureSet& b) {
  const std::size_t dim = check_sets(a, b);
  const double n = static_cast<double>(a.size() + b.size());
  std::vector<double> mean(dim, 0.0);
  std::vector<double> sd(dim, 0.0);
  for (const auto* set : {&a, &b}) {
    for (const auto& v : *set) {
      for (std::size_t k = 0; k < dim; ++k) mean[k] += v[k] / n;
    }
  }
  for (const auto* set : {&a, &b}) {
    for (const auto& v : *set) {
      for (std::size_t k = 0; k < dim; ++k) sd[k] += (v[k] - mean[k]) * (v[k] - mean[k]) / n;
    }
  }
  for (double& s : sd) s = std::sqrt(s);
  auto apply = [&](const FeatureSet& set) {
    FeatureSet out(set);
    for (auto& v : out) {
      for (std::size_t k = 0; k < dim; ++k) v[k] = sd[k] > 1e-12 ? (v[k] - mean[k]) / sd[k] : 0.0;
    }
    return out;
  };
  return {apply(a), apply(b)};
}

DistanceMatrix domain_distance_matrix(const std::vector<NamedFeatureSet>& datasets,
                                      const BandwidthPolicy& policy) {
  if (datasets.size() < 2) throw_parameter("domain distance needs at least two datasets");
  const std::size_t n = datasets.size();
  DistanceMatrix m;
  for (const auto& ds : datasets) m.labels.push_back(ds.name);
  m.d.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto [a, b] = standardize_jointly(datasets[i].features, datasets[j].features);
      const double h = policy.median_heuristic ? median_bandwidth(a, b) : policy.fixed;
      m.d[i * n + j] = m.d[j * n + i] = mmd(a, b, h);
    }
  }
  return m;
}

void write_features_csv(const std::filesystem::path& path, const std::vector<ImageFeatures>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "dataset,image";
  for (const auto& n : DomainFeatureVector::names()) out << ',' << n;
  out << '\n';
  for (const auto& r : rows) {
    out << r.dataset << ',' << r.image;
    for (double v : r.features.values) out << ',' << fmt(v);
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::string domain_report_json(const DistanceMatrix& d, const MdsResult& mds,
                               const std::vector<ImageFeatures>& rows, const BandwidthPolicy& policy) {
  nlohmann::json j;
  j["datasets"] = d.labels;
  auto& dist = j["distance_matrix"] = nlohmann::json::array();
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::vector<double> row(d.d.begin() + static_cast<std::ptrdiff_t>(i * d.size()),
                            d.d.begin() + static_cast<std::ptrdiff_t>((i + 1) * d.size()));
    dist.push_back(row);
  }
  auto& coords = j["mds"]["coordinates"] = nlohmann::json::object();
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::vector<double> c(mds.coords.begin() + static_cast<std::ptrdiff_t>(i * mds.dim),
                          mds.coords.begin() + static_cast<std::ptrdiff_t>((i + 1) * mds.dim));
    coords[d.labels[i]] = c;
  }
  j["mds"]["eigenvalues"] = mds.eigenvalues;
  j["bandwidth"] = policy.median_heuristic ? nlohmann::json("median") : nlohmann::json(policy.fixed);
  auto& degenerate = j["degenerate_correlation"] = nlohmann::json::object();
  for (const auto& label : d.labels) degenerate[label] = 0;
  for (const auto& r : rows) {
    for (bool flag : r.features.correlation_degenerate) {
      if (flag) degenerate[r.dataset] = degenerate[r.dataset].get<int>() + 1;
    }
  }
  return j.dump(2) + "\n";
}

std::string mds_svg(const DistanceMatrix& d, const MdsResult& mds) {
  constexpr double kSize = 480.0;
  constexpr double kMargin = 60.0;
  double lo_x = 0.0, hi_x = 0.0, lo_y = 0.0, hi_y = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double x = mds.at(i, 0);
    const double y = mds.dim > 1 ? mds.at(i, 1) : 0.0;
    lo_x = std::min(lo_x, x);
    hi_x = std::max(hi_x, x);
    lo_y = std::min(lo_y, y);
    hi_y = std::max(hi_y, y);
  }
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-12});
  const double scale = (kSize - 2 * kMargin) / span;
  const double cx = 0.5 * (lo_x + hi_x);
  const double cy = 0.5 * (lo_y + hi_y);
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize
     << "\" viewBox=\"0 0 " << kSize << ' ' << kSize << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << kMargin << "\" y1=\"" << kSize / 2 << "\" x2=\"" << kSize - kMargin << "\" y2=\""
     << kSize / 2 << "\" stroke=\"#bbb\"/>\n";
  os << "<line x1=\"" << kSize / 2 << "\" y1=\"" << kMargin << "\" x2=\"" << kSize / 2 << "\" y2=\""
     << kSize - kMargin << "\" stroke=\"#bbb\"/>\n";
  os << "<text x=\"" << kSize / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"14\">MDS embedding of dataset MMD distances</text>\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double x = kSize / 2 + (mds.at(i, 0) - cx) * scale;
    const double y = kSize / 2 - ((mds.dim > 1 ? mds.at(i, 1) : 0.0) - cy) * scale;
    os << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"6\" fill=\"#1f77b4\"/>\n";
    os << "<text x=\"" << x + 9 << "\" y=\"" << y - 9 << "\" font-family=\"sans-serif\" font-size=\"13\">"
       << d.labels[i] << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace lungforge
