#include "lungforge/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lungforge/errors.hpp"

namespace lungforge {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                               std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (first) {
      header = std::move(cells);
      first = false;
    } else {
      rows.push_back(std::move(cells));
    }
  }
  return rows;
}

double to_double(const std::string& s, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": not a number: '" + s + "'");
  }
}

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw_dimension("scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        pos_rank_sum += midrank;
        ++pos;
      } else if (labels[order[k]] != 0) {
        throw_parameter("labels must be 0 or 1");
      }
    }
    i = j;
  }
  const std::size_t neg = scores.size() - pos;
  if (pos == 0 || neg == 0) throw UndefinedMetricError("AUC needs both classes");
  const double p = static_cast<double>(pos);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

Point attention_argmax(PlaneView map) {
  if (map.values.empty()) throw_dimension("attention map is empty");
  const auto it = std::max_element(map.values.begin(), map.values.end());
  const auto idx = static_cast<std::size_t>(it - map.values.begin());
  return {static_cast<double>(idx % static_cast<std::size_t>(map.width)),
          static_cast<double>(idx / static_cast<std::size_t>(map.width))};
}

double hit_rate(std::span<const Point> points, std::span<const Box> targets) {
  if (points.empty()) throw_parameter("hit rate of an empty set");
  if (points.size() != targets.size()) throw_dimension("points and targets differ in length");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < points.size(); ++i) hits += targets[i].contains(points[i].x, points[i].y);
  return static_cast<double>(hits) / static_cast<double>(points.size());
}

std::vector<AttentionPoint> read_attention_csv(const std::filesystem::path& path) {
  std::vector<std::string> header;
  const auto rows = read_csv(path, header);
  if (header != std::vector<std::string>{"image", "x", "y"}) {
    throw FormatError(path.string() + ": expected header image,x,y");
  }
  std::vector<AttentionPoint> out;
  for (const auto& r : rows) {
    if (r.size() != 3) throw FormatError(path.string() + ": expected 3 columns");
    out.push_back({r[0], {to_double(r[1], path), to_double(r[2], path)}});
  }
  return out;
}

std::vector<TargetBox> read_targets_csv(const std::filesystem::path& path) {
  std::vector<std::string> header;
  const auto rows = read_csv(path, header);
  const std::vector<std::string> base{"image", "x_min", "y_min", "x_max", "y_max"};
  const bool with_category = header.size() == 6 && header[5] == "category";
  if (!std::equal(base.begin(), base.end(), header.begin(), header.end() - (with_category ? 1 : 0))) {
    throw FormatError(path.string() + ": expected header image,x_min,y_min,x_max,y_max[,category]");
  }
  std::vector<TargetBox> out;
  for (const auto& r : rows) {
    if (r.size() != header.size()) throw FormatError(path.string() + ": wrong column count");
    TargetBox t;
    t.image = r[0];
    t.box = Box{static_cast<int>(to_double(r[1], path)), static_cast<int>(to_double(r[2], path)),
                static_cast<int>(to_double(r[3], path)), static_cast<int>(to_double(r[4], path))};
    if (with_category) t.category = r[5];
    out.push_back(std::move(t));
  }
  return out;
}

std::string HitReport::to_json() const {
  nlohmann::json j;
  j["images"] = images;
  j["hits"] = hits;
  j["hit_rate"] = hit_rate;
  auto& cats = j["categories"] = nlohmann::json::object();
  for (const auto& c : categories) {
    cats[c.name] = {{"images", c.images},
                    {"hits", c.hits},
                    {"hit_rate", c.images > 0 ? static_cast<double>(c.hits) / c.images : 0.0}};
  }
  j["unmatched"] = unmatched;
  return j.dump(2) + "\n";
}

HitReport evaluate_hits(const std::vector<AttentionPoint>& points,
                        const std::vector<TargetBox>& targets) {
  std::map<std::string, Point> by_image;
  for (const auto& p : points) by_image[p.image] = p.point;
  HitReport rep;
  std::map<std::string, HitReport::Category> cats;
  std::vector<Point> pts;
  std::vector<Box> boxes;
  for (const auto& t : targets) {
    const auto it = by_image.find(t.image);
    if (it == by_image.end()) {
      rep.unmatched.push_back(t.image);
      continue;
    }
    const bool hit = t.box.contains(it->second.x, it->second.y);
    pts.push_back(it->second);
    boxes.push_back(t.box);
    if (!t.category.empty()) {
      auto& c = cats[t.category];
      c.name = t.category;
      ++c.images;
      c.hits += hit;
    }
  }
  rep.hit_rate = hit_rate(pts, boxes);
  rep.images = pts.size();
  rep.hits = static_cast<std::size_t>(std::lround(rep.hit_rate * static_cast<double>(pts.size())));
  for (auto& [name, c] : cats) rep.categories.push_back(c);
  return rep;
}

}  // namespace lungforge
