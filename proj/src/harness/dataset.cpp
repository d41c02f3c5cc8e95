#include "iob/harness/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "iob/util/rng.hpp"

namespace iob::harness {

namespace {

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  std::string tmp(s);
  char* end = nullptr;
  out = std::strtod(tmp.c_str(), &end);
  return end == tmp.c_str() + tmp.size() && std::isfinite(out);
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> f;
  std::size_t start = 0;
  while (true) {
    auto t = line.find('\t', start);
    f.push_back(line.substr(start, t == std::string_view::npos ? std::string_view::npos : t - start));
    if (t == std::string_view::npos) break;
    start = t + 1;
  }
  return f;
}

constexpr double kMetresPerDegree = 111194.9266;

}  // namespace

Bbox parse_bbox(std::string_view s) {
  std::vector<double> v;
  std::stringstream ss{std::string(s)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    double d;
    if (!parse_double(item, d)) throw std::invalid_argument("bbox: '" + item + "' is not a number");
    v.push_back(d);
  }
  if (v.size() != 4) throw std::invalid_argument("bbox needs lat1,lat2,lon1,lon2");
  Bbox b{std::min(v[0], v[1]), std::max(v[0], v[1]), std::min(v[2], v[3]), std::max(v[2], v[3])};
  if (b.lat_min < -90 || b.lat_max > 90 || b.lon_min < -180 || b.lon_max > 180)
    throw std::invalid_argument("bbox outside valid coordinates");
  return b;
}

IngestResult ingest(std::istream& is, const Bbox& box, CapabilityRange cap, std::uint64_t seed) {
  if (!(cap.lo >= 0 && cap.hi >= cap.lo)) throw std::invalid_argument("capability range must satisfy 0 <= lo <= hi");
  IngestResult r;
  std::map<std::uint32_t, std::pair<double, double>> loc;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++r.stats.rows;
    auto f = split_tabs(line);
    double lat, lon;
    std::uint32_t id = 0;
    if (f.size() != 5 || !parse_double(f[2], lat) || !parse_double(f[3], lon) || lat < -90 || lat > 90 ||
        lon < -180 || lon > 180) {
      ++r.stats.malformed;
      continue;
    }
    auto [p, ec] = std::from_chars(f[4].data(), f[4].data() + f[4].size(), id);
    if (ec != std::errc{} || p != f[4].data() + f[4].size()) {
      ++r.stats.malformed;
      continue;
    }
    if (!box.contains(lat, lon)) {
      ++r.stats.outside;
      continue;
    }
    if (!loc.emplace(id, std::make_pair(lat, lon)).second) ++r.stats.duplicates;
  }
  if (loc.empty()) throw std::runtime_error("no nodes");
  Rng rng(seed);
  for (const auto& [id, ll] : loc)
    r.nodes.push_back({id, ll.first, ll.second, cap.lo + (cap.hi - cap.lo) * uniform01(rng)});
  return r;
}

IngestResult ingest_file(const std::string& path, const Bbox& box, CapabilityRange cap, std::uint64_t seed) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  return ingest(f, box, cap, seed);
}

void write_synthetic(std::ostream& os, const Bbox& box, const SyntheticParams& p, std::uint64_t seed) {
  if (p.centers == 0 && p.background < 1) throw std::invalid_argument("synthetic data needs centers");
  Rng rng(seed);
  const double margin_lat = std::min(0.1, (box.lat_max - box.lat_min) / 10);
  const double margin_lon = std::min(0.1, (box.lon_max - box.lon_min) / 10);
  struct Centre {
    double lat, lon, weight;
  };
  std::vector<Centre> cs;
  double total = 0;
  for (std::size_t c = 0; c < p.centers; ++c) {
    const double lat = box.lat_min + margin_lat + (box.lat_max - box.lat_min - 2 * margin_lat) * uniform01(rng);
    const double lon = box.lon_min + margin_lon + (box.lon_max - box.lon_min - 2 * margin_lon) * uniform01(rng);
    const double w = 0.2 + uniform01(rng);
    cs.push_back({lat, lon, w});
    total += w;
  }
  std::normal_distribution<double> nd(0, 1);
  struct Row {
    std::uint32_t user;
    std::int64_t when;
    double lat, lon;
    std::uint32_t loc;
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < p.locations; ++i) {
    double lat, lon;
    if (cs.empty() || uniform01(rng) < p.background) {
      lat = box.lat_min + (box.lat_max - box.lat_min) * uniform01(rng);
      lon = box.lon_min + (box.lon_max - box.lon_min) * uniform01(rng);
    } else {
      double pick = uniform01(rng) * total;
      std::size_t c = 0;
      while (c + 1 < cs.size() && pick >= cs[c].weight) pick -= cs[c++].weight;
      do {
        lat = cs[c].lat + nd(rng) * p.spread_m / kMetresPerDegree;
        lon = cs[c].lon + nd(rng) * p.spread_m / (kMetresPerDegree * std::cos(cs[c].lat * M_PI / 180));
      } while (!box.contains(lat, lon));
    }
    const auto id = static_cast<std::uint32_t>(10000 + i);
    const int visits = 1 + static_cast<int>(rng() % 4);
    for (int v = 0; v < visits; ++v)
      rows.push_back({static_cast<std::uint32_t>(rng() % 50000), 1234567890 + static_cast<std::int64_t>(rng() % 50000000),
                      lat, lon, id});
  }
  std::shuffle(rows.begin(), rows.end(), rng);
  char buf[160];
  for (const auto& r : rows) {
    const std::time_t t = r.when;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char when[32];
    std::strftime(when, sizeof when, "%Y-%m-%dT%H:%M:%SZ", &tm);
    std::snprintf(buf, sizeof buf, "%u\t%s\t%.6f\t%.6f\t%u\n", r.user, when, r.lat, r.lon, r.loc);
    os << buf;
  }
}

std::vector<NodeRecord> sample(std::span<const NodeRecord> pool, std::size_t n, std::uint64_t seed) {
  if (n > pool.size())
    throw std::invalid_argument("asked for " + std::to_string(n) + " nodes but only " + std::to_string(pool.size()) +
                                " are available");
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  std::vector<NodeRecord> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(pool[idx[i]]);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

namespace {

std::vector<double> eps1_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 160; ++i) g.push_back(100.0 * std::pow(2000.0, i / 160.0));  // 100 m .. 200 km
  return g;
}

}  // namespace

Calibration calibrate_band(std::span<const NodeRecord> nodes, cluster::DbscanParams base, double lo, double hi) {
  if (nodes.empty()) throw std::invalid_argument("calibration needs nodes");
  const double mid = (lo + hi) / 2;
  Calibration best;
  double best_gap = 1e300;
  // the configured eps2 first, so it wins ties
  for (double scale : {1.0, 0.75, 1.5, 0.5, 2.0}) {
    for (double e : eps1_grid()) {
      auto p = base;
      p.eps1_m = e;
      p.eps2 = base.eps2 * scale;
      auto a = cluster::cluster(nodes, p);
      const double frac = static_cast<double>(a.max_cluster_size()) / static_cast<double>(nodes.size());
      const double gap = std::fabs(frac - mid);
      if (gap < best_gap) {
        best_gap = gap;
        best.params = p;
        best.max_fraction = frac;
        best.assignment = std::move(a);
      }
    }
    if (best.max_fraction >= lo && best.max_fraction <= hi) break;
  }
  return best;
}

Calibration calibrate_cluster_size(std::span<const NodeRecord> nodes, std::size_t focus, std::size_t target,
                                   cluster::DbscanParams base) {
  if (focus >= nodes.size()) throw std::out_of_range("focus node beyond node set");
  Calibration best;
  std::size_t best_gap = SIZE_MAX;
  for (double e : eps1_grid()) {
    auto p = base;
    p.eps1_m = e;
    auto a = cluster::cluster(nodes, p);
    std::size_t size = 0;
    if (const int l = a.labels[focus]; l != cluster::kNoise)
      size = static_cast<std::size_t>(std::count(a.labels.begin(), a.labels.end(), l));
    const std::size_t gap = size > target ? size - target : target - size;
    if (gap < best_gap) {
      best_gap = gap;
      best.params = p;
      best.max_fraction = static_cast<double>(a.max_cluster_size()) / static_cast<double>(nodes.size());
      best.target_size = size;
      best.assignment = std::move(a);
    }
    if (size > target && gap > best_gap) break;
  }
  return best;
}

}  // namespace iob::harness
