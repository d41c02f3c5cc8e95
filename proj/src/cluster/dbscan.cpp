#include "iob/cluster/dbscan.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace iob::cluster {

namespace {
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;
}  // namespace

const char* to_string(Role r) {
  switch (r) {
    case Role::unassigned: return "unassigned";
    case Role::leader: return "leader";
    case Role::secondary: return "secondary";
    case Role::ca: return "ca";
  }
  return "?";
}

void validate(const NodeRecord& n) {
  if (!(n.lat >= -90 && n.lat <= 90)) throw std::invalid_argument("latitude out of [-90, 90]");
  if (!(n.lon >= -180 && n.lon <= 180)) throw std::invalid_argument("longitude out of [-180, 180]");
  if (!(n.capability >= 0)) throw std::invalid_argument("capability must be nonnegative");
}

void validate(const DbscanParams& p) {
  if (!(p.eps1_m > 0) || !(p.eps2 > 0)) throw std::invalid_argument("eps1 and eps2 must be positive");
  if (p.minpts < 1) throw std::invalid_argument("minpts must be at least 1");
}

double haversine_m(double lat1, double lon1, double lat2, double lon2) {
  const double p1 = lat1 * kDegToRad, p2 = lat2 * kDegToRad;
  const double dp = (lat2 - lat1) * kDegToRad, dl = (lon2 - lon1) * kDegToRad;
  const double a = std::sin(dp / 2) * std::sin(dp / 2) +
                   std::cos(p1) * std::cos(p2) * std::sin(dl / 2) * std::sin(dl / 2);
  return 2 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(a)));
}

double planar_m(double lat1, double lon1, double lat2, double lon2) {
  const double mean = (lat1 + lat2) / 2 * kDegToRad;
  const double dx = (lon2 - lon1) * kDegToRad * std::cos(mean) * kEarthRadiusM;
  const double dy = (lat2 - lat1) * kDegToRad * kEarthRadiusM;
  return std::sqrt(dx * dx + dy * dy);
}

double geo_distance_m(const NodeRecord& a, const NodeRecord& b, GeoMetric m) {
  return m == GeoMetric::haversine ? haversine_m(a.lat, a.lon, b.lat, b.lon)
                                   : planar_m(a.lat, a.lon, b.lat, b.lon);
}

namespace {

bool within(const NodeRecord& a, const NodeRecord& b, const DbscanParams& p) {
  return std::abs(a.capability - b.capability) <= p.eps2 && geo_distance_m(a, b, p.metric) <= p.eps1_m;
}

// Lat/lon bucketing sized so that any pair within eps1 sits in adjacent
// cells. Falls back to brute force near the poles or the antimeridian.
class GridIndex {
 public:
  GridIndex(std::span<const NodeRecord> nodes, const DbscanParams& p) : nodes_(nodes), p_(p) {
    if (nodes.empty()) return;
    double max_abs_lat = 0;
    double min_lon = 180, max_lon = -180;
    for (const auto& n : nodes) {
      max_abs_lat = std::max(max_abs_lat, std::abs(n.lat));
      min_lon = std::min(min_lon, n.lon);
      max_lon = std::max(max_lon, n.lon);
    }
    const double cos_max = std::cos(max_abs_lat * kDegToRad);
    const double ang = p.eps1_m / kEarthRadiusM;
    if (cos_max < 1e-3 || ang > 0.5) return;
    cell_lat_ = ang * kRadToDeg;
    const double hav_lon = 2 * std::asin(std::min(1.0, std::sin(ang / 2) / cos_max)) * kRadToDeg;
    cell_lon_ = std::max(hav_lon, ang / cos_max * kRadToDeg) * 1.000001;
    cell_lat_ *= 1.000001;
    if (cell_lon_ > 45 || min_lon - cell_lon_ < -180 || max_lon + cell_lon_ > 180) return;
    for (std::size_t i = 0; i < nodes.size(); ++i) cells_[key(cell_of(nodes[i]))].push_back(i);
    enabled_ = true;
  }

  std::vector<std::size_t> query(std::size_t i) const {
    std::vector<std::size_t> out;
    const auto& self = nodes_[i];
    if (!enabled_) {
      for (std::size_t j = 0; j < nodes_.size(); ++j)
        if (j == i || within(self, nodes_[j], p_)) out.push_back(j);
      return out;
    }
    auto [cy, cx] = cell_of(self);
    for (std::int64_t dy = -1; dy <= 1; ++dy)
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        auto it = cells_.find(key({cy + dy, cx + dx}));
        if (it == cells_.end()) continue;
        for (auto j : it->second)
          if (j == i || within(self, nodes_[j], p_)) out.push_back(j);
      }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::pair<std::int64_t, std::int64_t> cell_of(const NodeRecord& n) const {
    return {static_cast<std::int64_t>(std::floor(n.lat / cell_lat_)),
            static_cast<std::int64_t>(std::floor(n.lon / cell_lon_))};
  }
  static std::int64_t key(std::pair<std::int64_t, std::int64_t> c) {
    return (c.first << 32) ^ (c.second & 0xFFFFFFFF);
  }

  std::span<const NodeRecord> nodes_;
  DbscanParams p_;
  bool enabled_ = false;
  double cell_lat_ = 0, cell_lon_ = 0;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> cells_;
};

}  // namespace

std::vector<std::size_t> dual_neighborhood(std::size_t node, std::span<const NodeRecord> all,
                                           const DbscanParams& params) {
  validate(params);
  if (node >= all.size()) throw std::out_of_range("node index out of range");
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < all.size(); ++j)
    if (j == node || within(all[node], all[j], params)) out.push_back(j);
  return out;
}

ClusterAssignment cluster(std::span<const NodeRecord> nodes, const DbscanParams& params) {
  validate(params);
  const std::size_t n = nodes.size();
  ClusterAssignment a;
  a.labels.assign(n, kNoise);
  a.is_core.assign(n, false);
  if (n == 0) return a;

  GridIndex index(nodes, params);
  std::vector<std::vector<std::size_t>> neigh(n);
  for (std::size_t i = 0; i < n; ++i) {
    neigh[i] = index.query(i);
    a.is_core[i] = neigh[i].size() >= params.minpts;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return nodes[x].id < nodes[y].id; });

  constexpr int kUnset = -2;
  std::vector<int> label(n, kUnset);
  int next = 0;
  std::vector<std::size_t> stack;
  for (auto i : order) {
    if (!a.is_core[i] || label[i] != kUnset) continue;
    label[i] = next;
    stack.push_back(i);
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      for (auto v : neigh[u]) {
        if (a.is_core[v] && label[v] == kUnset) {
          label[v] = next;
          stack.push_back(v);
        }
      }
    }
    ++next;
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (a.is_core[i]) {
      a.labels[i] = label[i];
      continue;
    }
    int best = kNoise;
    for (auto v : neigh[i])
      if (a.is_core[v] && (best == kNoise || label[v] < best)) best = label[v];
    a.labels[i] = best;
  }
  a.cluster_count = next;
  return a;
}

std::vector<std::vector<std::size_t>> ClusterAssignment::members() const {
  std::vector<std::vector<std::size_t>> m(static_cast<std::size_t>(cluster_count));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != kNoise) m[static_cast<std::size_t>(labels[i])].push_back(i);
  return m;
}

std::size_t ClusterAssignment::noise_count() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kNoise));
}

std::size_t ClusterAssignment::max_cluster_size() const {
  std::size_t best = 0;
  for (const auto& m : members()) best = std::max(best, m.size());
  return best;
}

ClusterRoles assign_roles(std::span<NodeRecord> nodes, const ClusterAssignment& a, double ca_fraction) {
  ClusterRoles roles;
  for (auto& n : nodes) n.role = Role::unassigned;
  for (const auto& members : a.members()) {
    double lat = 0, lon = 0;
    for (auto i : members) {
      lat += nodes[i].lat;
      lon += nodes[i].lon;
    }
    lat /= static_cast<double>(members.size());
    lon /= static_cast<double>(members.size());
    auto leader = *std::min_element(members.begin(), members.end(), [&](std::size_t x, std::size_t y) {
      double dx = haversine_m(lat, lon, nodes[x].lat, nodes[x].lon);
      double dy = haversine_m(lat, lon, nodes[y].lat, nodes[y].lon);
      return dx != dy ? dx < dy : nodes[x].id < nodes[y].id;
    });
    std::vector<std::size_t> rest;
    for (auto i : members)
      if (i != leader) rest.push_back(i);
    std::sort(rest.begin(), rest.end(), [&](std::size_t x, std::size_t y) {
      return nodes[x].capability != nodes[y].capability ? nodes[x].capability > nodes[y].capability
                                                        : nodes[x].id < nodes[y].id;
    });
    auto want = static_cast<std::size_t>(std::ceil(ca_fraction * static_cast<double>(members.size())));
    want = std::max<std::size_t>(1, want);
    std::vector<std::size_t> ca;
    if (rest.empty()) {
      ca.push_back(leader);
    } else {
      for (std::size_t k = 0; k < std::min(want, rest.size()); ++k) ca.push_back(rest[k]);
    }
    for (auto i : members) nodes[i].role = Role::secondary;
    for (auto i : ca) nodes[i].role = Role::ca;
    nodes[leader].role = Role::leader;
    roles.leader.push_back(leader);
    roles.ca.push_back(std::move(ca));
  }
  return roles;
}

void write_assignment_csv(std::ostream& os, std::span<const NodeRecord> nodes, const ClusterAssignment& a) {
  os << "node_id,cluster_id,role\n";
  for (std::size_t i = 0; i < nodes.size(); ++i)
    os << nodes[i].id << ',' << a.labels[i] << ',' << to_string(nodes[i].role) << '\n';
}

void write_nodes_csv(std::ostream& os, std::span<const NodeRecord> nodes) {
  os << "id,lat,lon,capability\n";
  auto old = os.precision(10);
  for (const auto& n : nodes) os << n.id << ',' << n.lat << ',' << n.lon << ',' << n.capability << '\n';
  os.precision(old);
}

std::vector<NodeRecord> read_nodes_csv(std::istream& is) {
  std::vector<NodeRecord> out;
  std::string line;
  bool header = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.rfind("id,", 0) == 0) continue;
    }
    std::istringstream ls(line);
    NodeRecord n;
    char c1, c2, c3;
    if (!(ls >> n.id >> c1 >> n.lat >> c2 >> n.lon >> c3 >> n.capability) || c1 != ',' || c2 != ',' ||
        c3 != ',')
      throw std::runtime_error("malformed node row: " + line);
    validate(n);
    out.push_back(n);
  }
  return out;
}

}  // namespace iob::cluster
