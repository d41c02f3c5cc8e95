#pragma once

// Brute-force DBSCAN oracle and random instances shared by the cluster tests.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "iob/cluster/dbscan.hpp"
#include "iob/util/rng.hpp"

namespace iob::testsupport {

using namespace iob::cluster;

inline double oracle_haversine(double la1, double lo1, double la2, double lo2) {
  const double r = M_PI / 180;
  const double a = std::sin((la2 - la1) * r / 2), b = std::sin((lo2 - lo1) * r / 2);
  return 2 * 6371000.0 * std::asin(std::sqrt(a * a + std::cos(la1 * r) * std::cos(la2 * r) * b * b));
}

inline bool near(const NodeRecord& a, const NodeRecord& b, const DbscanParams& p) {
  return oracle_haversine(a.lat, a.lon, b.lat, b.lon) <= p.eps1_m && std::fabs(a.capability - b.capability) <= p.eps2;
}

// Reference DBSCAN: cores by counting, core components by union-find,
// components named by lowest core id, borders to the lowest adjacent cluster.
inline std::vector<int> reference(const std::vector<NodeRecord>& v, const DbscanParams& p) {
  const std::size_t n = v.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (near(v[i], v[j], p)) adj[i].push_back(j);
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) core[i] = adj[i].size() >= p.minpts;
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i)
    if (core[i])
      for (auto j : adj[i])
        if (core[j]) parent[find(i)] = find(j);
  std::map<std::size_t, std::uint32_t> min_id;
  for (std::size_t i = 0; i < n; ++i)
    if (core[i]) {
      auto r = find(i);
      auto it = min_id.find(r);
      if (it == min_id.end() || v[i].id < it->second) min_id[r] = v[i].id;
    }
  std::vector<std::pair<std::uint32_t, std::size_t>> roots;
  for (auto [r, id] : min_id) roots.push_back({id, r});
  std::sort(roots.begin(), roots.end());
  std::map<std::size_t, int> label_of;
  for (std::size_t k = 0; k < roots.size(); ++k) label_of[roots[k].second] = static_cast<int>(k);
  std::vector<int> out(n, kNoise);
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) {
      out[i] = label_of[find(i)];
      continue;
    }
    for (auto j : adj[i])
      if (core[j]) {
        int l = label_of[find(j)];
        if (out[i] == kNoise || l < out[i]) out[i] = l;
      }
  }
  return out;
}

// Same partition up to renaming, noise fixed.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] == kNoise) != (b[i] == kNoise)) return false;
    if (a[i] == kNoise) continue;
    if (ab.emplace(a[i], b[i]).first->second != b[i]) return false;
    if (ba.emplace(b[i], a[i]).first->second != a[i]) return false;
  }
  return true;
}

inline std::vector<NodeRecord> random_nodes(Rng& rng, std::size_t n, double spread_deg = 0.05) {
  std::vector<NodeRecord> v;
  const int blobs = 1 + static_cast<int>(rng() % 4);
  std::normal_distribution<double> nd(0, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const int b = static_cast<int>(rng() % blobs);
    NodeRecord r;
    r.id = static_cast<std::uint32_t>(i * 3 + 1);
    r.lat = 39.9 + 0.1 * b + spread_deg * nd(rng);
    r.lon = 116.4 + 0.1 * b + spread_deg * nd(rng);
    r.capability = 1 + 9 * uniform01(rng);
    v.push_back(r);
  }
  return v;
}

inline DbscanParams random_params(Rng& rng) {
  DbscanParams p;
  p.eps1_m = 1000 + 6000 * uniform01(rng);
  p.eps2 = 0.5 + 4 * uniform01(rng);
  p.minpts = 1 + static_cast<std::uint32_t>(rng() % 6);
  return p;
}

}  // namespace iob::testsupport
