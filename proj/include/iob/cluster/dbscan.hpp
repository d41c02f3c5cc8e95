#pragma once

// DBSCAN over two metrics at once: a node's neighbourhood is the set of
// nodes that are both within eps1 metres geographically and within eps2 in
// communication capability.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace iob::cluster {

enum class Role { unassigned, leader, secondary, ca };
const char* to_string(Role r);

struct NodeRecord {
  std::uint32_t id = 0;
  double lat = 0;
  double lon = 0;
  double capability = 0;
  Role role = Role::unassigned;
};

/// Throws std::invalid_argument when coordinates or capability are out of range.
void validate(const NodeRecord& n);

enum class GeoMetric { haversine, planar };

struct DbscanParams {
  double eps1_m = 5000;  // spatial radius, metres
  double eps2 = 1.0;     // capability radius
  std::uint32_t minpts = 4;
  GeoMetric metric = GeoMetric::haversine;
};

void validate(const DbscanParams& p);

inline constexpr double kEarthRadiusM = 6371000.0;

double haversine_m(double lat1, double lon1, double lat2, double lon2);
/// Equirectangular distance evaluated at the pair's mean latitude.
double planar_m(double lat1, double lon1, double lat2, double lon2);
double geo_distance_m(const NodeRecord& a, const NodeRecord& b, GeoMetric m);

/// Indices (into `all`) of nodes inside both radii of `all[node]`, including itself.
std::vector<std::size_t> dual_neighborhood(std::size_t node, std::span<const NodeRecord> all,
                                           const DbscanParams& params);

inline constexpr int kNoise = -1;

struct ClusterAssignment {
  std::vector<int> labels;     // per input position: cluster id or kNoise
  std::vector<bool> is_core;   // per input position
  int cluster_count = 0;

  std::vector<std::vector<std::size_t>> members() const;  // by cluster id
  std::size_t noise_count() const;
  std::size_t max_cluster_size() const;
};

/// Deterministic DBSCAN: nodes are visited in ascending id order, cluster ids
/// are numbered by their lowest core id, and a border node reachable from
/// several clusters joins the lowest id. The partition is therefore invariant
/// under input permutation.
ClusterAssignment cluster(std::span<const NodeRecord> nodes, const DbscanParams& params);

struct ClusterRoles {
  std::vector<std::size_t> leader;               // by cluster id, index into nodes
  std::vector<std::vector<std::size_t>> ca;      // by cluster id
};

/// Leader = member nearest the cluster centroid; CA = the ceil(ca_fraction *
/// size) highest-capability remaining members (the leader itself when alone);
/// everyone else secondary. Noise nodes stay unassigned.
ClusterRoles assign_roles(std::span<NodeRecord> nodes, const ClusterAssignment& a,
                          double ca_fraction = 0.25);

/// Writes `node_id,cluster_id,role` with cluster_id -1 for noise.
void write_assignment_csv(std::ostream& os, std::span<const NodeRecord> nodes,
                          const ClusterAssignment& a);

/// Node CSV used between `iob ingest` and `iob cluster`: id,lat,lon,capability.
void write_nodes_csv(std::ostream& os, std::span<const NodeRecord> nodes);
std::vector<NodeRecord> read_nodes_csv(std::istream& is);

}  // namespace iob::cluster
