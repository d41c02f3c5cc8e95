#pragma once

// Node sets for the experiments: Gowalla check-in ingestion, a synthetic
// check-in generator in the same layout, seeded sub-sampling, and the
// DBSCAN parameter calibration the experiments rely on.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "iob/cluster/dbscan.hpp"

namespace iob::harness {

using cluster::NodeRecord;

struct Bbox {
  double lat_min = 39.433333;
  double lat_max = 41.05;
  double lon_min = 115.416666;
  double lon_max = 117.5;
  bool contains(double lat, double lon) const {
    return lat >= lat_min && lat <= lat_max && lon >= lon_min && lon <= lon_max;
  }
};

/// "lat1,lat2,lon1,lon2" in either order per axis.
Bbox parse_bbox(std::string_view s);

struct CapabilityRange {
  double lo = 1;
  double hi = 10;
};

struct IngestStats {
  std::size_t rows = 0;
  std::size_t malformed = 0;   // skipped with a warning
  std::size_t outside = 0;     // valid rows outside the bbox
  std::size_t duplicates = 0;  // repeat check-ins at a known location_id
};

struct IngestResult {
  std::vector<NodeRecord> nodes;  // one per location_id, ascending id
  IngestStats stats;
};

/// Rows: user_id \t checkin_time \t lat \t lon \t location_id. The first row
/// seen for a location fixes its coordinates; capability ~ U[lo, hi] drawn
/// in ascending location order. Throws std::runtime_error("no nodes") when
/// nothing survives.
IngestResult ingest(std::istream& is, const Bbox& box, CapabilityRange cap, std::uint64_t seed);
IngestResult ingest_file(const std::string& path, const Bbox& box, CapabilityRange cap, std::uint64_t seed);

struct SyntheticParams {
  std::size_t locations = 5349;
  std::size_t centers = 23;
  double spread_m = 2500;    // std-dev of each Gaussian component
  double background = 0.1;   // fraction of locations uniform over the bbox
};

/// Writes check-ins in the Gowalla layout: a mixture of Gaussians inside the
/// bbox, one to four check-ins per location, rows shuffled.
void write_synthetic(std::ostream& os, const Bbox& box, const SyntheticParams& p, std::uint64_t seed);

/// n distinct nodes drawn without replacement, returned in ascending id.
std::vector<NodeRecord> sample(std::span<const NodeRecord> pool, std::size_t n, std::uint64_t seed);

struct Calibration {
  cluster::DbscanParams params;
  cluster::ClusterAssignment assignment;
  double max_fraction = 0;   // largest cluster / node count
  std::size_t target_size = 0;  // size of the cluster holding the focus node, when used
};

/// Scans eps1 on a log grid and keeps the value whose largest cluster is
/// closest to the middle of [lo, hi] (as a fraction of the node count).
/// When the configured eps2 cannot reach the band, scaled eps2 values are
/// tried in turn.
Calibration calibrate_band(std::span<const NodeRecord> nodes, cluster::DbscanParams base, double lo, double hi);

/// Scans eps1 for the value whose cluster containing nodes[focus] has size
/// closest to `target`; ties go to the smaller eps1.
Calibration calibrate_cluster_size(std::span<const NodeRecord> nodes, std::size_t focus, std::size_t target,
                                   cluster::DbscanParams base);

}  // namespace iob::harness
