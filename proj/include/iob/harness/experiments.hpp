#pragma once

// The four evaluation experiments. Each one is a pure function of
// (config, seed): node pool, sub-samples, protocol randomness and crypto
// costs are all derived from them, so the CSV and metadata it produces are
// byte-identical across runs. Protocol-level checks run inside every
// experiment; a failed check throws ExperimentCheckFailed.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "iob/cluster/dbscan.hpp"
#include "iob/gossip/gossip.hpp"
#include "iob/harness/config.hpp"
#include "iob/harness/dataset.hpp"
#include "iob/sim/cost_model.hpp"
#include "iob/sim/simulator.hpp"

namespace iob::harness {

struct ExperimentCheckFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Context {
  Config cfg;
  std::uint64_t seed = 1;
  std::string dataset_mode;  // "gowalla" or "synthetic"
  std::vector<NodeRecord> pool;
  IngestStats ingest;
  std::string backend;
  sim::LatencyModel latency;
  sim::CostModel costs;
  cluster::DbscanParams dbscan;  // eps1 is replaced by calibration
  double ca_fraction = 0.25;
  double band_lo = 0.40;
  double band_hi = 0.72;
  gossip::GossipParams gossip;   // eps3 = 0 means twice the calibrated eps1
  std::vector<std::string> checks;  // names of protocol checks that passed
};

/// Validates `cfg` (a full config, usually default_config() with overrides
/// merged in) and builds the node pool.
Context make_context(const Config& cfg, std::uint64_t seed);

struct SampleCalibration {
  double eps1_m = 0;
  double eps2 = 0;
  double max_fraction = 0;
  int clusters = 0;
  std::size_t noise = 0;
  bool single_cluster = false;  // clustered mode degenerates to flat
};

struct ConsensusPoint {
  std::size_t n = 0;
  std::vector<SampleCalibration> samples;  // one per sampled node set
  std::vector<double> flat_time, clustered_time, global_time;  // seconds, per (sample, trial)
  std::vector<double> flat_msgs, clustered_msgs, global_msgs;
};
std::vector<ConsensusPoint> exp_consensus(Context& ctx);

struct AuthPoint {
  std::size_t n = 0;
  std::string mode;  // unclustered | clustered
  double time = 0;   // seconds, request -> f+1 tokens
  std::uint32_t q = 0;
  std::uint32_t t = 0;
  double eps1_m = 0;        // clustered only
  std::size_t cluster_size = 0;
  bool fallback = false;    // no usable cluster; all nodes verify
};
std::vector<AuthPoint> exp_auth(Context& ctx);

struct MultiuserPoint {
  std::size_t users = 0;
  std::vector<double> times;  // per user, seconds
  double mean = 0;
  double p95 = 0;
};
std::vector<MultiuserPoint> exp_auth_multiuser(Context& ctx);

struct AccessPoint {
  std::uint32_t N = 0;
  std::size_t item_size = 0;
  double overhead = 0;  // seconds: keygen compute + request -> result
  double keygen = 0;
  double round = 0;
};
std::vector<AccessPoint> exp_access(Context& ctx);

struct ExperimentOutput {
  std::string name;
  std::string csv;
  std::string metadata;  // JSON
};

inline constexpr std::string_view kExperiments[] = {"consensus", "auth", "auth-multiuser", "access"};

/// Runs one experiment and renders its CSV (every row carries config_hash
/// and seed) and metadata. Throws std::invalid_argument for unknown names.
ExperimentOutput run_experiment(std::string_view name, const Config& cfg, std::uint64_t seed);

/// Writes <dir>/<name>.csv and <dir>/<name>.metadata.json.
void write_output(const ExperimentOutput& out, const std::string& dir);

}  // namespace iob::harness
