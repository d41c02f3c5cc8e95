#pragma once

// One-cluster PBFT scenario on a fresh simulator: n replicas, one client
// that submits `requests` blocks, optional crash and Byzantine faults.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "iob/consensus/faults.hpp"
#include "iob/consensus/pbft.hpp"

namespace iob::consensus {

struct FaultSpec {
  enum class Kind { crash, byzantine } kind = Kind::crash;
  SimTime crash_at = 0;
  Strategy strategy = Strategy::silent;
  std::set<std::size_t> alt_recipients;  // replica indices shown proposal B
};

struct RoundSetup {
  std::vector<sim::NodeInfo> replicas;
  sim::NodeInfo client;
  sim::LatencyModel latency;
  std::uint64_t seed = 1;
  std::size_t leader_offset = 0;
  PbftConfig pbft;
  ClientConfig client_cfg;
  std::map<std::size_t, FaultSpec> faults;  // by replica index
  std::size_t requests = 1;
  SimTime request_gap = 0;
  std::size_t payload_size = 256;
  SimTime max_time = from_seconds(3600);
  bool record_trace = false;
};

struct RoundReport {
  std::size_t n = 0;
  bool quiescent = false;
  bool client_done = false;           // every request got f+1 matching replies
  std::vector<SimTime> client_latency;  // per request, submit -> f+1 replies
  bool all_executed = false;          // every honest replica executed every request
  SimTime last_commit = 0;            // latest commit of any request at any honest replica
  bool safe = true;                   // no two honest replicas decided differently at one seq
  bool chains_equal = true;           // honest chains identical (seq, digest)
  std::uint64_t max_view = 0;         // highest view reached by an honest replica
  std::uint64_t protocol_messages = 0;  // PRE_PREPARE + PREPARE + COMMIT + REPLY
  std::map<std::string, std::uint64_t, std::less<>> counts;
  std::vector<bool> honest;
  std::vector<std::vector<ChainEntry>> chains;
  std::vector<sim::TraceEntry> trace;
};

RoundReport run_pbft(const RoundSetup& setup);

/// Pairwise check over honest replicas: for every sequence number decided by
/// two of them, the digests agree; also fails if any replica flagged an
/// internal conflict.
bool decisions_agree(const std::vector<const PbftReplica*>& honest);

}  // namespace iob::consensus
