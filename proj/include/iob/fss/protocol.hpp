#pragma once

// One permission check on the simulator. The user sends each verifier its
// DPF key and proof share; verifiers broadcast τ_j to each other so every
// one of them can run CheckAccess, and the coordinator (verifier 0) answers
// the user with the verdict plus the requested item on accept.

#include <map>
#include <string>
#include <vector>

#include "iob/fss/fss.hpp"
#include "iob/sim/cost_model.hpp"
#include "iob/sim/simulator.hpp"

namespace iob::fss {

struct AccessSetup {
  std::string backend = "prod";
  sim::NodeInfo user;
  std::vector<sim::NodeInfo> verifiers;  // s >= 2
  std::uint32_t N = 8;                   // categories in the ACL
  std::uint32_t category = 1;            // k, the category the user asks for
  std::uint32_t threshold = 0;           // 0: additive, all s shares; else Shamir t-of-s
  bool wrong_key = false;                // user proves with the key of another category
  std::size_t item_size = 512;
  sim::LatencyModel latency;
  std::uint64_t seed = 1;       // transport and protocol randomness
  std::uint64_t key_seed = 1;   // ceremony and sharing randomness
  sim::CostModel costs;
  bool record_trace = false;
};

struct AccessReport {
  AccessVerdict verdict = AccessVerdict::indeterminate;  // coordinator's verdict as seen by the user
  bool done = false;
  bool verifiers_agree = true;
  SimTime keygen_time = 0;  // ceremony compute, off the network
  SimTime round_time = -1;  // request -> result at the user
  SimTime overhead = -1;    // keygen_time + round_time
  std::size_t result_size = 0;
  std::uint64_t messages = 0;
  std::map<std::string, std::uint64_t, std::less<>> counts;
  std::vector<sim::TraceEntry> trace;
};

AccessReport run_access(const AccessSetup& setup);

}  // namespace iob::fss
