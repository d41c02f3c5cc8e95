#pragma once

// End-to-end identity verification on the simulator. A user slices its
// proof across the CA nodes; every CA node rebroadcasts its slice,
// reconstructs from the first t slices it holds, and the CA nodes run PBFT
// on the verdict before recording a session token and sending it back.

#include <map>
#include <string>
#include <vector>

#include "iob/auth/wire.hpp"
#include "iob/auth/zkp.hpp"
#include "iob/consensus/pbft.hpp"
#include "iob/sim/cost_model.hpp"
#include "iob/sim/simulator.hpp"

namespace iob::auth {

struct AuthUser {
  sim::NodeInfo where;
  SimTime start = 0;
  bool forge = false;  // replace V with an unrelated element
};

struct AuthSetup {
  std::string backend = "prod";
  std::vector<sim::NodeInfo> ca;  // the verifying CA nodes
  std::vector<AuthUser> users;
  std::uint32_t threshold = 0;    // 0 means ceil(q/4)
  std::size_t entry_ca = 0;       // CA node that proposes verdicts
  sim::LatencyModel latency;
  std::uint64_t seed = 1;
  sim::CostModel costs;
  consensus::PbftConfig pbft{from_seconds(5)};
  SimTime token_validity = kDefaultTokenValidity;
  SimTime max_time = from_seconds(3600);
  bool record_trace = false;
};

struct AuthOutcome {
  bool done = false;
  Verdict verdict = Verdict::indeterminate;
  SimTime latency = -1;  // request -> f+1 matching tokens or rejections
  SessionToken token;
  GroupElement pu;
};

struct AuthReport {
  std::uint32_t q = 0;
  std::uint32_t t = 0;
  bool quiescent = false;
  std::vector<AuthOutcome> users;
  bool verdicts_agree = true;     // every CA node reached the same verdict per user
  bool consensus_safe = true;
  bool registries_agree = true;
  std::vector<CaRegistry> registries;
  std::uint64_t messages = 0;
  std::map<std::string, std::uint64_t, std::less<>> counts;
  std::vector<sim::TraceEntry> trace;
};

AuthReport run_auth(const AuthSetup& setup);

/// Payloads, exposed for tests that inspect traffic.
struct AuthRequestMsg final : sim::Payload {
  AuthRequestMsg(std::uint32_t u, wire::AuthRequest r, std::size_t sz) : user(u), req(std::move(r)), size(sz) {}
  std::uint32_t user;
  wire::AuthRequest req;
  std::size_t size;
  std::string_view kind() const override { return "AUTH_REQUEST"; }
  std::size_t wire_size() const override { return size; }
};

struct SliceMsg final : sim::Payload {
  SliceMsg(std::uint32_t u, wire::AuthRequest r, std::size_t sz) : user(u), req(std::move(r)), size(sz) {}
  std::uint32_t user;
  wire::AuthRequest req;
  std::size_t size;
  std::string_view kind() const override { return "AUTH_SLICE"; }
  std::size_t wire_size() const override { return size + 4; }
};

struct TokenMsg final : sim::Payload {
  explicit TokenMsg(wire::Token t) : token(t) {}
  wire::Token token;
  std::string_view kind() const override { return "TOKEN"; }
  std::size_t wire_size() const override { return 4 + 2 + 32 + 8; }
};

struct AuthResultMsg final : sim::Payload {
  explicit AuthResultMsg(bool a) : accept(a) {}
  bool accept;
  std::string_view kind() const override { return "AUTH_RESULT"; }
  std::size_t wire_size() const override { return 4 + 2 + 1; }
};

}  // namespace iob::auth
