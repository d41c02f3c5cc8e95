#pragma once

// Roster consistency check against the CA nodes' copies.

#include <functional>
#include <memory>
#include <optional>
#include <span>

#include "iob/consensus/messages.hpp"

namespace iob::consensus {

enum class SyncStatus { unchanged, synchronized, no_majority };
const char* to_string(SyncStatus s);

struct ConsistencyResult {
  SyncStatus status = SyncStatus::unchanged;
  ClusterRoster roster;   // the roster the node holds afterwards
  SimTime retry_after = 0;  // set for no_majority
};

/// Adopts the roster held by a strict majority of CA nodes. Without a
/// majority the local roster is kept and a retry is due after `backoff`.
ConsistencyResult consistency_check(const ClusterRoster& local, std::span<const ClusterRoster> ca_rosters,
                                    SimTime backoff);

struct RosterQuery final : sim::Payload {
  std::string_view kind() const override { return "ROSTER_QUERY"; }
  std::size_t wire_size() const override { return 8; }
};

struct RosterReply final : sim::Payload {
  explicit RosterReply(ClusterRoster r) : roster(std::move(r)) {}
  ClusterRoster roster;
  std::string_view kind() const override { return "ROSTER_REPLY"; }
  std::size_t wire_size() const override { return 16 + roster.size() * 64; }
};

/// Node-side driver: queries every CA node, waits for all replies or the
/// reply timeout, then runs consistency_check. A failed check retries with
/// doubling backoff, up to max_attempts.
class RosterSync {
 public:
  struct Config {
    SimTime reply_timeout = from_seconds(0.2);
    SimTime backoff = from_seconds(0.5);
    int max_attempts = 4;
  };
  using DoneHook = std::function<void(sim::Simulator&, const ConsistencyResult&)>;

  RosterSync(NodeId self, ClusterRoster local, std::vector<NodeId> ca_nodes, Config cfg);
  RosterSync(NodeId self, ClusterRoster local, std::vector<NodeId> ca_nodes)
      : RosterSync(self, std::move(local), std::move(ca_nodes), Config{}) {}

  void on_done(DoneHook h) { done_ = std::move(h); }
  void start(sim::Simulator& sim);
  bool handle(sim::Simulator& sim, const sim::Delivery& d);

  const ClusterRoster& roster() const { return local_; }
  int attempts() const { return attempts_; }
  std::optional<SyncStatus> last_status() const { return last_; }

  /// CA-side responder: answers ROSTER_QUERY with `roster`.
  static bool serve(sim::Simulator& sim, const sim::Delivery& d, NodeId self, const ClusterRoster& roster);

 private:
  void finish(sim::Simulator& sim);

  NodeId self_;
  ClusterRoster local_;
  std::vector<NodeId> ca_;
  Config cfg_;
  DoneHook done_;
  int attempts_ = 0;
  std::uint64_t round_ = 0;
  bool open_ = false;
  std::map<NodeId, ClusterRoster> replies_;
  std::optional<SyncStatus> last_;
};

}  // namespace iob::consensus
