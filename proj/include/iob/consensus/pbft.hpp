#pragma once

// Three-phase PBFT replica and client running on the simulator, with view
// change (VIEW_CHANGE / NEW_VIEW) and a small catch-up path for replicas that
// fell behind.

#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "iob/cluster/dbscan.hpp"
#include "iob/consensus/messages.hpp"

namespace iob::consensus {

/// Messages in one fault-free round: (n-1) PRE_PREPARE + n(n-1) PREPARE +
/// n(n-1) COMMIT + n REPLY.
std::uint64_t message_count(std::uint64_t n);

/// Uniform choice among the k members nearest (haversine) to the user.
/// Returns an index into `members`; throws std::invalid_argument when empty.
std::size_t select_leader(double lat, double lon, std::span<const cluster::NodeRecord> members, Rng& rng,
                          std::size_t k = 3);

struct ChainEntry {
  std::uint64_t seq = 0;
  Digest digest{};
  std::uint64_t view = 0;
  SimTime commit_time = 0;
  friend bool operator==(const ChainEntry&, const ChainEntry&) = default;
};

/// seq,digest,view,commit_time
void write_chain_csv(std::ostream& os, std::span<const ChainEntry> chain);

enum class Validity { valid, invalid, pending };

struct PbftConfig {
  SimTime view_timeout = from_seconds(0.5);
  SimTime sign_cost = 0;    // charged per signature produced
  SimTime verify_cost = 0;  // charged per signature checked
  std::size_t leader_offset = 0;  // primary(v) = roster[(leader_offset + v) mod n]
  int max_vc_attempts = 6;        // consecutive fruitless view-change timeouts before going idle
};

struct DigestHash {
  std::size_t operator()(const Digest& d) const noexcept {
    std::size_t h = 0;
    for (int i = 0; i < 8; ++i) h = (h << 8) | d[static_cast<std::size_t>(i)];
    return h;
  }
};

/// NEW_VIEW plan derived from a set of VIEW_CHANGE proofs: every sequence
/// number from 1 up to the highest one mentioned gets the proposal prepared
/// in the highest view (or the null request), then pending requests not yet
/// placed follow in digest order. Blocks failing validation are ignored.
std::vector<PlanEntry> compute_plan(std::span<const std::shared_ptr<const ViewChange>> proofs,
                                    const ClusterRoster& roster, const KeyRegistry& keys);

/// True when `e` carries 2f+1 valid PREPARE signatures from distinct
/// roster members and its block matches the digest.
bool valid_prepared_entry(const PreparedEntry& e, const ClusterRoster& roster, const KeyRegistry& keys);

struct CatchupEntry {
  std::uint64_t seq = 0;
  std::uint64_t view = 0;
  Digest digest{};
  std::shared_ptr<const BlockProposal> block;
};

struct CatchupPayload final : sim::Payload {
  NodeId sender = 0;
  std::vector<CatchupEntry> entries;
  std::string_view kind() const override { return "CATCHUP"; }
  std::size_t wire_size() const override;
};

class PbftReplica {
 public:
  using Validator = std::function<Validity(const BlockProposal&)>;
  using CommitHook = std::function<void(sim::Simulator&, const ChainEntry&, const BlockProposal&)>;

  PbftReplica(NodeId self, std::shared_ptr<const ClusterRoster> roster, std::shared_ptr<const KeyRegistry> keys,
              PbftConfig cfg = {});

  void set_validator(Validator v) { validator_ = std::move(v); }
  void on_commit(CommitHook h) { commit_hook_ = std::move(h); }

  /// Consumes PBFT traffic and this replica's timers; false for anything else.
  bool handle(sim::Simulator& sim, const sim::Delivery& d);
  /// Treats `b` as a request that arrived at this node.
  void submit(sim::Simulator& sim, std::shared_ptr<const BlockProposal> b);
  /// Re-runs the validator over proposals it previously reported pending.
  void recheck(sim::Simulator& sim);

  NodeId id() const { return self_; }
  std::uint64_t view() const { return view_; }
  bool in_view_change() const { return in_vc_; }
  NodeId primary(std::uint64_t view) const;
  bool is_primary() const { return primary(view_) == self_; }
  std::uint64_t last_executed() const { return last_exec_; }
  const std::vector<ChainEntry>& chain() const { return chain_; }
  const ClusterRoster& roster() const { return *roster_; }
  const std::set<NodeId>& flagged() const { return flagged_; }
  /// True if this replica ever saw two different decisions for one sequence
  /// number. Never expected; exposed for the safety sweeps.
  bool conflict() const { return conflict_; }

  struct Decided {
    Digest digest{};
    std::uint64_t view = 0;
    std::shared_ptr<const BlockProposal> block;
  };
  const std::map<std::uint64_t, Decided>& decided() const { return decided_; }

 private:
  struct Votes {
    std::vector<std::uint8_t> seen;
    std::size_t count = 0;
    std::vector<VoteSig> sigs;  // kept for prepares, up to a quorum
  };
  struct Slot {
    bool has_pp = false;
    Digest pp_digest{};
    std::shared_ptr<const BlockProposal> block;
    std::map<Digest, Votes> prepares;
    std::map<Digest, Votes> commits;
    bool prepared = false;
    bool fetch_sent = false;
  };
  struct Waiting {
    std::uint64_t view;
    std::uint64_t seq;
    std::shared_ptr<const BlockProposal> block;
  };
  struct Buffered {
    NodeId src;
    sim::PayloadPtr payload;
  };

  std::size_t add_vote(std::map<Digest, Votes>& m, const PbftMessage& msg, bool keep_sig);
  bool check_sig(sim::Simulator& sim, NodeId src, const PbftMessage& m);
  void broadcast(sim::Simulator& sim, const sim::PayloadPtr& p);
  void send_vote(sim::Simulator& sim, Phase phase, std::uint64_t view, std::uint64_t seq, const Digest& d);
  void handle_payload(sim::Simulator& sim, NodeId src, const sim::PayloadPtr& p);

  void on_request(sim::Simulator& sim, NodeId src, const std::shared_ptr<const BlockProposal>& b);
  void on_pre_prepare(sim::Simulator& sim, NodeId src, const PbftPayload& p);
  void on_prepare(sim::Simulator& sim, NodeId src, const PbftMessage& m);
  void on_commit(sim::Simulator& sim, NodeId src, const PbftMessage& m);
  void on_view_change(sim::Simulator& sim, NodeId src, const std::shared_ptr<const ViewChange>& vc);
  void on_new_view(sim::Simulator& sim, NodeId src, const std::shared_ptr<const NewView>& nv);
  void on_fetch(sim::Simulator& sim, NodeId src, const FetchPayload& f);
  void on_block(sim::Simulator& sim, const std::shared_ptr<const BlockProposal>& b);
  void on_catchup(sim::Simulator& sim, NodeId src, const CatchupPayload& c);
  void on_timer(sim::Simulator& sim, std::uint64_t gen);

  void propose(sim::Simulator& sim, const std::shared_ptr<const BlockProposal>& b);
  void accept_pre_prepare(sim::Simulator& sim, std::uint64_t view, std::uint64_t seq, const Digest& d,
                          const std::shared_ptr<const BlockProposal>& b);
  void check_prepared(sim::Simulator& sim, std::uint64_t view, std::uint64_t seq);
  void check_committed(sim::Simulator& sim, std::uint64_t view, std::uint64_t seq);
  void decide(sim::Simulator& sim, std::uint64_t seq, const Digest& d, std::uint64_t view,
              std::shared_ptr<const BlockProposal> b);
  void execute(sim::Simulator& sim);
  void start_view_change(sim::Simulator& sim, std::uint64_t target);
  void maybe_join(sim::Simulator& sim);
  void maybe_new_view(sim::Simulator& sim, std::uint64_t view);
  void enter_view(sim::Simulator& sim, std::uint64_t view, const std::vector<PlanEntry>& plan);
  void replay_future(sim::Simulator& sim);
  void restart_timer(sim::Simulator& sim);
  void stop_timer() { ++timer_gen_; timer_running_ = false; }
  std::shared_ptr<const BlockProposal> lookup(const Digest& d) const;
  void remember(const std::shared_ptr<const BlockProposal>& b);

  NodeId self_;
  std::shared_ptr<const ClusterRoster> roster_;
  std::shared_ptr<const KeyRegistry> keys_;
  PbftConfig cfg_;
  Validator validator_;
  CommitHook commit_hook_;

  std::uint64_t view_ = 0;
  bool in_vc_ = false;
  std::uint64_t vc_target_ = 0;
  int vc_attempts_ = 0;
  int consecutive_vc_ = 0;

  std::map<std::pair<std::uint64_t, std::uint64_t>, Slot> slots_;
  std::map<std::uint64_t, Decided> decided_;
  std::map<std::uint64_t, PreparedEntry> prepared_certs_;
  std::uint64_t last_exec_ = 0;
  std::vector<ChainEntry> chain_;

  std::unordered_map<Digest, std::shared_ptr<const BlockProposal>, DigestHash> known_;
  std::map<Digest, std::shared_ptr<const BlockProposal>> pending_;
  std::unordered_map<Digest, std::size_t, DigestHash> executed_;  // -> chain index

  std::uint64_t next_seq_ = 1;
  std::unordered_set<Digest, DigestHash> assigned_;
  std::vector<std::shared_ptr<const BlockProposal>> primary_waiting_;
  std::vector<Waiting> waiting_;
  std::vector<Buffered> future_;

  std::map<std::uint64_t, std::map<NodeId, std::shared_ptr<const ViewChange>>> vcs_;
  std::set<std::uint64_t> nv_sent_;
  std::map<NodeId, std::uint64_t> catchup_sent_;
  std::map<std::uint64_t, std::map<Digest, std::set<NodeId>>> claims_;
  std::unordered_map<Digest, std::shared_ptr<const BlockProposal>, DigestHash> claim_blocks_;

  std::uint64_t timer_gen_ = 0;
  bool timer_running_ = false;
  std::set<NodeId> flagged_;
  bool conflict_ = false;
};

struct ClientConfig {
  SimTime retry_timeout = from_seconds(1.0);
  std::size_t leader_offset = 0;
  int max_retries = 8;
};

/// Submits blocks to the cluster and waits for f+1 matching REPLYs. On
/// timeout the request is re-sent to every replica.
class PbftClient {
 public:
  using DoneHook = std::function<void(sim::Simulator&, const BlockProposal&, SimTime)>;

  PbftClient(NodeId self, std::shared_ptr<const ClusterRoster> roster, std::shared_ptr<const KeyRegistry> keys,
             ClientConfig cfg = {});

  void on_done(DoneHook h) { done_hook_ = std::move(h); }
  void submit(sim::Simulator& sim, std::shared_ptr<const BlockProposal> b);
  bool handle(sim::Simulator& sim, const sim::Delivery& d);

  bool done(const Digest& d) const;
  std::optional<SimTime> completion(const Digest& d) const;
  std::size_t outstanding() const;

 private:
  struct Request {
    std::shared_ptr<const BlockProposal> block;
    std::map<NodeId, Digest> replies;
    std::optional<SimTime> done_at;
    int retries = 0;
  };
  NodeId self_;
  std::shared_ptr<const ClusterRoster> roster_;
  std::shared_ptr<const KeyRegistry> keys_;
  ClientConfig cfg_;
  std::uint64_t view_guess_ = 0;
  std::map<Digest, Request> requests_;
  DoneHook done_hook_;
};

}  // namespace iob::consensus
