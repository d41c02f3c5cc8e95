#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "iob/cluster/dbscan.hpp"
#include "iob/crypto/hash.hpp"
#include "iob/sim/simulator.hpp"
#include "iob/util/bytes.hpp"
#include "iob/util/time.hpp"

namespace iob::consensus {

using crypto::Digest;
using sim::NodeId;

/// Per-principal secrets for the simulator's HMAC signatures. The public
/// key of a principal is the SHA-256 fingerprint of its secret.
class KeyRegistry {
 public:
  void generate(NodeId id, Rng& rng);
  void set_secret(NodeId id, Bytes secret);
  bool has(NodeId id) const { return secrets_.count(id) != 0; }
  Digest public_key(NodeId id) const;
  Digest sign(NodeId signer, std::span<const std::uint8_t> msg) const;
  bool verify(NodeId signer, std::span<const std::uint8_t> msg, const Digest& sig) const;

 private:
  std::unordered_map<NodeId, Bytes> secrets_;
};

/// Behaviour-data block submitted by a client.
struct BlockProposal {
  Bytes payload;
  NodeId client = 0;
  Digest client_pubkey{};
  SimTime timestamp = 0;
  Digest client_signature{};
  Digest digest{};  // H(payload || timestamp || client_pubkey)

  static BlockProposal make(const KeyRegistry& keys, NodeId client, Bytes payload, SimTime timestamp);
  static Digest compute_digest(std::span<const std::uint8_t> payload, SimTime timestamp,
                               const Digest& client_pubkey);
  bool valid(const KeyRegistry& keys) const;

  Bytes encode() const;
  static BlockProposal decode(std::span<const std::uint8_t> frame);
  friend bool operator==(const BlockProposal&, const BlockProposal&) = default;
};

/// Digest standing for the null request used to fill sequence gaps after a
/// view change.
const Digest& null_digest();

enum class Phase : std::uint8_t { pre_prepare = 1, prepare = 2, commit = 3, reply = 4 };
const char* to_string(Phase p);

struct PbftMessage {
  Phase phase = Phase::prepare;
  std::uint64_t view = 0;
  std::uint64_t seq = 0;
  Digest digest{};
  NodeId sender = 0;
  Digest signature{};

  Bytes signing_bytes() const;
  void sign(const KeyRegistry& keys);
  bool verify(const KeyRegistry& keys) const;
  /// u32 length | phase u8 | view u64 | seq u64 | digest 32B | sender u32 | u16 siglen | sig
  Bytes encode() const;
  static PbftMessage decode(std::span<const std::uint8_t> frame);
  friend bool operator==(const PbftMessage&, const PbftMessage&) = default;
};

enum class NodeStatus : std::uint8_t { active = 0, suspect = 1, offline = 2 };

struct RosterEntry {
  NodeId id = 0;
  Digest public_key{};
  std::string address;
  NodeStatus status = NodeStatus::active;
  cluster::Role role = cluster::Role::secondary;
  friend bool operator==(const RosterEntry&, const RosterEntry&) = default;
};

/// Membership of one cluster as every node stores it.
class ClusterRoster {
 public:
  ClusterRoster() = default;
  ClusterRoster(int cluster_id, std::vector<RosterEntry> members, std::uint64_t version = 1);

  int cluster_id() const { return cluster_id_; }
  std::uint64_t version() const { return version_; }
  std::size_t size() const { return members_.size(); }
  std::size_t f() const { return members_.empty() ? 0 : (members_.size() - 1) / 3; }
  std::size_t quorum() const { return 2 * f() + 1; }
  const std::vector<RosterEntry>& members() const { return members_; }
  const RosterEntry& at(std::size_t i) const { return members_.at(i); }
  std::optional<std::size_t> index_of(NodeId id) const;
  bool contains(NodeId id) const { return index_of(id).has_value(); }
  Digest digest() const;

  void set_status(NodeId id, NodeStatus s);
  void bump_version() { ++version_; }
  friend bool operator==(const ClusterRoster& a, const ClusterRoster& b) {
    return a.cluster_id_ == b.cluster_id_ && a.version_ == b.version_ && a.members_ == b.members_;
  }

 private:
  int cluster_id_ = 0;
  std::vector<RosterEntry> members_;
  std::uint64_t version_ = 1;
  std::unordered_map<NodeId, std::size_t> index_;
};

/// Builds a roster over simulator node ids with keys taken from the registry
/// and synthetic 10.x.y.z addresses.
ClusterRoster make_roster(int cluster_id, std::span<const NodeId> ids, const KeyRegistry& keys,
                          std::span<const cluster::Role> roles = {});

// ----------------------------------------------------------- sim payloads

struct PbftPayload final : sim::Payload {
  PbftMessage msg;
  std::shared_ptr<const BlockProposal> block;  // PRE_PREPARE only
  std::string_view kind() const override;
  std::size_t wire_size() const override;
};

struct RequestPayload final : sim::Payload {
  explicit RequestPayload(std::shared_ptr<const BlockProposal> b) : block(std::move(b)) {}
  std::shared_ptr<const BlockProposal> block;
  std::string_view kind() const override { return "REQUEST"; }
  std::size_t wire_size() const override;
};

struct VoteSig {
  NodeId sender = 0;
  Digest signature{};
};

/// A proposal this replica saw prepared, with the 2f+1 PREPARE signatures
/// that prove it.
struct PreparedEntry {
  std::uint64_t seq = 0;
  std::uint64_t view = 0;
  Digest digest{};
  std::shared_ptr<const BlockProposal> block;  // null for the null request
  std::vector<VoteSig> cert;
};

struct ViewChange {
  std::uint64_t new_view = 0;
  NodeId sender = 0;
  std::uint64_t last_executed = 0;
  std::vector<PreparedEntry> prepared;
  std::vector<std::shared_ptr<const BlockProposal>> pending;
  Digest signature{};

  Bytes signing_bytes() const;
  std::size_t wire_size() const;
};

struct PlanEntry {
  std::uint64_t seq = 0;
  Digest digest{};
  std::shared_ptr<const BlockProposal> block;  // null for the null request
};

struct NewView {
  std::uint64_t view = 0;
  NodeId sender = 0;
  std::vector<std::shared_ptr<const ViewChange>> proofs;  // 2f+1 signed VIEW_CHANGEs
  std::vector<PlanEntry> plan;
  Digest signature{};

  Bytes signing_bytes() const;
  std::size_t wire_size() const;
};

struct ViewChangePayload final : sim::Payload {
  std::shared_ptr<const ViewChange> vc;
  std::string_view kind() const override { return "VIEW_CHANGE"; }
  std::size_t wire_size() const override { return vc->wire_size(); }
};

struct NewViewPayload final : sim::Payload {
  std::shared_ptr<const NewView> nv;
  std::string_view kind() const override { return "NEW_VIEW"; }
  std::size_t wire_size() const override { return nv->wire_size(); }
};

struct FetchPayload final : sim::Payload {
  std::uint64_t seq = 0;
  Digest digest{};
  std::string_view kind() const override { return "FETCH"; }
  std::size_t wire_size() const override { return 4 + 8 + 32; }
};

struct BlockPayload final : sim::Payload {
  explicit BlockPayload(std::shared_ptr<const BlockProposal> b) : block(std::move(b)) {}
  std::shared_ptr<const BlockProposal> block;
  std::string_view kind() const override { return "BLOCK"; }
  std::size_t wire_size() const override;
};

}  // namespace iob::consensus
