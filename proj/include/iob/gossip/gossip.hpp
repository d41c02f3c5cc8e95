#pragma once

// Inter-cluster block dissemination among cluster leaders. Relays are drawn
// with probability proportional to a score that favours near and responsive
// leaders.

#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "iob/crypto/hash.hpp"
#include "iob/sim/simulator.hpp"

namespace iob::gossip {

using sim::NodeId;

struct LeaderInfo {
  NodeId node = 0;  // simulator node id
  int cluster_id = 0;
  double lat = 0;
  double lon = 0;
  double capability = 1;
};

/// One leader per cluster; throws std::invalid_argument on duplicate cluster ids.
class LeaderDirectory {
 public:
  LeaderDirectory() = default;
  explicit LeaderDirectory(std::vector<LeaderInfo> leaders);
  std::size_t size() const { return leaders_.size(); }
  const LeaderInfo& at(std::size_t i) const { return leaders_.at(i); }
  const std::vector<LeaderInfo>& leaders() const { return leaders_; }
  std::optional<std::size_t> index_of_node(NodeId n) const;
  double distance_m(std::size_t a, std::size_t b) const;
  /// Leaders other than `from` within eps3 metres, ascending by index.
  std::vector<std::size_t> within(std::size_t from, double eps3_m) const;
  /// Nearest leader to `from` not in `exclude` (ties to lower index).
  std::optional<std::size_t> nearest(std::size_t from, const std::set<std::size_t>& exclude) const;

 private:
  std::vector<LeaderInfo> leaders_;
};

enum class WeightForm { mean, product, harmonic };
WeightForm parse_weight_form(std::string_view s);
const char* to_string(WeightForm f);

inline constexpr double kMinDistanceM = 1.0;

/// Normalised relay weights from distances (metres) and ping deltas
/// (seconds). mean: s = (l̄/l + λ̄/λ)/2; product: s = (l̄/l)(λ̄/λ);
/// harmonic: s = 2 / (l/l̄ + λ/λ̄). Distances are clamped to at least 1 m.
std::vector<double> compute_weights(std::span<const double> distance_m, std::span<const double> ping_s,
                                    WeightForm form = WeightForm::mean);

struct RelayWeights {
  std::vector<std::size_t> candidates;  // directory indices
  std::vector<double> distance_m;
  std::vector<double> ping_s;
  std::vector<double> weight;
};

/// Weighted sampling without replacement of min(fanout, k) positions into
/// `weights`. Throws std::invalid_argument when fanout is 0.
std::vector<std::size_t> select_relays(std::span<const double> weights, std::size_t fanout, Rng& rng);

struct GossipParams {
  double eps3_m = 10000;
  std::size_t fanout = 3;
  std::uint32_t ttl = 10;  // max hops and max probe rounds per leader
  WeightForm form = WeightForm::mean;
  SimTime probe_timeout = from_seconds(0.05);
  std::size_t payload_size = 512;
};

struct ProbeResult {
  RelayWeights weights;
  std::vector<std::size_t> informed;     // answered with has_block set
  std::vector<std::size_t> unreachable;  // no answer before the timeout
};

struct PingMsg final : sim::Payload {
  PingMsg(std::uint64_t r, crypto::Digest d) : round(r), digest(d) {}
  std::uint64_t round;
  crypto::Digest digest;
  std::string_view kind() const override { return "GOSSIP_PING"; }
  std::size_t wire_size() const override { return 4 + 8 + 32; }
};

struct AckMsg final : sim::Payload {
  AckMsg(std::uint64_t r, bool has) : round(r), has_block(has) {}
  std::uint64_t round;
  bool has_block;
  std::string_view kind() const override { return "GOSSIP_ACK"; }
  std::size_t wire_size() const override { return 4 + 8 + 1; }
};

struct GossipMsg final : sim::Payload {
  crypto::Digest digest{};
  std::size_t payload_size = 0;
  std::size_t origin = 0;        // directory index
  std::uint32_t hops = 0;
  std::vector<bool> seen;        // summary: leaders the sender knows to be informed
  std::string_view kind() const override { return "GOSSIP"; }
  std::size_t wire_size() const override { return 4 + 32 + 4 + 4 + 2 + (seen.size() + 7) / 8 + payload_size; }
};

/// Leader-side state machine for one block.
class GossipLeader {
 public:
  using ReceiveHook = std::function<void(sim::Simulator&, std::size_t leader, SimTime at, std::uint32_t hops)>;

  GossipLeader(std::size_t index, std::shared_ptr<const LeaderDirectory> dir, GossipParams params,
               std::uint64_t seed);

  void on_receive(ReceiveHook h) { hook_ = std::move(h); }
  /// Called at the origin once intra-cluster consensus on the block is done.
  void originate(sim::Simulator& sim, const crypto::Digest& digest);
  bool handle(sim::Simulator& sim, const sim::Delivery& d);

  bool informed() const { return informed_; }
  SimTime receipt_time() const { return receipt_; }
  std::uint32_t hops() const { return hops_; }
  const std::vector<ProbeResult>& probes() const { return probes_; }

 private:
  void accept(sim::Simulator& sim, const crypto::Digest& d, std::uint32_t hops, std::size_t origin,
              const std::vector<bool>& seen);
  void start_round(sim::Simulator& sim);
  void finish_round(sim::Simulator& sim);

  std::size_t self_;
  std::shared_ptr<const LeaderDirectory> dir_;
  GossipParams params_;
  Rng rng_;
  ReceiveHook hook_;

  bool informed_ = false;
  crypto::Digest digest_{};
  std::size_t origin_ = 0;
  SimTime receipt_ = -1;
  std::uint32_t hops_ = 0;
  std::set<std::size_t> known_;        // leaders known to hold the block
  std::set<std::size_t> unreachable_;
  std::uint32_t rounds_ = 0;

  std::uint64_t round_id_ = 0;
  bool probing_ = false;
  std::vector<std::size_t> asked_;
  std::map<std::size_t, std::pair<SimTime, bool>> answers_;  // index -> (rtt, has_block)
  SimTime probe_sent_ = 0;
  std::vector<ProbeResult> probes_;
};

struct PropagationReport {
  std::size_t origin = 0;
  std::vector<bool> informed;
  std::vector<SimTime> receipt_time;  // -1 when uninformed
  std::vector<std::int64_t> hops;     // -1 when uninformed
  std::vector<std::size_t> uninformed;  // excluding crashed leaders
  std::uint64_t messages = 0;
  std::uint32_t max_hops = 0;
  SimTime completion = 0;  // last receipt
  /// Fraction of non-crashed leaders that received the block.
  double coverage = 0;
  bool complete() const { return uninformed.empty(); }
};

/// Runs one dissemination from `origin` on a fresh simulator whose nodes are
/// the leaders (node ids are reassigned to directory indices). `crashed`
/// holds directory indices that are down from t=0.
PropagationReport disseminate(const LeaderDirectory& dir, std::size_t origin, const GossipParams& params,
                              const sim::LatencyModel& latency, std::uint64_t seed,
                              const std::set<std::size_t>& crashed = {});

/// leader_id,cluster_id,receipt_time,hops
void write_report_csv(std::ostream& os, const LeaderDirectory& dir, const PropagationReport& r);

}  // namespace iob::gossip
