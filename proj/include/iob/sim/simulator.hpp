#pragma once

// Single-threaded discrete-event simulator. Each node is a single server:
// deliveries queue in a FIFO inbox and are handed to the node's handler one
// at a time, each costing service_base / capability plus whatever compute
// the handler charges. Outgoing messages serialise on the sender's uplink.

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <limits>
#include <map>
#include <memory>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

#include "iob/util/rng.hpp"
#include "iob/util/time.hpp"

namespace iob::sim {

using NodeId = std::uint32_t;

struct Payload {
  virtual ~Payload() = default;
  /// Static string naming the message type (used in traces).
  virtual std::string_view kind() const = 0;
  virtual std::size_t wire_size() const = 0;
};
using PayloadPtr = std::shared_ptr<const Payload>;

struct NodeInfo {
  double lat = 0;
  double lon = 0;
  double capability = std::numeric_limits<double>::infinity();
};

struct LatencyModel {
  double base_s = 0.001;
  double prop_s_per_km = 5e-6;
  double service_base_s = 1e-4;  // per delivery: service_base_s / capability
  double jitter_s = 0.0005;      // uniform on [0, jitter_s]
  double bandwidth_Bps = 12.5e6; // 0 means unlimited

  /// One-way transit for a message that leaves the uplink at once:
  /// base + propagation + size/bandwidth, without jitter.
  SimTime transit(const NodeInfo& a, const NodeInfo& b, std::size_t size) const;
  SimTime service(const NodeInfo& n) const;
  SimTime transmission(std::size_t size) const;
};

enum class FaultClass { honest, crash, byzantine };

/// Outbound interception for Byzantine nodes: the returned payloads are sent
/// instead of the original (empty = drop).
using Substitution = std::function<std::vector<PayloadPtr>(NodeId from, NodeId to, const PayloadPtr&)>;

struct NodeFault {
  FaultClass cls = FaultClass::honest;
  SimTime crash_at = 0;
  std::string strategy;
  Substitution substitute;
};

struct FaultModel {
  std::map<NodeId, NodeFault> nodes;
  double link_drop_rate = 0;

  void crash(NodeId n, SimTime at = 0) { nodes[n] = {FaultClass::crash, at, "crash", {}}; }
  void byzantine(NodeId n, std::string strategy, Substitution s) {
    nodes[n] = {FaultClass::byzantine, 0, std::move(strategy), std::move(s)};
  }
  bool is_faulty(NodeId n) const { return nodes.count(n) && nodes.at(n).cls != FaultClass::honest; }
};

struct TraceEntry {
  SimTime fire_time = 0;
  SimTime sent_time = 0;
  NodeId src = 0;
  NodeId dst = 0;
  std::string_view msg_type;
  std::size_t size = 0;
};

class Simulator;

struct Delivery {
  NodeId src;
  NodeId dst;
  const PayloadPtr& payload;
  bool local;  // timer or injected event, not a network message
};

using Handler = std::function<void(Simulator&, const Delivery&)>;

struct RunResult {
  bool quiescent = true;  // false when max_time cut the run short
  SimTime end_time = 0;
  std::uint64_t events = 0;
};

class Simulator {
 public:
  Simulator(LatencyModel latency, std::uint64_t seed, FaultModel faults = {});

  NodeId add_node(NodeInfo info, Handler handler = {});
  void set_handler(NodeId id, Handler handler);
  std::size_t node_count() const { return nodes_.size(); }
  const NodeInfo& node(NodeId id) const;
  const LatencyModel& latency() const { return latency_; }
  FaultModel& faults() { return faults_; }
  Rng& rng() { return rng_; }

  SimTime now() const { return now_; }
  /// Effective local time inside a handler: now plus compute charged so far.
  SimTime local_now() const { return now_ + (in_handler_ ? compute_ : 0); }

  /// Schedules delivery at departure + transit + jitter. Throws
  /// std::out_of_range for unknown node ids.
  void send(NodeId from, NodeId to, PayloadPtr msg);
  void set_timer(NodeId node, SimTime delay, PayloadPtr tag);
  /// Local untraced event at absolute time `at`.
  void inject(NodeId node, SimTime at, PayloadPtr tag);
  /// Adds compute time to the handler currently running.
  void charge(SimTime compute);
  NodeId current_node() const { return current_; }

  bool is_crashed(NodeId id, SimTime at) const;

  RunResult run_until_quiescent(SimTime max_time = std::numeric_limits<SimTime>::max());

  void set_record_trace(bool on) { record_trace_ = on; }
  const std::vector<TraceEntry>& trace() const { return trace_; }
  std::uint64_t delivered() const { return delivered_; }
  std::uint64_t dropped() const { return dropped_; }
  std::uint64_t count(std::string_view kind) const;
  const std::map<std::string, std::uint64_t, std::less<>>& counts() const { return counts_; }

  void write_trace_csv(std::ostream& os) const;

 private:
  enum class EventKind : std::uint8_t { arrival, process, local };
  struct Event {
    SimTime time;
    std::uint64_t seq;
    EventKind kind;
    NodeId src;
    NodeId dst;
    SimTime sent;
    PayloadPtr payload;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };
  struct Queued {
    NodeId src;
    SimTime sent;
    PayloadPtr payload;
  };
  struct NodeState {
    NodeInfo info;
    Handler handler;
    std::deque<Queued> inbox;
    bool busy = false;
    SimTime free_at = 0;
    SimTime uplink_free = 0;
  };

  void push(Event e);
  void check(NodeId id) const;
  void dispatch(NodeId id, NodeId src, const PayloadPtr& p, bool local);
  void deliver_raw(NodeId from, NodeId to, const PayloadPtr& msg, SimTime departure);

  LatencyModel latency_;
  FaultModel faults_;
  Rng rng_;
  std::vector<NodeState> nodes_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t next_seq_ = 0;
  SimTime now_ = 0;
  bool in_handler_ = false;
  NodeId current_ = 0;
  SimTime compute_ = 0;
  bool record_trace_ = true;
  std::vector<TraceEntry> trace_;
  std::uint64_t delivered_ = 0;
  std::uint64_t dropped_ = 0;
  std::map<std::string, std::uint64_t, std::less<>> counts_;
};

/// Payload carrying nothing but a label; handy for timers and tests.
struct Signal final : Payload {
  explicit Signal(std::string_view k, std::size_t size = 0, std::uint64_t v = 0)
      : label(k), bytes(size), value(v) {}
  std::string_view kind() const override { return label; }
  std::size_t wire_size() const override { return bytes; }
  std::string_view label;
  std::size_t bytes;
  std::uint64_t value;
};

}  // namespace iob::sim
