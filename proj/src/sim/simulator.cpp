#include "iob/sim/simulator.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "iob/cluster/dbscan.hpp"

namespace iob::sim {

SimTime LatencyModel::transmission(std::size_t size) const {
  if (bandwidth_Bps <= 0 || size == 0) return 0;
  return from_seconds(static_cast<double>(size) / bandwidth_Bps);
}

SimTime LatencyModel::transit(const NodeInfo& a, const NodeInfo& b, std::size_t size) const {
  const double km = cluster::haversine_m(a.lat, a.lon, b.lat, b.lon) / 1000.0;
  return from_seconds(base_s + prop_s_per_km * km) + transmission(size);
}

SimTime LatencyModel::service(const NodeInfo& n) const {
  if (!std::isfinite(n.capability)) return 0;
  if (n.capability <= 0) throw std::invalid_argument("capability must be positive for service time");
  return from_seconds(service_base_s / n.capability);
}

Simulator::Simulator(LatencyModel latency, std::uint64_t seed, FaultModel faults)
    : latency_(latency), faults_(std::move(faults)), rng_(seed) {}

NodeId Simulator::add_node(NodeInfo info, Handler handler) {
  nodes_.push_back({info, std::move(handler), {}, false, 0, 0});
  return static_cast<NodeId>(nodes_.size() - 1);
}

void Simulator::set_handler(NodeId id, Handler handler) {
  check(id);
  nodes_[id].handler = std::move(handler);
}

const NodeInfo& Simulator::node(NodeId id) const {
  check(id);
  return nodes_[id].info;
}

void Simulator::check(NodeId id) const {
  if (id >= nodes_.size()) throw std::out_of_range("unknown node id " + std::to_string(id));
}

bool Simulator::is_crashed(NodeId id, SimTime at) const {
  auto it = faults_.nodes.find(id);
  return it != faults_.nodes.end() && it->second.cls == FaultClass::crash && at >= it->second.crash_at;
}

void Simulator::push(Event e) {
  e.seq = next_seq_++;
  queue_.push(std::move(e));
}

void Simulator::send(NodeId from, NodeId to, PayloadPtr msg) {
  check(from);
  check(to);
  const SimTime departure = (in_handler_ && current_ == from) ? now_ + compute_ : now_;
  if (is_crashed(from, departure)) return;
  auto it = faults_.nodes.find(from);
  if (it != faults_.nodes.end() && it->second.cls == FaultClass::byzantine && it->second.substitute) {
    for (const auto& p : it->second.substitute(from, to, msg)) deliver_raw(from, to, p, departure);
    return;
  }
  deliver_raw(from, to, msg, departure);
}

void Simulator::deliver_raw(NodeId from, NodeId to, const PayloadPtr& msg, SimTime departure) {
  auto& src = nodes_[from];
  const std::size_t size = msg->wire_size();
  const SimTime start = std::max(departure, src.uplink_free);
  src.uplink_free = start + latency_.transmission(size);
  SimTime jitter = 0;
  if (latency_.jitter_s > 0) jitter = from_seconds(uniform01(rng_) * latency_.jitter_s);
  if (faults_.link_drop_rate > 0 && uniform01(rng_) < faults_.link_drop_rate) {
    ++dropped_;
    return;
  }
  const SimTime arrival = start + latency_.transit(src.info, nodes_[to].info, size) + jitter;
  push({arrival, 0, EventKind::arrival, from, to, departure, msg});
}

void Simulator::set_timer(NodeId node, SimTime delay, PayloadPtr tag) {
  check(node);
  const SimTime base = (in_handler_ && current_ == node) ? now_ + compute_ : now_;
  push({base + delay, 0, EventKind::local, node, node, base, std::move(tag)});
}

void Simulator::inject(NodeId node, SimTime at, PayloadPtr tag) {
  check(node);
  push({at, 0, EventKind::local, node, node, now_, std::move(tag)});
}

void Simulator::charge(SimTime compute) {
  if (in_handler_) compute_ += compute;
}

void Simulator::dispatch(NodeId id, NodeId src, const PayloadPtr& p, bool local) {
  auto& n = nodes_[id];
  if (!n.handler) return;
  in_handler_ = true;
  current_ = id;
  compute_ = 0;
  n.handler(*this, Delivery{src, id, p, local});
  in_handler_ = false;
}

std::uint64_t Simulator::count(std::string_view kind) const {
  auto it = counts_.find(kind);
  return it == counts_.end() ? 0 : it->second;
}

RunResult Simulator::run_until_quiescent(SimTime max_time) {
  RunResult r;
  while (!queue_.empty()) {
    if (queue_.top().time > max_time) {
      r.quiescent = false;
      break;
    }
    Event e = queue_.top();
    queue_.pop();
    now_ = e.time;
    ++r.events;
    auto& n = nodes_[e.dst];
    switch (e.kind) {
      case EventKind::arrival: {
        if (is_crashed(e.dst, now_)) {
          ++dropped_;
          break;
        }
        n.inbox.push_back({e.src, e.sent, std::move(e.payload)});
        if (!n.busy) {
          n.busy = true;
          push({std::max(now_, n.free_at) + latency_.service(n.info), 0, EventKind::process, e.dst, e.dst, 0,
                nullptr});
        }
        break;
      }
      case EventKind::process: {
        Queued q = std::move(n.inbox.front());
        n.inbox.pop_front();
        const bool crashed = is_crashed(e.dst, now_);
        if (!crashed) {
          ++delivered_;
          auto kind = q.payload->kind();
          auto it = counts_.find(kind);
          if (it == counts_.end()) it = counts_.emplace(std::string(kind), 0).first;
          ++it->second;
          if (record_trace_) trace_.push_back({now_, q.sent, q.src, e.dst, kind, q.payload->wire_size()});
          dispatch(e.dst, q.src, q.payload, false);
        } else {
          ++dropped_;
        }
        auto& node = nodes_[e.dst];
        node.free_at = now_ + (crashed ? 0 : compute_);
        compute_ = 0;
        if (!node.inbox.empty()) {
          push({node.free_at + latency_.service(node.info), 0, EventKind::process, e.dst, e.dst, 0, nullptr});
        } else {
          node.busy = false;
        }
        break;
      }
      case EventKind::local: {
        if (is_crashed(e.dst, now_)) break;
        dispatch(e.dst, e.src, e.payload, true);
        auto& node = nodes_[e.dst];
        if (compute_ > 0) node.free_at = std::max(node.free_at, now_) + compute_;
        compute_ = 0;
        break;
      }
    }
  }
  r.end_time = now_;
  return r;
}

void Simulator::write_trace_csv(std::ostream& os) const {
  os << "fire_time,src,dst,msg_type,size\n";
  char buf[64];
  for (const auto& t : trace_) {
    std::snprintf(buf, sizeof buf, "%.9f", to_seconds(t.fire_time));
    os << buf << ',' << t.src << ',' << t.dst << ',' << t.msg_type << ',' << t.size << '\n';
  }
}

}  // namespace iob::sim
