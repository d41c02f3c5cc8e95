#include "iob/gossip/gossip.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "iob/cluster/dbscan.hpp"

namespace iob::gossip {

LeaderDirectory::LeaderDirectory(std::vector<LeaderInfo> leaders) : leaders_(std::move(leaders)) {
  std::set<int> clusters;
  std::set<NodeId> nodes;
  for (const auto& l : leaders_) {
    if (!clusters.insert(l.cluster_id).second) throw std::invalid_argument("two leaders for one cluster");
    if (!nodes.insert(l.node).second) throw std::invalid_argument("leader node listed twice");
  }
}

std::optional<std::size_t> LeaderDirectory::index_of_node(NodeId n) const {
  for (std::size_t i = 0; i < leaders_.size(); ++i)
    if (leaders_[i].node == n) return i;
  return std::nullopt;
}

double LeaderDirectory::distance_m(std::size_t a, std::size_t b) const {
  const auto& x = leaders_.at(a);
  const auto& y = leaders_.at(b);
  return cluster::haversine_m(x.lat, x.lon, y.lat, y.lon);
}

std::vector<std::size_t> LeaderDirectory::within(std::size_t from, double eps3_m) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < leaders_.size(); ++i)
    if (i != from && distance_m(from, i) <= eps3_m) out.push_back(i);
  return out;
}

std::optional<std::size_t> LeaderDirectory::nearest(std::size_t from, const std::set<std::size_t>& exclude) const {
  std::optional<std::size_t> best;
  double bd = 0;
  for (std::size_t i = 0; i < leaders_.size(); ++i) {
    if (i == from || exclude.count(i)) continue;
    const double d = distance_m(from, i);
    if (!best || d < bd) {
      best = i;
      bd = d;
    }
  }
  return best;
}

WeightForm parse_weight_form(std::string_view s) {
  if (s == "mean") return WeightForm::mean;
  if (s == "product") return WeightForm::product;
  if (s == "harmonic") return WeightForm::harmonic;
  throw std::invalid_argument("unknown weight form: " + std::string(s));
}

const char* to_string(WeightForm f) {
  switch (f) {
    case WeightForm::mean: return "mean";
    case WeightForm::product: return "product";
    case WeightForm::harmonic: return "harmonic";
  }
  return "?";
}

std::vector<double> compute_weights(std::span<const double> distance_m, std::span<const double> ping_s,
                                    WeightForm form) {
  if (distance_m.size() != ping_s.size()) throw std::invalid_argument("distance/ping size mismatch");
  const std::size_t k = distance_m.size();
  if (k == 0) return {};
  std::vector<double> l(k), lam(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (!(ping_s[i] > 0)) throw std::invalid_argument("ping delta must be positive");
    l[i] = std::max(distance_m[i], kMinDistanceM);
    lam[i] = ping_s[i];
  }
  const double lbar = std::accumulate(l.begin(), l.end(), 0.0) / static_cast<double>(k);
  const double mbar = std::accumulate(lam.begin(), lam.end(), 0.0) / static_cast<double>(k);
  std::vector<double> s(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double a = lbar / l[i], b = mbar / lam[i];
    switch (form) {
      case WeightForm::mean: s[i] = (a + b) / 2; break;
      case WeightForm::product: s[i] = a * b; break;
      case WeightForm::harmonic: s[i] = 2 / (1 / a + 1 / b); break;
    }
  }
  const double total = std::accumulate(s.begin(), s.end(), 0.0);
  for (auto& x : s) x /= total;
  return s;
}

std::vector<std::size_t> select_relays(std::span<const double> weights, std::size_t fanout, Rng& rng) {
  if (fanout == 0) throw std::invalid_argument("fanout must be at least 1");
  std::vector<std::size_t> pool(weights.size());
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<std::size_t> out;
  while (out.size() < fanout && !pool.empty()) {
    double total = 0;
    for (auto i : pool) total += weights[i];
    std::size_t pick = pool.size() - 1;
    if (total > 0) {
      double u = uniform01(rng) * total;
      for (std::size_t j = 0; j < pool.size(); ++j) {
        u -= weights[pool[j]];
        if (u < 0) {
          pick = j;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(pool.size()));
    }
    out.push_back(pool[pick]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

// ------------------------------------------------------------- leader

namespace {
struct ProbeTimer final : sim::Payload {
  ProbeTimer(const void* o, std::uint64_t r) : owner(o), round(r) {}
  std::string_view kind() const override { return "GOSSIP_TIMER"; }
  std::size_t wire_size() const override { return 0; }
  const void* owner;
  std::uint64_t round;
};
}  // namespace

GossipLeader::GossipLeader(std::size_t index, std::shared_ptr<const LeaderDirectory> dir, GossipParams params,
                           std::uint64_t seed)
    : self_(index), dir_(std::move(dir)), params_(params), rng_(seed) {
  if (params_.fanout == 0) throw std::invalid_argument("fanout must be at least 1");
  if (self_ >= dir_->size()) throw std::out_of_range("leader index beyond directory");
}

void GossipLeader::originate(sim::Simulator& sim, const crypto::Digest& digest) {
  accept(sim, digest, 0, self_, std::vector<bool>(dir_->size(), false));
}

void GossipLeader::accept(sim::Simulator& sim, const crypto::Digest& d, std::uint32_t hops, std::size_t origin,
                          const std::vector<bool>& seen) {
  informed_ = true;
  digest_ = d;
  hops_ = hops;
  origin_ = origin;
  receipt_ = sim.local_now();
  known_.insert(self_);
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (seen[i]) known_.insert(i);
  if (hook_) hook_(sim, self_, receipt_, hops_);
  if (hops_ < params_.ttl) start_round(sim);
}

void GossipLeader::start_round(sim::Simulator& sim) {
  if (rounds_ >= params_.ttl) return;
  std::set<std::size_t> skip = known_;
  skip.insert(unreachable_.begin(), unreachable_.end());
  std::vector<std::size_t> cand;
  for (auto i : dir_->within(self_, params_.eps3_m))
    if (!skip.count(i)) cand.push_back(i);
  if (cand.empty()) {
    if (auto n = dir_->nearest(self_, skip)) cand.push_back(*n);
  }
  if (cand.empty()) return;
  ++rounds_;
  ++round_id_;
  probing_ = true;
  asked_ = cand;
  answers_.clear();
  probe_sent_ = sim.local_now();
  auto ping = std::make_shared<PingMsg>(round_id_, digest_);
  for (auto i : cand) sim.send(dir_->at(self_).node, dir_->at(i).node, ping);
  sim.set_timer(dir_->at(self_).node, params_.probe_timeout, std::make_shared<ProbeTimer>(this, round_id_));
}

void GossipLeader::finish_round(sim::Simulator& sim) {
  probing_ = false;
  ProbeResult pr;
  for (auto i : asked_) {
    auto it = answers_.find(i);
    if (it == answers_.end()) {
      pr.unreachable.push_back(i);
      unreachable_.insert(i);
    } else if (it->second.second) {
      pr.informed.push_back(i);
      known_.insert(i);
    } else {
      pr.weights.candidates.push_back(i);
      pr.weights.distance_m.push_back(dir_->distance_m(self_, i));
      pr.weights.ping_s.push_back(std::max(to_seconds(it->second.first), 1e-9));
    }
  }
  if (!pr.weights.candidates.empty()) {
    pr.weights.weight = compute_weights(pr.weights.distance_m, pr.weights.ping_s, params_.form);
    auto picks = select_relays(pr.weights.weight, params_.fanout, rng_);
    std::vector<std::size_t> relays;
    for (auto p : picks) relays.push_back(pr.weights.candidates[p]);
    for (auto r : relays) known_.insert(r);
    auto msg = std::make_shared<GossipMsg>();
    msg->digest = digest_;
    msg->payload_size = params_.payload_size;
    msg->origin = origin_;
    msg->hops = hops_ + 1;
    msg->seen.assign(dir_->size(), false);
    for (auto k : known_) msg->seen[k] = true;
    for (auto r : relays) sim.send(dir_->at(self_).node, dir_->at(r).node, msg);
  }
  probes_.push_back(std::move(pr));
  start_round(sim);
}

bool GossipLeader::handle(sim::Simulator& sim, const sim::Delivery& d) {
  const auto me = dir_->at(self_).node;
  if (d.local) {
    auto t = dynamic_cast<const ProbeTimer*>(d.payload.get());
    if (!t || t->owner != this) return false;
    if (probing_ && t->round == round_id_) finish_round(sim);
    return true;
  }
  const auto* p = d.payload.get();
  if (auto ping = dynamic_cast<const PingMsg*>(p)) {
    sim.send(me, d.src, std::make_shared<AckMsg>(ping->round, informed_ && digest_ == ping->digest));
    return true;
  }
  if (auto ack = dynamic_cast<const AckMsg*>(p)) {
    auto from = dir_->index_of_node(d.src);
    if (!probing_ || ack->round != round_id_ || !from) return true;
    if (std::find(asked_.begin(), asked_.end(), *from) == asked_.end()) return true;
    answers_.emplace(*from, std::make_pair(sim.local_now() - probe_sent_, ack->has_block));
    if (answers_.size() == asked_.size()) finish_round(sim);
    return true;
  }
  if (auto g = dynamic_cast<const GossipMsg*>(p)) {
    if (informed_) return true;  // duplicates change nothing
    if (g->hops > params_.ttl) return true;
    accept(sim, g->digest, g->hops, g->origin, g->seen);
    return true;
  }
  return false;
}

// ------------------------------------------------------------- driver

PropagationReport disseminate(const LeaderDirectory& dir_in, std::size_t origin, const GossipParams& params,
                              const sim::LatencyModel& latency, std::uint64_t seed,
                              const std::set<std::size_t>& crashed) {
  const std::size_t L = dir_in.size();
  if (origin >= L) throw std::out_of_range("origin beyond directory");
  if (crashed.count(origin)) throw std::invalid_argument("origin leader is crashed");
  std::vector<LeaderInfo> renum = dir_in.leaders();
  for (std::size_t i = 0; i < L; ++i) renum[i].node = static_cast<NodeId>(i);
  auto dir = std::make_shared<const LeaderDirectory>(std::move(renum));

  sim::FaultModel fm;
  for (auto c : crashed) fm.crash(static_cast<NodeId>(c), 0);
  sim::Simulator sim(latency, derive_seed(seed, "gossip-sim"), std::move(fm));
  sim.set_record_trace(false);
  std::vector<std::unique_ptr<GossipLeader>> leaders;
  for (std::size_t i = 0; i < L; ++i) {
    const auto& li = dir->at(i);
    sim.add_node({li.lat, li.lon, li.capability});
    leaders.push_back(std::make_unique<GossipLeader>(i, dir, params, derive_seed(seed, "gossip-leader", {i})));
    auto* g = leaders.back().get();
    sim.set_handler(static_cast<NodeId>(i), [g](sim::Simulator& s, const sim::Delivery& d) { g->handle(s, d); });
  }
  const auto digest = crypto::Sha256().update("IOB/v1/gossip-block").update_u64(seed).finish();
  struct Start final : sim::Payload {
    std::string_view kind() const override { return "GOSSIP_START"; }
    std::size_t wire_size() const override { return 0; }
  };
  sim.set_handler(static_cast<NodeId>(origin), [&, g = leaders[origin].get()](sim::Simulator& s, const sim::Delivery& d) {
    if (d.local && dynamic_cast<const Start*>(d.payload.get())) g->originate(s, digest);
    else g->handle(s, d);
  });
  sim.inject(static_cast<NodeId>(origin), 0, std::make_shared<Start>());
  sim.run_until_quiescent();

  PropagationReport r;
  r.origin = origin;
  r.informed.assign(L, false);
  r.receipt_time.assign(L, -1);
  r.hops.assign(L, -1);
  std::size_t alive = 0, got = 0;
  for (std::size_t i = 0; i < L; ++i) {
    const auto& g = *leaders[i];
    if (g.informed()) {
      r.informed[i] = true;
      r.receipt_time[i] = g.receipt_time();
      r.hops[i] = g.hops();
      r.max_hops = std::max(r.max_hops, g.hops());
      r.completion = std::max(r.completion, g.receipt_time());
    }
    if (crashed.count(i)) continue;
    ++alive;
    if (g.informed()) ++got;
    else r.uninformed.push_back(i);
  }
  r.coverage = alive ? static_cast<double>(got) / static_cast<double>(alive) : 1.0;
  r.messages = sim.count("GOSSIP") + sim.count("GOSSIP_PING") + sim.count("GOSSIP_ACK");
  return r;
}

void write_report_csv(std::ostream& os, const LeaderDirectory& dir, const PropagationReport& r) {
  os << "leader_id,cluster_id,receipt_time,hops\n";
  char buf[40];
  for (std::size_t i = 0; i < dir.size(); ++i) {
    os << dir.at(i).node << ',' << dir.at(i).cluster_id << ',';
    if (r.informed[i]) {
      std::snprintf(buf, sizeof buf, "%.9f", to_seconds(r.receipt_time[i]));
      os << buf << ',' << r.hops[i] << '\n';
    } else {
      os << "NA,NA\n";
    }
  }
}

}  // namespace iob::gossip
