#include "iob/consensus/roster_sync.hpp"

#include <algorithm>
#include <map>

namespace iob::consensus {

const char* to_string(SyncStatus s) {
  switch (s) {
    case SyncStatus::unchanged: return "unchanged";
    case SyncStatus::synchronized: return "synchronized";
    case SyncStatus::no_majority: return "no_majority";
  }
  return "?";
}

ConsistencyResult consistency_check(const ClusterRoster& local, std::span<const ClusterRoster> ca_rosters,
                                    SimTime backoff) {
  std::map<Digest, std::pair<std::size_t, const ClusterRoster*>> tally;
  for (const auto& r : ca_rosters) {
    auto& t = tally[r.digest()];
    ++t.first;
    t.second = &r;
  }
  for (const auto& [d, t] : tally) {
    if (2 * t.first <= ca_rosters.size()) continue;
    if (d == local.digest()) return {SyncStatus::unchanged, local, 0};
    return {SyncStatus::synchronized, *t.second, 0};
  }
  return {SyncStatus::no_majority, local, backoff};
}

namespace {
struct SyncTimer final : sim::Payload {
  SyncTimer(const void* o, std::uint64_t r, bool retry) : owner(o), round(r), is_retry(retry) {}
  std::string_view kind() const override { return "ROSTER_TIMER"; }
  std::size_t wire_size() const override { return 0; }
  const void* owner;
  std::uint64_t round;
  bool is_retry;
};
}  // namespace

RosterSync::RosterSync(NodeId self, ClusterRoster local, std::vector<NodeId> ca_nodes, Config cfg)
    : self_(self), local_(std::move(local)), ca_(std::move(ca_nodes)), cfg_(cfg) {}

void RosterSync::start(sim::Simulator& sim) {
  ++attempts_;
  ++round_;
  open_ = true;
  replies_.clear();
  auto q = std::make_shared<RosterQuery>();
  for (auto id : ca_) sim.send(self_, id, q);
  sim.set_timer(self_, cfg_.reply_timeout, std::make_shared<SyncTimer>(this, round_, false));
}

bool RosterSync::handle(sim::Simulator& sim, const sim::Delivery& d) {
  if (d.local) {
    auto t = dynamic_cast<const SyncTimer*>(d.payload.get());
    if (!t || t->owner != this) return false;
    if (t->round != round_) return true;
    if (t->is_retry) start(sim);
    else if (open_) finish(sim);
    return true;
  }
  auto r = dynamic_cast<const RosterReply*>(d.payload.get());
  if (!r) return false;
  if (!open_ || std::find(ca_.begin(), ca_.end(), d.src) == ca_.end()) return true;
  replies_.emplace(d.src, r->roster);
  if (replies_.size() == ca_.size()) finish(sim);
  return true;
}

void RosterSync::finish(sim::Simulator& sim) {
  open_ = false;
  std::vector<ClusterRoster> got;
  for (auto& [id, r] : replies_) got.push_back(r);
  // Silent CA nodes count against the majority.
  ConsistencyResult res;
  {
    std::map<Digest, std::pair<std::size_t, const ClusterRoster*>> tally;
    for (const auto& g : got) {
      auto& t = tally[g.digest()];
      ++t.first;
      t.second = &g;
    }
    res = {SyncStatus::no_majority, local_, cfg_.backoff << std::min(attempts_ - 1, 16)};
    for (const auto& [dg, t] : tally) {
      if (2 * t.first <= ca_.size()) continue;
      res = {dg == local_.digest() ? SyncStatus::unchanged : SyncStatus::synchronized, *t.second, 0};
    }
  }
  local_ = res.roster;
  last_ = res.status;
  if (done_) done_(sim, res);
  if (res.status == SyncStatus::no_majority && attempts_ < cfg_.max_attempts) {
    ++round_;
    sim.set_timer(self_, res.retry_after, std::make_shared<SyncTimer>(this, round_, true));
  }
}

bool RosterSync::serve(sim::Simulator& sim, const sim::Delivery& d, NodeId self, const ClusterRoster& roster) {
  if (d.local || !dynamic_cast<const RosterQuery*>(d.payload.get())) return false;
  sim.send(self, d.src, std::make_shared<RosterReply>(roster));
  return true;
}

}  // namespace iob::consensus
