#include "iob/consensus/pbft.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace iob::consensus {

std::uint64_t message_count(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("message_count needs n >= 1");
  return (n - 1) + 2 * n * (n - 1) + n;
}

std::size_t select_leader(double lat, double lon, std::span<const cluster::NodeRecord> members, Rng& rng,
                          std::size_t k) {
  if (members.empty()) throw std::invalid_argument("select_leader: empty roster");
  if (k == 0) throw std::invalid_argument("select_leader: k must be positive");
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(members.size());
  for (std::size_t i = 0; i < members.size(); ++i)
    d.emplace_back(cluster::haversine_m(lat, lon, members[i].lat, members[i].lon), i);
  const std::size_t m = std::min(k, d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(m), d.end(), [&](auto& a, auto& b) {
    return a.first != b.first ? a.first < b.first : members[a.second].id < members[b.second].id;
  });
  std::uniform_int_distribution<std::size_t> pick(0, m - 1);
  return d[pick(rng)].second;
}

void write_chain_csv(std::ostream& os, std::span<const ChainEntry> chain) {
  os << "seq,digest,view,commit_time\n";
  char buf[40];
  for (const auto& e : chain) {
    std::snprintf(buf, sizeof buf, "%.9f", to_seconds(e.commit_time));
    os << e.seq << ',' << to_hex(e.digest) << ',' << e.view << ',' << buf << '\n';
  }
}

std::size_t CatchupPayload::wire_size() const {
  std::size_t s = 4 + 4 + 4;
  for (const auto& e : entries) s += 8 + 8 + 32 + (e.block ? 100 + e.block->payload.size() : 0);
  return s;
}

namespace {

struct ReplicaTimer final : sim::Payload {
  ReplicaTimer(const void* o, std::uint64_t g) : owner(o), gen(g) {}
  std::string_view kind() const override { return "PBFT_TIMER"; }
  std::size_t wire_size() const override { return 0; }
  const void* owner;
  std::uint64_t gen;
};

struct ClientTimer final : sim::Payload {
  ClientTimer(const void* o, const Digest& d) : owner(o), digest(d) {}
  std::string_view kind() const override { return "CLIENT_TIMER"; }
  std::size_t wire_size() const override { return 0; }
  const void* owner;
  Digest digest;
};

bool block_matches(const Digest& d, const std::shared_ptr<const BlockProposal>& b, const KeyRegistry& keys) {
  if (d == null_digest()) return !b;
  return b && b->digest == d && b->valid(keys);
}

}  // namespace

bool valid_prepared_entry(const PreparedEntry& e, const ClusterRoster& roster, const KeyRegistry& keys) {
  if (e.seq == 0 || !block_matches(e.digest, e.block, keys)) return false;
  std::set<NodeId> seen;
  PbftMessage m;
  m.phase = Phase::prepare;
  m.view = e.view;
  m.seq = e.seq;
  m.digest = e.digest;
  for (const auto& c : e.cert) {
    if (!roster.contains(c.sender) || !seen.insert(c.sender).second) return false;
    m.sender = c.sender;
    m.signature = c.signature;
    if (!m.verify(keys)) return false;
  }
  return seen.size() >= roster.quorum();
}

std::vector<PlanEntry> compute_plan(std::span<const std::shared_ptr<const ViewChange>> proofs,
                                    const ClusterRoster& roster, const KeyRegistry& keys) {
  std::map<std::uint64_t, const PreparedEntry*> best;
  std::uint64_t max_seq = 0;
  for (const auto& vc : proofs) {
    for (const auto& p : vc->prepared) {
      if (p.view >= vc->new_view || !valid_prepared_entry(p, roster, keys)) continue;
      auto [it, fresh] = best.emplace(p.seq, &p);
      if (!fresh && (p.view > it->second->view || (p.view == it->second->view && p.digest < it->second->digest)))
        it->second = &p;
      max_seq = std::max(max_seq, p.seq);
    }
  }
  std::vector<PlanEntry> plan;
  std::set<Digest> placed;
  for (std::uint64_t s = 1; s <= max_seq; ++s) {
    auto it = best.find(s);
    if (it == best.end()) {
      plan.push_back({s, null_digest(), nullptr});
    } else {
      plan.push_back({s, it->second->digest, it->second->block});
      placed.insert(it->second->digest);
    }
  }
  std::map<Digest, std::shared_ptr<const BlockProposal>> extra;
  for (const auto& vc : proofs)
    for (const auto& b : vc->pending)
      if (b && !placed.count(b->digest) && !extra.count(b->digest) && b->valid(keys)) extra.emplace(b->digest, b);
  std::uint64_t s = max_seq;
  for (auto& [d, b] : extra) plan.push_back({++s, d, b});
  return plan;
}

// ------------------------------------------------------------- replica

PbftReplica::PbftReplica(NodeId self, std::shared_ptr<const ClusterRoster> roster,
                         std::shared_ptr<const KeyRegistry> keys, PbftConfig cfg)
    : self_(self), roster_(std::move(roster)), keys_(std::move(keys)), cfg_(cfg) {
  if (!roster_ || roster_->size() == 0) throw std::invalid_argument("replica needs a non-empty roster");
  if (!roster_->contains(self_)) throw std::invalid_argument("replica not in its roster");
}

NodeId PbftReplica::primary(std::uint64_t view) const {
  const auto n = roster_->size();
  return roster_->at(static_cast<std::size_t>((cfg_.leader_offset + view) % n)).id;
}

std::size_t PbftReplica::add_vote(std::map<Digest, Votes>& m, const PbftMessage& msg, bool keep_sig) {
  auto& v = m[msg.digest];
  if (v.seen.empty()) v.seen.assign(roster_->size(), 0);
  auto idx = *roster_->index_of(msg.sender);
  if (!v.seen[idx]) {
    v.seen[idx] = 1;
    ++v.count;
    if (keep_sig && v.sigs.size() < roster_->quorum()) v.sigs.push_back({msg.sender, msg.signature});
  }
  return v.count;
}

bool PbftReplica::check_sig(sim::Simulator& sim, NodeId src, const PbftMessage& m) {
  sim.charge(cfg_.verify_cost);
  if (m.sender != src || !roster_->contains(src) || !m.verify(*keys_)) {
    flagged_.insert(src);
    return false;
  }
  return true;
}

void PbftReplica::broadcast(sim::Simulator& sim, const sim::PayloadPtr& p) {
  for (const auto& m : roster_->members())
    if (m.id != self_) sim.send(self_, m.id, p);
}

void PbftReplica::send_vote(sim::Simulator& sim, Phase phase, std::uint64_t view, std::uint64_t seq,
                            const Digest& d) {
  auto p = std::make_shared<PbftPayload>();
  p->msg.phase = phase;
  p->msg.view = view;
  p->msg.seq = seq;
  p->msg.digest = d;
  p->msg.sender = self_;
  p->msg.sign(*keys_);
  sim.charge(cfg_.sign_cost);
  auto& slot = slots_[{view, seq}];
  add_vote(phase == Phase::prepare ? slot.prepares : slot.commits, p->msg, phase == Phase::prepare);
  broadcast(sim, p);
}

std::shared_ptr<const BlockProposal> PbftReplica::lookup(const Digest& d) const {
  if (auto it = known_.find(d); it != known_.end()) return it->second;
  if (auto it = claim_blocks_.find(d); it != claim_blocks_.end()) return it->second;
  return nullptr;
}

void PbftReplica::remember(const std::shared_ptr<const BlockProposal>& b) {
  known_.emplace(b->digest, b);
  if (!executed_.count(b->digest)) pending_.emplace(b->digest, b);
}

bool PbftReplica::handle(sim::Simulator& sim, const sim::Delivery& d) {
  if (d.local) {
    if (auto t = dynamic_cast<const ReplicaTimer*>(d.payload.get())) {
      if (t->owner != this) return false;
      on_timer(sim, t->gen);
      return true;
    }
    return false;
  }
  const auto* p = d.payload.get();
  if (!dynamic_cast<const PbftPayload*>(p) && !dynamic_cast<const RequestPayload*>(p) &&
      !dynamic_cast<const ViewChangePayload*>(p) && !dynamic_cast<const NewViewPayload*>(p) &&
      !dynamic_cast<const FetchPayload*>(p) && !dynamic_cast<const BlockPayload*>(p) &&
      !dynamic_cast<const CatchupPayload*>(p))
    return false;
  if (auto pp = dynamic_cast<const PbftPayload*>(p); pp && pp->msg.phase == Phase::reply) return false;
  handle_payload(sim, d.src, d.payload);
  return true;
}

void PbftReplica::handle_payload(sim::Simulator& sim, NodeId src, const sim::PayloadPtr& payload) {
  const auto* p = payload.get();
  if (auto pp = dynamic_cast<const PbftPayload*>(p)) {
    if (pp->msg.view > view_) {
      if (!roster_->contains(src)) return;
      future_.push_back({src, payload});
      return;
    }
    switch (pp->msg.phase) {
      case Phase::pre_prepare: on_pre_prepare(sim, src, *pp); break;
      case Phase::prepare:
        if (check_sig(sim, src, pp->msg)) on_prepare(sim, src, pp->msg);
        break;
      case Phase::commit:
        if (check_sig(sim, src, pp->msg)) on_commit(sim, src, pp->msg);
        break;
      case Phase::reply: break;
    }
  } else if (auto rq = dynamic_cast<const RequestPayload*>(p)) {
    on_request(sim, src, rq->block);
  } else if (auto vc = dynamic_cast<const ViewChangePayload*>(p)) {
    on_view_change(sim, src, vc->vc);
  } else if (auto nv = dynamic_cast<const NewViewPayload*>(p)) {
    on_new_view(sim, src, nv->nv);
  } else if (auto f = dynamic_cast<const FetchPayload*>(p)) {
    on_fetch(sim, src, *f);
  } else if (auto b = dynamic_cast<const BlockPayload*>(p)) {
    on_block(sim, b->block);
  } else if (auto c = dynamic_cast<const CatchupPayload*>(p)) {
    on_catchup(sim, src, *c);
  }
}

void PbftReplica::submit(sim::Simulator& sim, std::shared_ptr<const BlockProposal> b) {
  on_request(sim, self_, b);
}

void PbftReplica::on_request(sim::Simulator& sim, NodeId src, const std::shared_ptr<const BlockProposal>& b) {
  sim.charge(cfg_.verify_cost);
  if (!b || !b->valid(*keys_)) {
    flagged_.insert(src);
    return;
  }
  if (auto it = executed_.find(b->digest); it != executed_.end()) {
    const auto& e = chain_[it->second];
    auto r = std::make_shared<PbftPayload>();
    r->msg = {Phase::reply, e.view, e.seq, e.digest, self_, {}};
    r->msg.sign(*keys_);
    sim.charge(cfg_.sign_cost);
    sim.send(self_, b->client, r);
    return;
  }
  remember(b);
  if (in_vc_) return;
  if (is_primary()) {
    propose(sim, b);
  } else {
    if (src == b->client) sim.send(self_, primary(view_), std::make_shared<RequestPayload>(b));
    if (!timer_running_) restart_timer(sim);
  }
}

void PbftReplica::propose(sim::Simulator& sim, const std::shared_ptr<const BlockProposal>& b) {
  if (assigned_.count(b->digest) || executed_.count(b->digest)) return;
  const auto v = validator_ ? validator_(*b) : Validity::valid;
  if (v == Validity::invalid) return;
  if (v == Validity::pending) {
    if (std::none_of(primary_waiting_.begin(), primary_waiting_.end(),
                     [&](const auto& w) { return w->digest == b->digest; }))
      primary_waiting_.push_back(b);
    return;
  }
  const auto seq = next_seq_++;
  assigned_.insert(b->digest);
  auto p = std::make_shared<PbftPayload>();
  p->msg = {Phase::pre_prepare, view_, seq, b->digest, self_, {}};
  p->msg.sign(*keys_);
  p->block = b;
  sim.charge(cfg_.sign_cost);
  broadcast(sim, p);
  accept_pre_prepare(sim, view_, seq, b->digest, b);
}

void PbftReplica::on_pre_prepare(sim::Simulator& sim, NodeId src, const PbftPayload& p) {
  const auto& m = p.msg;
  if (!check_sig(sim, src, m)) return;
  if (m.view < view_ || in_vc_) return;
  if (m.sender != primary(m.view) || m.seq == 0 || m.digest == null_digest()) {
    flagged_.insert(src);
    return;
  }
  sim.charge(cfg_.verify_cost);
  if (!p.block || p.block->digest != m.digest || !p.block->valid(*keys_)) {
    flagged_.insert(src);
    return;
  }
  if (slots_[{m.view, m.seq}].has_pp) return;
  const auto v = validator_ ? validator_(*p.block) : Validity::valid;
  if (v == Validity::invalid) return;
  if (v == Validity::pending) {
    waiting_.push_back({m.view, m.seq, p.block});
    return;
  }
  accept_pre_prepare(sim, m.view, m.seq, m.digest, p.block);
}

void PbftReplica::recheck(sim::Simulator& sim) {
  auto waiting = std::move(waiting_);
  waiting_.clear();
  for (auto& w : waiting) {
    if (w.view != view_ || in_vc_) {
      if (w.view >= view_) waiting_.push_back(w);
      continue;
    }
    if (slots_[{w.view, w.seq}].has_pp) continue;
    const auto v = validator_ ? validator_(*w.block) : Validity::valid;
    if (v == Validity::pending) waiting_.push_back(w);
    else if (v == Validity::valid) accept_pre_prepare(sim, w.view, w.seq, w.block->digest, w.block);
  }
  if (is_primary() && !in_vc_) {
    auto mine = std::move(primary_waiting_);
    primary_waiting_.clear();
    for (auto& b : mine) propose(sim, b);
  }
}

void PbftReplica::accept_pre_prepare(sim::Simulator& sim, std::uint64_t view, std::uint64_t seq, const Digest& d,
                                     const std::shared_ptr<const BlockProposal>& b) {
  auto& slot = slots_[{view, seq}];
  if (slot.has_pp) return;
  slot.has_pp = true;
  slot.pp_digest = d;
  slot.block = b;
  if (b) remember(b);
  if (d != null_digest()) assigned_.insert(d);
  next_seq_ = std::max(next_seq_, seq + 1);
  if (!pending_.empty()) restart_timer(sim);
  send_vote(sim, Phase::prepare, view, seq, d);
  check_prepared(sim, view, seq);
  check_committed(sim, view, seq);
}

void PbftReplica::on_prepare(sim::Simulator& sim, NodeId, const PbftMessage& m) {
  if (m.view < view_) return;
  add_vote(slots_[{m.view, m.seq}].prepares, m, true);
  check_prepared(sim, m.view, m.seq);
}

void PbftReplica::on_commit(sim::Simulator& sim, NodeId, const PbftMessage& m) {
  add_vote(slots_[{m.view, m.seq}].commits, m, false);
  check_committed(sim, m.view, m.seq);
}

void PbftReplica::check_prepared(sim::Simulator& sim, std::uint64_t view, std::uint64_t seq) {
  if (view != view_ || in_vc_) return;
  auto it = slots_.find({view, seq});
  if (it == slots_.end()) return;
  auto& slot = it->second;
  if (!slot.has_pp || slot.prepared) return;
  auto v = slot.prepares.find(slot.pp_digest);
  if (v == slot.prepares.end() || v->second.count < roster_->quorum()) return;
  slot.prepared = true;
  auto& cert = prepared_certs_[seq];
  if (cert.seq == 0 || cert.view <= view) cert = {seq, view, slot.pp_digest, slot.block, v->second.sigs};
  send_vote(sim, Phase::commit, view, seq, slot.pp_digest);
  check_committed(sim, view, seq);
}

void PbftReplica::check_committed(sim::Simulator& sim, std::uint64_t view, std::uint64_t seq) {
  auto it = slots_.find({view, seq});
  if (it == slots_.end()) return;
  auto& slot = it->second;
  for (const auto& [d, votes] : slot.commits) {
    if (votes.count < roster_->quorum()) continue;
    if (auto dd = decided_.find(seq); dd != decided_.end()) {
      if (dd->second.digest != d) conflict_ = true;
      return;
    }
    std::shared_ptr<const BlockProposal> block;
    if (d != null_digest()) {
      block = (slot.has_pp && slot.pp_digest == d) ? slot.block : lookup(d);
      if (!block) {
        if (!slot.fetch_sent) {
          slot.fetch_sent = true;
          auto f = std::make_shared<FetchPayload>();
          f->seq = seq;
          f->digest = d;
          std::size_t asked = 0;
          for (std::size_t i = 0; i < votes.seen.size() && asked < roster_->f() + 1; ++i) {
            const auto id = roster_->at(i).id;
            if (votes.seen[i] && id != self_) {
              sim.send(self_, id, f);
              ++asked;
            }
          }
        }
        return;
      }
    }
    decide(sim, seq, d, view, block);
    return;
  }
}

void PbftReplica::decide(sim::Simulator& sim, std::uint64_t seq, const Digest& d, std::uint64_t view,
                         std::shared_ptr<const BlockProposal> b) {
  if (auto it = decided_.find(seq); it != decided_.end()) {
    if (it->second.digest != d) conflict_ = true;
    return;
  }
  decided_[seq] = {d, view, b};
  next_seq_ = std::max(next_seq_, seq + 1);
  if (b) known_.emplace(d, b);
  execute(sim);
}

void PbftReplica::execute(sim::Simulator& sim) {
  bool progressed = false;
  for (auto it = decided_.find(last_exec_ + 1); it != decided_.end(); it = decided_.find(last_exec_ + 1)) {
    ++last_exec_;
    progressed = true;
    const auto& dec = it->second;
    if (dec.digest == null_digest() || executed_.count(dec.digest)) continue;
    ChainEntry e{last_exec_, dec.digest, dec.view, sim.local_now()};
    executed_.emplace(dec.digest, chain_.size());
    chain_.push_back(e);
    pending_.erase(dec.digest);
    auto r = std::make_shared<PbftPayload>();
    r->msg = {Phase::reply, dec.view, last_exec_, dec.digest, self_, {}};
    r->msg.sign(*keys_);
    sim.charge(cfg_.sign_cost);
    sim.send(self_, dec.block->client, r);
    if (commit_hook_) commit_hook_(sim, e, *dec.block);
  }
  if (!progressed) return;
  consecutive_vc_ = 0;
  vc_attempts_ = 0;
  if (in_vc_) return;
  if (pending_.empty()) stop_timer();
  else restart_timer(sim);
}

// ------------------------------------------------------------- view change

void PbftReplica::restart_timer(sim::Simulator& sim) {
  ++timer_gen_;
  timer_running_ = true;
  const auto timeout = cfg_.view_timeout << std::min(consecutive_vc_, 16);
  sim.set_timer(self_, timeout, std::make_shared<ReplicaTimer>(this, timer_gen_));
}

void PbftReplica::on_timer(sim::Simulator& sim, std::uint64_t gen) {
  if (gen != timer_gen_ || !timer_running_) return;
  timer_running_ = false;
  if (!in_vc_ && pending_.empty()) return;
  if (vc_attempts_ >= cfg_.max_vc_attempts) return;
  ++vc_attempts_;
  start_view_change(sim, in_vc_ ? vc_target_ + 1 : view_ + 1);
}

void PbftReplica::start_view_change(sim::Simulator& sim, std::uint64_t target) {
  in_vc_ = true;
  vc_target_ = target;
  ++consecutive_vc_;
  auto vc = std::make_shared<ViewChange>();
  vc->new_view = target;
  vc->sender = self_;
  vc->last_executed = last_exec_;
  for (const auto& [s, c] : prepared_certs_) vc->prepared.push_back(c);
  for (const auto& [d, b] : pending_) vc->pending.push_back(b);
  vc->signature = keys_->sign(self_, vc->signing_bytes());
  sim.charge(cfg_.sign_cost);
  vcs_[target][self_] = vc;
  auto p = std::make_shared<ViewChangePayload>();
  p->vc = vc;
  broadcast(sim, p);
  restart_timer(sim);
  maybe_new_view(sim, target);
}

void PbftReplica::on_view_change(sim::Simulator& sim, NodeId src, const std::shared_ptr<const ViewChange>& vc) {
  sim.charge(cfg_.verify_cost);
  if (!vc || vc->sender != src || !roster_->contains(src) ||
      !keys_->verify(src, vc->signing_bytes(), vc->signature)) {
    flagged_.insert(src);
    return;
  }
  // A lagging peer learns what we already executed.
  if (vc->last_executed < last_exec_) {
    auto& sent = catchup_sent_[src];
    if (sent < last_exec_) {
      auto c = std::make_shared<CatchupPayload>();
      c->sender = self_;
      for (auto it = decided_.upper_bound(vc->last_executed); it != decided_.end() && it->first <= last_exec_; ++it)
        c->entries.push_back({it->first, it->second.view, it->second.digest, it->second.block});
      sent = last_exec_;
      sim.send(self_, src, c);
    }
  }
  if (vc->new_view <= view_) return;
  vcs_[vc->new_view][src] = vc;
  maybe_join(sim);
  maybe_new_view(sim, vc->new_view);
}

void PbftReplica::maybe_join(sim::Simulator& sim) {
  const auto target = in_vc_ ? vc_target_ : view_;
  std::set<NodeId> senders;
  std::uint64_t lowest = 0;
  for (auto it = vcs_.upper_bound(target); it != vcs_.end(); ++it) {
    if (lowest == 0) lowest = it->first;
    for (const auto& [id, _] : it->second) senders.insert(id);
  }
  if (senders.size() >= roster_->f() + 1 && lowest > target) start_view_change(sim, lowest);
}

void PbftReplica::maybe_new_view(sim::Simulator& sim, std::uint64_t view) {
  if (primary(view) != self_ || nv_sent_.count(view) || view <= view_) return;
  if (!in_vc_ || vc_target_ != view) return;
  auto it = vcs_.find(view);
  if (it == vcs_.end() || it->second.size() < roster_->quorum()) return;
  auto nv = std::make_shared<NewView>();
  nv->view = view;
  nv->sender = self_;
  for (const auto& [id, vc] : it->second) {
    if (nv->proofs.size() == roster_->quorum()) break;
    nv->proofs.push_back(vc);
  }
  nv->plan = compute_plan(nv->proofs, *roster_, *keys_);
  nv->signature = keys_->sign(self_, nv->signing_bytes());
  sim.charge(cfg_.sign_cost);
  nv_sent_.insert(view);
  auto p = std::make_shared<NewViewPayload>();
  p->nv = nv;
  broadcast(sim, p);
  enter_view(sim, view, nv->plan);
}

void PbftReplica::on_new_view(sim::Simulator& sim, NodeId src, const std::shared_ptr<const NewView>& nv) {
  if (!nv || nv->view <= view_) return;
  sim.charge(cfg_.verify_cost);
  if (src != nv->sender || src != primary(nv->view) || !keys_->verify(src, nv->signing_bytes(), nv->signature)) {
    flagged_.insert(src);
    return;
  }
  std::set<NodeId> senders;
  for (const auto& vc : nv->proofs) {
    sim.charge(cfg_.verify_cost);
    if (!vc || vc->new_view != nv->view || !roster_->contains(vc->sender) || !senders.insert(vc->sender).second ||
        !keys_->verify(vc->sender, vc->signing_bytes(), vc->signature)) {
      flagged_.insert(src);
      return;
    }
  }
  if (senders.size() < roster_->quorum()) {
    flagged_.insert(src);
    return;
  }
  auto plan = compute_plan(nv->proofs, *roster_, *keys_);
  bool same = plan.size() == nv->plan.size();
  for (std::size_t i = 0; same && i < plan.size(); ++i)
    same = plan[i].seq == nv->plan[i].seq && plan[i].digest == nv->plan[i].digest;
  if (!same) {
    flagged_.insert(src);
    return;
  }
  enter_view(sim, nv->view, plan);
}

void PbftReplica::enter_view(sim::Simulator& sim, std::uint64_t view, const std::vector<PlanEntry>& plan) {
  view_ = view;
  in_vc_ = false;
  vc_target_ = view;
  vc_attempts_ = 0;
  assigned_.clear();
  std::erase_if(waiting_, [&](const Waiting& w) { return w.view < view; });
  vcs_.erase(vcs_.begin(), vcs_.upper_bound(view));

  std::uint64_t top = last_exec_;
  if (!decided_.empty()) top = std::max(top, decided_.rbegin()->first);
  for (const auto& e : plan) top = std::max(top, e.seq);
  next_seq_ = top + 1;
  for (const auto& e : plan)
    if (e.digest != null_digest()) assigned_.insert(e.digest);
  for (const auto& e : plan) accept_pre_prepare(sim, view, e.seq, e.digest, e.block);

  replay_future(sim);

  std::vector<std::shared_ptr<const BlockProposal>> left;
  for (const auto& [d, b] : pending_)
    if (!assigned_.count(d)) left.push_back(b);
  if (is_primary()) {
    for (const auto& b : left) propose(sim, b);
    auto mine = std::move(primary_waiting_);
    primary_waiting_.clear();
    for (auto& b : mine) propose(sim, b);
  } else {
    for (const auto& b : left) sim.send(self_, primary(view_), std::make_shared<RequestPayload>(b));
  }
  if (pending_.empty()) stop_timer();
  else restart_timer(sim);
}

void PbftReplica::replay_future(sim::Simulator& sim) {
  auto buffered = std::move(future_);
  future_.clear();
  for (auto& b : buffered) {
    const auto v = static_cast<const PbftPayload&>(*b.payload).msg.view;
    if (v > view_) future_.push_back(std::move(b));
    else handle_payload(sim, b.src, b.payload);
  }
}

// ------------------------------------------------------------- catch-up

void PbftReplica::on_fetch(sim::Simulator& sim, NodeId src, const FetchPayload& f) {
  if (!roster_->contains(src)) return;
  if (auto b = lookup(f.digest)) sim.send(self_, src, std::make_shared<BlockPayload>(b));
}

void PbftReplica::on_block(sim::Simulator& sim, const std::shared_ptr<const BlockProposal>& b) {
  sim.charge(cfg_.verify_cost);
  if (!b || !b->valid(*keys_)) return;
  known_.emplace(b->digest, b);
  std::vector<std::pair<std::uint64_t, std::uint64_t>> hit;
  for (const auto& [key, slot] : slots_) {
    auto it = slot.commits.find(b->digest);
    if (it != slot.commits.end() && it->second.count >= roster_->quorum()) hit.push_back(key);
  }
  for (auto [v, s] : hit) check_committed(sim, v, s);
}

void PbftReplica::on_catchup(sim::Simulator& sim, NodeId src, const CatchupPayload& c) {
  if (!roster_->contains(src) || src == self_) return;
  for (const auto& e : c.entries) {
    if (e.seq == 0 || e.seq <= last_exec_ || decided_.count(e.seq)) continue;
    sim.charge(cfg_.verify_cost);
    if (!block_matches(e.digest, e.block, *keys_)) continue;
    if (e.block) claim_blocks_.emplace(e.digest, e.block);
    auto& who = claims_[e.seq][e.digest];
    who.insert(src);
    if (who.size() >= roster_->f() + 1) decide(sim, e.seq, e.digest, e.view, e.block);
  }
}

// ------------------------------------------------------------- client

PbftClient::PbftClient(NodeId self, std::shared_ptr<const ClusterRoster> roster,
                       std::shared_ptr<const KeyRegistry> keys, ClientConfig cfg)
    : self_(self), roster_(std::move(roster)), keys_(std::move(keys)), cfg_(cfg) {
  if (!roster_ || roster_->size() == 0) throw std::invalid_argument("client needs a non-empty roster");
}

void PbftClient::submit(sim::Simulator& sim, std::shared_ptr<const BlockProposal> b) {
  if (!b) throw std::invalid_argument("null block");
  auto& r = requests_[b->digest];
  r.block = b;
  const auto n = roster_->size();
  const auto primary = roster_->at(static_cast<std::size_t>((cfg_.leader_offset + view_guess_) % n)).id;
  sim.send(self_, primary, std::make_shared<RequestPayload>(b));
  sim.set_timer(self_, cfg_.retry_timeout, std::make_shared<ClientTimer>(this, b->digest));
}

bool PbftClient::handle(sim::Simulator& sim, const sim::Delivery& d) {
  if (d.local) {
    auto t = dynamic_cast<const ClientTimer*>(d.payload.get());
    if (!t || t->owner != this) return false;
    auto it = requests_.find(t->digest);
    if (it == requests_.end() || it->second.done_at || it->second.retries >= cfg_.max_retries) return true;
    auto& r = it->second;
    ++r.retries;
    auto p = std::make_shared<RequestPayload>(r.block);
    for (const auto& m : roster_->members()) sim.send(self_, m.id, p);
    sim.set_timer(self_, cfg_.retry_timeout << std::min(r.retries, 16), std::make_shared<ClientTimer>(this, t->digest));
    return true;
  }
  auto p = dynamic_cast<const PbftPayload*>(d.payload.get());
  if (!p || p->msg.phase != Phase::reply) return false;
  const auto& m = p->msg;
  if (m.sender != d.src || !roster_->contains(m.sender) || !m.verify(*keys_)) return true;
  auto it = requests_.find(m.digest);
  if (it == requests_.end() || it->second.done_at) return true;
  auto& r = it->second;
  r.replies[m.sender] = m.digest;
  view_guess_ = std::max(view_guess_, m.view);
  if (r.replies.size() >= roster_->f() + 1) {
    r.done_at = sim.local_now();
    if (done_hook_) done_hook_(sim, *r.block, *r.done_at);
  }
  return true;
}

bool PbftClient::done(const Digest& d) const { return completion(d).has_value(); }

std::optional<SimTime> PbftClient::completion(const Digest& d) const {
  auto it = requests_.find(d);
  if (it == requests_.end()) return std::nullopt;
  return it->second.done_at;
}

std::size_t PbftClient::outstanding() const {
  std::size_t n = 0;
  for (const auto& [d, r] : requests_)
    if (!r.done_at) ++n;
  return n;
}

}  // namespace iob::consensus
