#include "iob/auth/protocol.hpp"

#include <algorithm>
#include <stdexcept>

#include "iob/consensus/run.hpp"

namespace iob::auth {

namespace {

using consensus::BlockProposal;
using consensus::ChainEntry;
using consensus::PbftReplica;
using consensus::Validity;
using sim::NodeId;

struct VerdictBlock {
  std::uint32_t user = 0;
  bool accept = false;
  Bytes pu;

  Bytes encode() const {
    ByteWriter w;
    w.raw(std::string_view("IOB/v1/verdict"));
    w.u32(user);
    w.u8(accept ? 1 : 0);
    w.field(pu);
    return std::move(w).take();
  }
  static std::optional<VerdictBlock> decode(std::span<const std::uint8_t> b) {
    try {
      ByteReader r(b);
      auto tag = r.raw(14);
      if (std::string_view(reinterpret_cast<const char*>(tag.data()), tag.size()) != "IOB/v1/verdict")
        return std::nullopt;
      VerdictBlock v;
      v.user = r.u32();
      const auto a = r.u8();
      if (a > 1) return std::nullopt;
      v.accept = a == 1;
      auto pu = r.field();
      v.pu.assign(pu.begin(), pu.end());
      r.expect_done();
      return v;
    } catch (const DecodeError&) {
      return std::nullopt;
    }
  }
};

using LagrangeCache = std::map<std::vector<std::uint32_t>, std::vector<Scalar>>;

struct Start final : sim::Payload {
  std::string_view kind() const override { return "AUTH_START"; }
  std::size_t wire_size() const override { return 0; }
};

class CaNode {
 public:
  CaNode(std::uint32_t idx, NodeId id, const Group& g, const AuthSetup& setup, std::uint32_t q, std::uint32_t t,
         const std::vector<NodeId>& ca_ids, NodeId first_user, std::shared_ptr<const consensus::ClusterRoster> roster,
         std::shared_ptr<const consensus::KeyRegistry> keys, consensus::PbftConfig pc, LagrangeCache& cache)
      : idx_(idx), id_(id), g_(g), setup_(setup), q_(q), t_(t), ca_ids_(ca_ids), first_user_(first_user),
        keys_(keys), cache_(cache), replica_(id, std::move(roster), keys, pc) {
    replica_.set_validator([this](const BlockProposal& b) { return validate(b); });
    replica_.on_commit([this](sim::Simulator& s, const ChainEntry&, const BlockProposal& b) { committed(s, b); });
  }

  void handle(sim::Simulator& sim, const sim::Delivery& d) {
    if (replica_.handle(sim, d)) return;
    if (d.local) return;
    if (auto m = dynamic_cast<const AuthRequestMsg*>(d.payload.get())) {
      if (d.src != first_user_ + m->user || m->req.share_index != idx_ + 1) return;
      auto slice = std::make_shared<SliceMsg>(m->user, m->req, m->size);
      for (auto other : ca_ids_)
        if (other != id_) sim.send(id_, other, slice);
      take(sim, m->user, m->req);
    } else if (auto s = dynamic_cast<const SliceMsg*>(d.payload.get())) {
      if (d.src >= ca_ids_.size() || s->req.share_index != d.src + 1) return;
      take(sim, s->user, s->req);
    }
  }

  const CaRegistry& registry() const { return registry_; }
  const PbftReplica& replica() const { return replica_; }
  std::optional<Verdict> verdict(std::uint32_t user) const {
    auto it = sessions_.find(user);
    if (it == sessions_.end()) return std::nullopt;
    return it->second.verdict;
  }

 private:
  struct Session {
    bool have_header = false;
    GroupElement commitment;
    GroupElement pu;
    std::vector<std::pair<std::uint32_t, std::pair<Scalar, Scalar>>> slices;  // index -> (c, r)
    std::optional<Verdict> verdict;
  };

  void take(sim::Simulator& sim, std::uint32_t user, const wire::AuthRequest& req) {
    auto& s = sessions_[user];
    if (s.verdict) return;
    if (!s.have_header) {
      s.have_header = true;
      s.commitment = req.commitment;
      s.pu = req.pu;
    } else if (!(s.commitment == req.commitment) || !(s.pu == req.pu)) {
      return;
    }
    for (const auto& sl : s.slices)
      if (sl.first == req.share_index) return;
    s.slices.push_back({req.share_index, {req.c_share, req.r_share}});
    if (s.slices.size() < t_) return;

    std::vector<std::pair<std::uint32_t, std::pair<Scalar, Scalar>>> use(s.slices.begin(), s.slices.begin() + t_);
    std::sort(use.begin(), use.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::uint32_t> idx;
    for (const auto& u : use) idx.push_back(u.first);
    auto it = cache_.find(idx);
    if (it == cache_.end()) it = cache_.emplace(idx, crypto::lagrange_at_zero(g_, idx)).first;
    Scalar c, r;
    for (std::size_t i = 0; i < use.size(); ++i) {
      c = g_.add(c, g_.mul(it->second[i], use[i].second.first));
      r = g_.add(r, g_.mul(it->second[i], use[i].second.second));
    }
    sim.charge(setup_.costs.ca_verify(t_));
    s.verdict = verify_proof(g_, s.pu, s.commitment, c, r) ? Verdict::accept : Verdict::reject;
    s.slices.clear();
    s.slices.shrink_to_fit();

    if (idx_ == setup_.entry_ca) {
      VerdictBlock vb{user, *s.verdict == Verdict::accept, s.pu.to_bytes()};
      auto b = std::make_shared<const BlockProposal>(BlockProposal::make(*keys_, id_, vb.encode(), sim.local_now()));
      replica_.submit(sim, b);
    } else {
      replica_.recheck(sim);
    }
  }

  Validity validate(const BlockProposal& b) {
    auto vb = VerdictBlock::decode(b.payload);
    if (!vb) return Validity::invalid;
    auto it = sessions_.find(vb->user);
    if (it == sessions_.end() || !it->second.verdict) return Validity::pending;
    const auto& s = it->second;
    if (s.pu.to_bytes() != vb->pu) return Validity::invalid;
    return (*s.verdict == Verdict::accept) == vb->accept ? Validity::valid : Validity::invalid;
  }

  void committed(sim::Simulator& sim, const BlockProposal& b) {
    auto vb = VerdictBlock::decode(b.payload);
    if (!vb) return;
    const NodeId user = first_user_ + vb->user;
    if (!vb->accept) {
      sim.send(id_, user, std::make_shared<AuthResultMsg>(false));
      return;
    }
    auto pu = g_.decode_element(vb->pu);
    sim.charge(setup_.costs.hash);
    auto token = issue_token(pu, b.timestamp, setup_.token_validity);
    registry_.record(pu, token);
    sim.send(id_, user, std::make_shared<TokenMsg>(wire::Token{token.digest, token.timestamp}));
  }

  std::uint32_t idx_;
  NodeId id_;
  const Group& g_;
  const AuthSetup& setup_;
  std::uint32_t q_, t_;
  const std::vector<NodeId>& ca_ids_;
  NodeId first_user_;
  std::shared_ptr<const consensus::KeyRegistry> keys_;
  LagrangeCache& cache_;
  PbftReplica replica_;
  std::map<std::uint32_t, Session> sessions_;
  CaRegistry registry_;
};

class UserNode {
 public:
  UserNode(std::uint32_t index, NodeId id, const Group& g, const AuthSetup& setup, std::uint32_t q, std::uint32_t t,
           const std::vector<NodeId>& ca_ids, std::uint64_t seed)
      : index_(index), id_(id), g_(g), setup_(setup), q_(q), t_(t), ca_ids_(ca_ids), rng_(seed),
        cred_(Credential::generate(g, rng_)) {
    out_.pu = cred_.pu;
  }

  void handle(sim::Simulator& sim, const sim::Delivery& d) {
    if (d.local) {
      if (dynamic_cast<const Start*>(d.payload.get())) start(sim);
      return;
    }
    if (out_.done || d.src >= ca_ids_.size()) return;
    if (!voted_.insert(d.src).second) return;
    const std::size_t need = (q_ - 1) / 3 + 1;
    if (auto tm = dynamic_cast<const TokenMsg*>(d.payload.get())) {
      auto& n = tokens_[{tm->token.digest, tm->token.timestamp}];
      if (++n >= need) {
        out_.done = true;
        out_.verdict = Verdict::accept;
        out_.latency = sim.local_now() - setup_.users[index_].start;
        out_.token = {tm->token.digest, tm->token.timestamp, setup_.token_validity};
      }
    } else if (auto rm = dynamic_cast<const AuthResultMsg*>(d.payload.get()); rm && !rm->accept) {
      if (++rejects_ >= need) {
        out_.done = true;
        out_.verdict = Verdict::reject;
        out_.latency = sim.local_now() - setup_.users[index_].start;
      }
    }
  }

  const AuthOutcome& outcome() const { return out_; }
  const Credential& credential() const { return cred_; }

 private:
  void start(sim::Simulator& sim) {
    Proof p = prove(g_, cred_, rng_);
    if (setup_.users[index_].forge) p.commitment = g_.base_mul(g_.random_scalar(rng_));
    auto bundle = share_proof(g_, p, q_, t_, rng_);
    sim.charge(setup_.costs.prove() + setup_.costs.share(q_, t_));
    std::size_t size = 0;
    for (std::uint32_t j = 0; j < q_; ++j) {
      wire::AuthRequest req{bundle.commitment, bundle.c_shares[j].index, bundle.c_shares[j].value,
                            bundle.r_shares[j].value, cred_.pu};
      if (size == 0) size = wire::encode(req).size();
      sim.send(id_, ca_ids_[j], std::make_shared<AuthRequestMsg>(index_, std::move(req), size));
    }
  }

  std::uint32_t index_;
  NodeId id_;
  const Group& g_;
  const AuthSetup& setup_;
  std::uint32_t q_, t_;
  const std::vector<NodeId>& ca_ids_;
  Rng rng_;
  Credential cred_;
  std::set<NodeId> voted_;
  std::map<std::pair<Digest, SimTime>, std::size_t> tokens_;
  std::size_t rejects_ = 0;
  AuthOutcome out_;
};

}  // namespace

AuthReport run_auth(const AuthSetup& setup) {
  const auto q = static_cast<std::uint32_t>(setup.ca.size());
  if (q == 0) throw std::invalid_argument("run_auth needs at least one CA node");
  if (setup.entry_ca >= q) throw std::out_of_range("entry CA beyond CA set");
  const std::uint32_t t = setup.threshold ? setup.threshold : quarter_threshold(q);
  if (t > q) throw std::invalid_argument("threshold exceeds CA count");
  auto g = crypto::make_group(setup.backend);

  AuthReport rep;
  rep.q = q;
  rep.t = t;

  std::vector<NodeId> ca_ids(q);
  auto keys = std::make_shared<consensus::KeyRegistry>();
  Rng key_rng(derive_seed(setup.seed, "auth-keys"));
  for (std::uint32_t i = 0; i < q; ++i) {
    ca_ids[i] = i;
    keys->generate(i, key_rng);
  }
  auto roster = std::make_shared<const consensus::ClusterRoster>(consensus::make_roster(0, ca_ids, *keys));
  consensus::PbftConfig pc = setup.pbft;
  pc.leader_offset = setup.entry_ca;
  pc.sign_cost = setup.costs.sign;
  pc.verify_cost = setup.costs.verify;

  sim::Simulator sim(setup.latency, derive_seed(setup.seed, "auth-sim"));
  sim.set_record_trace(setup.record_trace);
  LagrangeCache cache;
  std::vector<std::unique_ptr<CaNode>> cas;
  const NodeId first_user = q;
  for (std::uint32_t i = 0; i < q; ++i) {
    sim.add_node(setup.ca[i]);
    cas.push_back(std::make_unique<CaNode>(i, ca_ids[i], *g, setup, q, t, ca_ids, first_user, roster, keys, pc, cache));
    auto* c = cas.back().get();
    sim.set_handler(ca_ids[i], [c](sim::Simulator& s, const sim::Delivery& d) { c->handle(s, d); });
  }
  std::vector<std::unique_ptr<UserNode>> users;
  for (std::uint32_t u = 0; u < setup.users.size(); ++u) {
    const NodeId id = sim.add_node(setup.users[u].where);
    users.push_back(std::make_unique<UserNode>(u, id, *g, setup, q, t, ca_ids, derive_seed(setup.seed, "auth-user", {u})));
    auto* p = users.back().get();
    sim.set_handler(id, [p](sim::Simulator& s, const sim::Delivery& d) { p->handle(s, d); });
    sim.inject(id, setup.users[u].start, std::make_shared<Start>());
  }

  auto run = sim.run_until_quiescent(setup.max_time);
  rep.quiescent = run.quiescent;

  for (const auto& u : users) rep.users.push_back(u->outcome());
  std::vector<const PbftReplica*> reps;
  for (const auto& c : cas) {
    reps.push_back(&c->replica());
    rep.registries.push_back(c->registry());
  }
  rep.consensus_safe = consensus::decisions_agree(reps);
  for (std::size_t i = 1; i < rep.registries.size(); ++i)
    if (!(rep.registries[i] == rep.registries[0])) rep.registries_agree = false;
  for (std::uint32_t u = 0; u < users.size(); ++u) {
    auto first = cas[0]->verdict(u);
    for (const auto& c : cas)
      if (c->verdict(u) != first) rep.verdicts_agree = false;
  }
  for (const auto& [k, v] : sim.counts()) {
    rep.counts.emplace(k, v);
    rep.messages += v;
  }
  if (setup.record_trace) rep.trace = sim.trace();
  return rep;
}

}  // namespace iob::auth
