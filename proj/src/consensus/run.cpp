#include "iob/consensus/run.hpp"

#include <stdexcept>

namespace iob::consensus {

bool decisions_agree(const std::vector<const PbftReplica*>& honest) {
  std::map<std::uint64_t, Digest> seen;
  for (const auto* r : honest) {
    if (r->conflict()) return false;
    for (const auto& [seq, d] : r->decided()) {
      auto [it, fresh] = seen.emplace(seq, d.digest);
      if (!fresh && it->second != d.digest) return false;
    }
  }
  return true;
}

RoundReport run_pbft(const RoundSetup& setup) {
  const std::size_t n = setup.replicas.size();
  if (n == 0) throw std::invalid_argument("run_pbft needs at least one replica");
  RoundReport rep;
  rep.n = n;

  auto keys = std::make_shared<KeyRegistry>();
  Rng key_rng(derive_seed(setup.seed, "pbft-keys"));
  std::vector<NodeId> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = static_cast<NodeId>(i);
    keys->generate(ids[i], key_rng);
  }
  const auto client_id = static_cast<NodeId>(n);
  keys->generate(client_id, key_rng);
  auto roster = std::make_shared<const ClusterRoster>(make_roster(0, ids, *keys));

  sim::FaultModel fm;
  for (const auto& [idx, f] : setup.faults) {
    if (idx >= n) throw std::out_of_range("fault index beyond roster");
    if (f.kind == FaultSpec::Kind::crash) {
      fm.crash(ids[idx], f.crash_at);
    } else {
      ByzantineSetup b;
      b.strategy = f.strategy;
      for (auto a : f.alt_recipients) b.alt_recipients.insert(ids.at(a));
      fm.byzantine(ids[idx], to_string(f.strategy),
                   make_substitution(ids[idx], keys, b, derive_seed(setup.seed, "byz", {idx})));
    }
  }

  sim::Simulator sim(setup.latency, derive_seed(setup.seed, "pbft-sim"), std::move(fm));
  sim.set_record_trace(setup.record_trace);

  PbftConfig pc = setup.pbft;
  pc.leader_offset = setup.leader_offset;
  std::vector<std::unique_ptr<PbftReplica>> reps;
  for (std::size_t i = 0; i < n; ++i) {
    sim.add_node(setup.replicas[i]);
    reps.push_back(std::make_unique<PbftReplica>(ids[i], roster, keys, pc));
    auto* r = reps.back().get();
    sim.set_handler(ids[i], [r](sim::Simulator& s, const sim::Delivery& d) { r->handle(s, d); });
  }
  ClientConfig cc = setup.client_cfg;
  cc.leader_offset = setup.leader_offset;
  PbftClient client(client_id, roster, keys, cc);
  sim.add_node(setup.client);

  std::vector<std::shared_ptr<const BlockProposal>> blocks;
  for (std::size_t k = 0; k < setup.requests; ++k) {
    Bytes payload(setup.payload_size);
    Rng prng(derive_seed(setup.seed, "payload", {k}));
    for (auto& b : payload) b = static_cast<std::uint8_t>(prng());
    const SimTime at = static_cast<SimTime>(k) * setup.request_gap;
    blocks.push_back(std::make_shared<BlockProposal>(BlockProposal::make(*keys, client_id, payload, at)));
  }
  struct Submit final : sim::Payload {
    explicit Submit(std::size_t i) : index(i) {}
    std::string_view kind() const override { return "SUBMIT"; }
    std::size_t wire_size() const override { return 0; }
    std::size_t index;
  };
  sim.set_handler(client_id, [&](sim::Simulator& s, const sim::Delivery& d) {
    if (d.local) {
      if (auto sub = dynamic_cast<const Submit*>(d.payload.get())) {
        client.submit(s, blocks[sub->index]);
        return;
      }
    }
    client.handle(s, d);
  });
  for (std::size_t k = 0; k < blocks.size(); ++k)
    sim.inject(client_id, blocks[k]->timestamp, std::make_shared<Submit>(k));

  auto run = sim.run_until_quiescent(setup.max_time);
  rep.quiescent = run.quiescent;

  rep.client_done = true;
  for (const auto& b : blocks) {
    auto t = client.completion(b->digest);
    if (!t) {
      rep.client_done = false;
      rep.client_latency.push_back(-1);
    } else {
      rep.client_latency.push_back(*t - b->timestamp);
    }
  }

  std::vector<const PbftReplica*> honest;
  rep.honest.assign(n, true);
  for (std::size_t i = 0; i < n; ++i) {
    if (sim.faults().is_faulty(ids[i])) rep.honest[i] = false;
    else honest.push_back(reps[i].get());
    rep.chains.push_back(reps[i]->chain());
  }
  rep.safe = decisions_agree(honest);
  rep.all_executed = true;
  for (const auto* r : honest) {
    rep.max_view = std::max(rep.max_view, r->view());
    for (const auto& b : blocks) {
      bool found = false;
      for (const auto& e : r->chain()) {
        if (e.digest == b->digest) {
          found = true;
          rep.last_commit = std::max(rep.last_commit, e.commit_time);
        }
      }
      if (!found) rep.all_executed = false;
    }
  }
  for (std::size_t i = 1; i < honest.size(); ++i) {
    const auto& a = honest[0]->chain();
    const auto& b = honest[i]->chain();
    bool eq = a.size() == b.size();
    for (std::size_t k = 0; eq && k < a.size(); ++k)
      eq = a[k].seq == b[k].seq && a[k].digest == b[k].digest;
    if (!eq) rep.chains_equal = false;
  }
  for (const auto& [k, v] : sim.counts()) rep.counts.emplace(k, v);
  rep.protocol_messages = sim.count("PRE_PREPARE") + sim.count("PREPARE") + sim.count("COMMIT") + sim.count("REPLY");
  if (setup.record_trace) rep.trace = sim.trace();
  return rep;
}

}  // namespace iob::consensus
