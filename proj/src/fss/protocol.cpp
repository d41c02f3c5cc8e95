#include "iob/fss/protocol.hpp"

#include <stdexcept>

#include "iob/crypto/shamir.hpp"

namespace iob::fss {

namespace {

struct Frame final : sim::Payload {
  Frame(std::string_view k, Bytes b, std::size_t extra = 0) : label(k), bytes(std::move(b)), extra_bytes(extra) {}
  std::string_view label;
  Bytes bytes;
  std::size_t extra_bytes;  // item payload riding on an accepting result
  std::string_view kind() const override { return label; }
  std::size_t wire_size() const override { return bytes.size() + extra_bytes; }
};

struct Verifier {
  std::uint32_t server = 0;
  std::optional<wire::AccessRequest> request;
  std::vector<std::optional<GroupElement>> taus;
  std::vector<std::pair<std::uint32_t, GroupElement>> arrivals;
  std::optional<AccessVerdict> verdict;
};

}  // namespace

AccessReport run_access(const AccessSetup& setup) {
  const auto s = static_cast<std::uint32_t>(setup.verifiers.size());
  if (s < 2) throw std::invalid_argument("access check needs at least two verifiers");
  if (setup.N == 0 || setup.category == 0 || setup.category > setup.N)
    throw std::invalid_argument("category must lie in [1, N]");
  if (setup.threshold > s) throw std::invalid_argument("threshold exceeds verifier count");
  if (setup.wrong_key && setup.N < 2) throw std::invalid_argument("wrong_key needs N >= 2");
  const bool shamir = setup.threshold > 0;
  const std::uint32_t need = shamir ? setup.threshold : s;

  auto group = crypto::make_group(setup.backend);
  const Group& g = *group;
  const auto& costs = setup.costs;

  Rng key_rng(derive_seed(setup.key_seed, "access-ceremony"));
  KeyCeremony ceremony(g, setup.N, key_rng, default_labels(setup.N));
  const AccessControlList& acl = ceremony.acl();
  const std::uint32_t proof_category = setup.wrong_key ? setup.category % setup.N + 1 : setup.category;
  const AccessKey key = ceremony.issue(proof_category);

  AccessReport rep;
  rep.keygen_time = costs.keygen(setup.N);

  sim::Simulator sim(setup.latency, setup.seed);
  sim.set_record_trace(setup.record_trace);
  std::vector<Verifier> vs(s);
  for (std::uint32_t j = 0; j < s; ++j) {
    vs[j].server = j + 1;
    vs[j].taus.assign(s, std::nullopt);
    sim.add_node(setup.verifiers[j]);
  }
  const sim::NodeId user = sim.add_node(setup.user);
  constexpr std::uint64_t kRequestId = 1;

  auto decide = [&](sim::Simulator& sm, std::uint32_t j) {
    auto& v = vs[j];
    if (v.verdict) return;
    if (v.arrivals.size() < need) return;
    if (shamir) {
      sm.charge(costs.lagrange(need) + static_cast<SimTime>(need) * (costs.scalar_mul + costs.combine));
      v.verdict = check_access_threshold(g, v.arrivals, need);
    } else {
      sm.charge(costs.check_access(s));
      v.verdict = check_access(g, std::span<const std::optional<GroupElement>>(v.taus));
    }
    if (j == 0) {
      const bool ok = *v.verdict == AccessVerdict::accept;
      Bytes body = wire::encode(wire::AccessResult{kRequestId, ok});
      sm.send(0, user, std::make_shared<Frame>("ACCESS_RESULT", std::move(body), ok ? setup.item_size : 0));
    }
  };

  auto record_tau = [&](std::uint32_t j, std::uint32_t server, const GroupElement& tau) {
    auto& v = vs[j];
    if (server == 0 || server > s || v.taus[server - 1]) return;
    v.taus[server - 1] = tau;
    v.arrivals.emplace_back(server, tau);
  };

  for (std::uint32_t j = 0; j < s; ++j) {
    sim.set_handler(j, [&, j](sim::Simulator& sm, const sim::Delivery& d) {
      auto* f = dynamic_cast<const Frame*>(d.payload.get());
      if (!f) return;
      auto& v = vs[j];
      if (f->label == "ACCESS_REQUEST") {
        if (v.request) return;
        v.request = wire::decode_request(g, f->bytes);
        sm.charge(costs.local_verify(setup.N));
        DpfKey k{v.request->server, v.request->key};
        const GroupElement tau = local_verify(g, acl, k, v.request->proof_share);
        record_tau(j, v.server, tau);
        Bytes frame = wire::encode(wire::TauShare{kRequestId, v.server, tau});
        for (std::uint32_t o = 0; o < s; ++o)
          if (o != j) sm.send(j, o, std::make_shared<Frame>("TAU_SHARE", frame));
        decide(sm, j);
      } else if (f->label == "TAU_SHARE") {
        auto t = wire::decode_tau(g, f->bytes);
        record_tau(j, t.server, t.tau);
        decide(sm, j);
      }
    });
  }

  struct Start final : sim::Payload {
    std::string_view kind() const override { return "ACCESS_START"; }
    std::size_t wire_size() const override { return 0; }
  };
  Rng share_rng(derive_seed(setup.key_seed, "access-share"));
  sim.set_handler(user, [&](sim::Simulator& sm, const sim::Delivery& d) {
    if (d.local) {
      const PointFunction p{setup.N, setup.category, g.from_u64(1)};
      const Scalar pi = make_proof(g, key);
      std::vector<DpfKey> keys;
      std::vector<Scalar> pis(s);
      if (shamir) {
        keys = dpf_gen_threshold(g, p, s, setup.threshold, share_rng);
        auto sh = crypto::shamir_split(g, pi, s, setup.threshold, share_rng);
        for (std::uint32_t j = 0; j < s; ++j) pis[j] = sh[j].value;
        sm.charge(costs.share(s, setup.threshold) * static_cast<SimTime>(setup.N + 1) / 2);
      } else {
        keys = dpf_gen(g, p, s, share_rng);
        pis = crypto::additive_split(g, pi, s, share_rng);
        sm.charge(costs.dpf_gen(setup.N, s) + static_cast<SimTime>(s) * costs.scalar_op);
      }
      for (std::uint32_t j = 0; j < s; ++j) {
        Bytes frame = wire::encode(wire::AccessRequest{kRequestId, keys[j].server, keys[j].share, pis[j]});
        sm.send(user, j, std::make_shared<Frame>("ACCESS_REQUEST", std::move(frame)));
      }
      return;
    }
    auto* f = dynamic_cast<const Frame*>(d.payload.get());
    if (!f || f->label != "ACCESS_RESULT" || rep.done) return;
    auto r = wire::decode_result(f->bytes);
    rep.done = true;
    rep.verdict = r.accept ? AccessVerdict::accept : AccessVerdict::reject;
    rep.round_time = sm.now();
    rep.result_size = f->wire_size();
  });
  sim.inject(user, 0, std::make_shared<Start>());
  sim.run_until_quiescent();

  for (const auto& v : vs)
    if (!v.verdict || *v.verdict != *vs[0].verdict) rep.verifiers_agree = false;
  if (rep.done) rep.overhead = rep.keygen_time + rep.round_time;
  for (const auto& [k, c] : sim.counts()) {
    rep.counts.emplace(k, c);
    rep.messages += c;
  }
  if (setup.record_trace) rep.trace = sim.trace();
  return rep;
}

}  // namespace iob::fss
