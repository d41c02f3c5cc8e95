#include "iob/consensus/faults.hpp"

#include <stdexcept>

namespace iob::consensus {

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::silent: return "silent";
    case Strategy::equivocate_silent: return "equivocate-silent";
    case Strategy::equivocate_consistent: return "equivocate-consistent";
    case Strategy::equivocate_both: return "equivocate-both";
    case Strategy::wrong_digest: return "wrong-digest";
    case Strategy::double_vote: return "double-vote";
  }
  return "?";
}

std::vector<Strategy> all_strategies() {
  return {Strategy::silent,        Strategy::equivocate_silent, Strategy::equivocate_consistent,
          Strategy::equivocate_both, Strategy::wrong_digest,    Strategy::double_vote};
}

std::shared_ptr<const BlockProposal> make_alt_block(const KeyRegistry& keys, NodeId self, SimTime ts) {
  const std::string body = "equivocation-from-" + std::to_string(self);
  return std::make_shared<BlockProposal>(BlockProposal::make(keys, self, Bytes(body.begin(), body.end()), ts));
}

namespace {

std::shared_ptr<PbftPayload> resigned(const PbftPayload& p, const Digest& d, const KeyRegistry& keys,
                                      std::shared_ptr<const BlockProposal> block) {
  auto q = std::make_shared<PbftPayload>();
  q->msg = p.msg;
  q->msg.digest = d;
  q->msg.sign(keys);
  q->block = std::move(block);
  return q;
}

}  // namespace

sim::Substitution make_substitution(NodeId self, std::shared_ptr<const KeyRegistry> keys, ByzantineSetup setup,
                                    std::uint64_t seed) {
  const bool equivocates = setup.strategy == Strategy::equivocate_silent ||
                           setup.strategy == Strategy::equivocate_consistent ||
                           setup.strategy == Strategy::equivocate_both;
  if (equivocates && !setup.alt_block) setup.alt_block = make_alt_block(*keys, self, 0);
  auto counter = std::make_shared<std::uint64_t>(0);

  return [self, keys, setup, seed, counter](NodeId, NodeId to, const sim::PayloadPtr& msg) -> std::vector<sim::PayloadPtr> {
    if (setup.strategy == Strategy::silent) return {};
    auto p = std::dynamic_pointer_cast<const PbftPayload>(msg);
    if (!p || p->msg.sender != self || p->msg.phase == Phase::reply) return {msg};
    const auto& m = p->msg;
    const bool vote = m.phase == Phase::prepare || m.phase == Phase::commit;

    auto random_digest = [&] {
      return crypto::Sha256().update("IOB/v1/bogus").update_u64(seed).update_u64(self).update_u64((*counter)++).finish();
    };

    switch (setup.strategy) {
      case Strategy::silent: return {};
      case Strategy::wrong_digest:
        if (vote) return {resigned(*p, random_digest(), *keys, nullptr)};
        return {msg};
      case Strategy::double_vote:
        if (vote) return {msg, resigned(*p, random_digest(), *keys, nullptr)};
        return {msg};
      default: break;
    }

    // Equivocation is confined to the first slot of view 0.
    if (m.view != 0 || m.seq != 1) return {msg};
    const auto& alt = setup.alt_block;
    const bool shown_alt = setup.alt_recipients.count(to) != 0;
    if (m.phase == Phase::pre_prepare) {
      if (shown_alt) return {resigned(*p, alt->digest, *keys, alt)};
      return {msg};
    }
    if (!vote) return {msg};
    switch (setup.strategy) {
      case Strategy::equivocate_silent: return {};
      case Strategy::equivocate_consistent:
        if (shown_alt) return {resigned(*p, alt->digest, *keys, nullptr)};
        return {msg};
      case Strategy::equivocate_both: return {msg, resigned(*p, alt->digest, *keys, nullptr)};
      default: return {msg};
    }
  };
}

}  // namespace iob::consensus
