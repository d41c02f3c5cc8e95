#pragma once

// Byzantine replica behaviours, expressed as outbound substitutions on the
// simulator. A faulty node runs the honest replica code; its traffic is then
// rewritten here before it reaches the network.

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "iob/consensus/messages.hpp"

namespace iob::consensus {

enum class Strategy {
  silent,                 // drops everything it would send
  equivocate_silent,      // as primary: proposal B to some peers; casts no votes on slot 1
  equivocate_consistent,  // votes for whichever proposal the recipient was shown
  equivocate_both,        // votes for both proposals to everyone
  wrong_digest,           // every vote names a random digest
  double_vote,            // honest vote plus a random-digest vote
};

const char* to_string(Strategy s);
std::vector<Strategy> all_strategies();

struct ByzantineSetup {
  Strategy strategy = Strategy::silent;
  std::set<NodeId> alt_recipients;               // who sees proposal B
  std::shared_ptr<const BlockProposal> alt_block;  // signed by the faulty node itself
};

/// Second proposal a faulty primary shows to `alt_recipients`.
std::shared_ptr<const BlockProposal> make_alt_block(const KeyRegistry& keys, NodeId self, SimTime ts);

sim::Substitution make_substitution(NodeId self, std::shared_ptr<const KeyRegistry> keys, ByzantineSetup setup,
                                    std::uint64_t seed);

}  // namespace iob::consensus
