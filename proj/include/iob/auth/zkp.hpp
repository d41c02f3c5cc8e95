#pragma once

// Non-interactive Schnorr identity proof whose challenge and response are
// Shamir-shared across CA nodes, plus the session-token bookkeeping used
// for cross-domain re-authentication.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "iob/crypto/group.hpp"
#include "iob/crypto/hash.hpp"
#include "iob/crypto/shamir.hpp"
#include "iob/util/time.hpp"

namespace iob::auth {

using crypto::Digest;
using crypto::Group;
using crypto::GroupElement;
using crypto::Scalar;
using crypto::Share;

struct Credential {
  Scalar pr;         // private key, never leaves the user
  GroupElement pu;   // pu = G x [pr]

  static Credential generate(const Group& g, Rng& rng);
  /// Throws std::invalid_argument if pr is zero.
  static Credential from_private(const Group& g, const Scalar& pr);
};

struct Proof {
  GroupElement commitment;  // V = G x [v]
  Scalar challenge;         // c = H(G || V || pu)
  Scalar response;          // r = v - pr * c
};

struct ProofBundle {
  GroupElement commitment;
  std::vector<Share> c_shares;
  std::vector<Share> r_shares;
  std::uint32_t share_count = 0;  // q
  std::uint32_t threshold = 0;    // t
};

enum class Verdict { accept, reject, indeterminate };
enum class XDomainResult { accept, reject, reauth_required };

const char* to_string(Verdict v);
const char* to_string(XDomainResult r);

/// c = hash_to_scalar(enc(G) || enc(V) || enc(pu)).
Scalar derive_challenge(const Group& g, const GroupElement& commitment, const GroupElement& pu);

Proof prove(const Group& g, const Credential& cred, Rng& rng);

/// Test-mode hooks for deterministic worked examples. Production code
/// always goes through prove().
namespace testing {
Proof prove_with(const Group& g, const Credential& cred, const Scalar& nonce,
                 std::optional<Scalar> injected_challenge = std::nullopt);
}

/// Checks r*G + c*pu == V and c == H(G || V || pu) on already-reconstructed values.
bool verify_proof(const Group& g, const GroupElement& pu, const GroupElement& commitment,
                  const Scalar& c, const Scalar& r);

/// Shamir-shares c and r into q slices with reconstruction threshold t.
/// Throws std::invalid_argument for t == 0 or t > q.
ProofBundle share_proof(const Group& g, const Proof& proof, std::uint32_t q, std::uint32_t t,
                        Rng& rng);

/// Reconstructs c and r from the collected slices and verifies. Shares with
/// indices outside [1, q] or duplicated indices are excluded; fewer than t
/// usable shares of either kind gives indeterminate.
Verdict ca_verify(const Group& g, const GroupElement& commitment, const GroupElement& pu,
                  std::span<const Share> c_shares, std::span<const Share> r_shares,
                  std::uint32_t share_count, std::uint32_t threshold);

inline Verdict ca_verify(const Group& g, const ProofBundle& bundle, const GroupElement& pu) {
  return ca_verify(g, bundle.commitment, pu, bundle.c_shares, bundle.r_shares,
                   bundle.share_count, bundle.threshold);
}

/// ceil(q / 4), at least 1.
std::uint32_t quarter_threshold(std::uint32_t q);

// ------------------------------------------------------------------ tokens

inline constexpr SimTime kDefaultTokenValidity = 24 * 3600 * kNanosPerSecond;

struct SessionToken {
  Digest digest{};
  SimTime timestamp = 0;
  SimTime validity_window = kDefaultTokenValidity;
  friend bool operator==(const SessionToken&, const SessionToken&) = default;
};

/// H(publickey || timestamp): SHA-256 over a tag, enc(pu) and the big-endian
/// timestamp.
Digest token_digest(const GroupElement& pu, SimTime timestamp);

SessionToken issue_token(const GroupElement& pu, SimTime now,
                         SimTime validity_window = kDefaultTokenValidity);

/// Identities verified by CA consensus, keyed by public-key encoding.
class CaRegistry {
 public:
  struct Entry {
    Digest digest{};
    SimTime timestamp = 0;
    SimTime validity_window = 0;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  /// Called only on the commit path of the CA verdict consensus.
  void record(const GroupElement& pu, const SessionToken& token);
  const Entry* find(const GroupElement& pu) const;
  std::size_t size() const { return entries_.size(); }
  friend bool operator==(const CaRegistry&, const CaRegistry&) = default;

 private:
  std::map<Bytes, Entry> entries_;
};

/// accept: known pu, matching digest, unexpired. reject: digest mismatch.
/// reauth_required: unknown pu or expired entry. Never mutates the registry.
XDomainResult cross_domain_verify(const SessionToken& token, const GroupElement& pu,
                                  const CaRegistry& registry, SimTime now);

}  // namespace iob::auth
