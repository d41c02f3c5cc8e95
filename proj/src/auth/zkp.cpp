#include "iob/auth/zkp.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace iob::auth {

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::accept: return "accept";
    case Verdict::reject: return "reject";
    case Verdict::indeterminate: return "indeterminate";
  }
  return "?";
}

const char* to_string(XDomainResult r) {
  switch (r) {
    case XDomainResult::accept: return "accept";
    case XDomainResult::reject: return "reject";
    case XDomainResult::reauth_required: return "reauth_required";
  }
  return "?";
}

Credential Credential::generate(const Group& g, Rng& rng) {
  return from_private(g, g.random_scalar(rng));
}

Credential Credential::from_private(const Group& g, const Scalar& pr) {
  if (pr.is_zero()) throw std::invalid_argument("private key must be in [1, n-1]");
  return {pr, g.base_mul(pr)};
}

Scalar derive_challenge(const Group& g, const GroupElement& commitment, const GroupElement& pu) {
  Bytes transcript;
  for (auto part : {g.generator().encoding(), commitment.encoding(), pu.encoding()})
    transcript.insert(transcript.end(), part.begin(), part.end());
  return g.hash_to_scalar(transcript);
}

namespace testing {
Proof prove_with(const Group& g, const Credential& cred, const Scalar& nonce,
                 std::optional<Scalar> injected_challenge) {
  Proof p;
  p.commitment = g.base_mul(nonce);
  p.challenge = injected_challenge ? *injected_challenge : derive_challenge(g, p.commitment, cred.pu);
  p.response = g.sub(nonce, g.mul(cred.pr, p.challenge));
  return p;
}
}  // namespace testing

Proof prove(const Group& g, const Credential& cred, Rng& rng) {
  return testing::prove_with(g, cred, g.random_scalar(rng));
}

bool verify_proof(const Group& g, const GroupElement& pu, const GroupElement& commitment,
                  const Scalar& c, const Scalar& r) {
  if (c != derive_challenge(g, commitment, pu)) return false;
  GroupElement kappa = g.combine(g.base_mul(r), g.scalar_mul(pu, c));
  return kappa == commitment;
}

ProofBundle share_proof(const Group& g, const Proof& proof, std::uint32_t q, std::uint32_t t,
                        Rng& rng) {
  if (t == 0 || t > q) throw std::invalid_argument("share_proof requires 1 <= t <= q");
  ProofBundle b;
  b.commitment = proof.commitment;
  b.c_shares = crypto::shamir_split(g, proof.challenge, q, t, rng);
  b.r_shares = crypto::shamir_split(g, proof.response, q, t, rng);
  b.share_count = q;
  b.threshold = t;
  return b;
}

namespace {
std::vector<Share> usable(std::span<const Share> in, std::uint32_t q, std::uint32_t t) {
  std::vector<Share> out;
  std::set<std::uint32_t> seen;
  for (const auto& s : in) {
    if (s.index == 0 || s.index > q || !seen.insert(s.index).second) continue;
    out.push_back(s);
    if (out.size() == t) break;
  }
  return out;
}
}  // namespace

Verdict ca_verify(const Group& g, const GroupElement& commitment, const GroupElement& pu,
                  std::span<const Share> c_shares, std::span<const Share> r_shares,
                  std::uint32_t share_count, std::uint32_t threshold) {
  if (threshold == 0 || threshold > share_count) return Verdict::indeterminate;
  auto cs = usable(c_shares, share_count, threshold);
  auto rs = usable(r_shares, share_count, threshold);
  if (cs.size() < threshold || rs.size() < threshold) return Verdict::indeterminate;
  Scalar c = crypto::shamir_reconstruct(g, cs);
  Scalar r = crypto::shamir_reconstruct(g, rs);
  return verify_proof(g, pu, commitment, c, r) ? Verdict::accept : Verdict::reject;
}

std::uint32_t quarter_threshold(std::uint32_t q) { return std::max<std::uint32_t>(1, (q + 3) / 4); }

Digest token_digest(const GroupElement& pu, SimTime timestamp) {
  return crypto::Sha256()
      .update(std::string_view("IOB/v1/session-token"))
      .update(pu.encoding())
      .update_u64(static_cast<std::uint64_t>(timestamp))
      .finish();
}

SessionToken issue_token(const GroupElement& pu, SimTime now, SimTime validity_window) {
  return {token_digest(pu, now), now, validity_window};
}

void CaRegistry::record(const GroupElement& pu, const SessionToken& token) {
  entries_[pu.to_bytes()] = {token.digest, token.timestamp, token.validity_window};
}

const CaRegistry::Entry* CaRegistry::find(const GroupElement& pu) const {
  auto it = entries_.find(pu.to_bytes());
  return it == entries_.end() ? nullptr : &it->second;
}

XDomainResult cross_domain_verify(const SessionToken& token, const GroupElement& pu,
                                  const CaRegistry& registry, SimTime now) {
  const auto* e = registry.find(pu);
  if (e == nullptr) return XDomainResult::reauth_required;
  if (e->digest != token.digest) return XDomainResult::reject;
  if (now > e->timestamp + e->validity_window) return XDomainResult::reauth_required;
  return XDomainResult::accept;
}

}  // namespace iob::auth
