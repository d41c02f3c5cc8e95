#include "iob/consensus/messages.hpp"

#include <algorithm>
#include <stdexcept>

namespace iob::consensus {

void KeyRegistry::generate(NodeId id, Rng& rng) {
  Bytes s(32);
  for (std::size_t i = 0; i < s.size(); i += 8) {
    auto v = rng();
    for (std::size_t k = 0; k < 8; ++k) s[i + k] = static_cast<std::uint8_t>(v >> (8 * k));
  }
  secrets_[id] = std::move(s);
}

void KeyRegistry::set_secret(NodeId id, Bytes secret) {
  if (secret.empty()) throw std::invalid_argument("empty signing secret");
  secrets_[id] = std::move(secret);
}

Digest KeyRegistry::public_key(NodeId id) const {
  auto it = secrets_.find(id);
  if (it == secrets_.end()) throw std::out_of_range("no key registered for node " + std::to_string(id));
  return crypto::Sha256().update("IOB/v1/pubkey").update(it->second).finish();
}

Digest KeyRegistry::sign(NodeId signer, std::span<const std::uint8_t> msg) const {
  auto it = secrets_.find(signer);
  if (it == secrets_.end()) throw std::out_of_range("no key registered for node " + std::to_string(signer));
  return crypto::hmac_sha256(it->second, msg);
}

bool KeyRegistry::verify(NodeId signer, std::span<const std::uint8_t> msg, const Digest& sig) const {
  auto it = secrets_.find(signer);
  if (it == secrets_.end()) return false;
  auto expect = crypto::hmac_sha256(it->second, msg);
  return sodium_memcmp(expect.data(), sig.data(), sig.size()) == 0;
}

// ------------------------------------------------------------- proposals

Digest BlockProposal::compute_digest(std::span<const std::uint8_t> payload, SimTime timestamp,
                                     const Digest& client_pubkey) {
  return crypto::Sha256()
      .update("IOB/v1/block")
      .update_u64(payload.size())
      .update(payload)
      .update_u64(static_cast<std::uint64_t>(timestamp))
      .update(client_pubkey)
      .finish();
}

BlockProposal BlockProposal::make(const KeyRegistry& keys, NodeId client, Bytes payload, SimTime timestamp) {
  BlockProposal b;
  b.payload = std::move(payload);
  b.client = client;
  b.client_pubkey = keys.public_key(client);
  b.timestamp = timestamp;
  b.digest = compute_digest(b.payload, b.timestamp, b.client_pubkey);
  b.client_signature = keys.sign(client, b.digest);
  return b;
}

bool BlockProposal::valid(const KeyRegistry& keys) const {
  if (!keys.has(client) || keys.public_key(client) != client_pubkey) return false;
  if (compute_digest(payload, timestamp, client_pubkey) != digest) return false;
  return keys.verify(client, digest, client_signature);
}

Bytes BlockProposal::encode() const {
  ByteWriter b;
  b.u32(0);
  b.u32(client);
  b.raw(client_pubkey);
  b.u64(static_cast<std::uint64_t>(timestamp));
  b.raw(client_signature);
  b.raw(digest);
  b.u32(static_cast<std::uint32_t>(payload.size()));
  b.raw(payload);
  Bytes out = std::move(b).take();
  const auto len = static_cast<std::uint32_t>(out.size() - 4);
  for (int i = 0; i < 4; ++i) out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(len >> (24 - 8 * i));
  return out;
}

BlockProposal BlockProposal::decode(std::span<const std::uint8_t> frame) {
  ByteReader r(frame);
  if (r.u32() != r.remaining()) throw DecodeError("block length mismatch");
  BlockProposal b;
  b.client = r.u32();
  b.client_pubkey = r.fixed<32>();
  b.timestamp = static_cast<SimTime>(r.u64());
  b.client_signature = r.fixed<32>();
  b.digest = r.fixed<32>();
  auto n = r.u32();
  auto p = r.raw(n);
  b.payload.assign(p.begin(), p.end());
  r.expect_done();
  return b;
}

const Digest& null_digest() {
  static const Digest d = crypto::Sha256().update("IOB/v1/null-request").finish();
  return d;
}

// ------------------------------------------------------------- pbft messages

const char* to_string(Phase p) {
  switch (p) {
    case Phase::pre_prepare: return "PRE_PREPARE";
    case Phase::prepare: return "PREPARE";
    case Phase::commit: return "COMMIT";
    case Phase::reply: return "REPLY";
  }
  return "?";
}

Bytes PbftMessage::signing_bytes() const {
  ByteWriter w;
  w.raw("IOB/v1/pbft");
  w.u8(static_cast<std::uint8_t>(phase));
  w.u64(view);
  w.u64(seq);
  w.raw(digest);
  w.u32(sender);
  return std::move(w).take();
}

void PbftMessage::sign(const KeyRegistry& keys) { signature = keys.sign(sender, signing_bytes()); }

bool PbftMessage::verify(const KeyRegistry& keys) const {
  return keys.verify(sender, signing_bytes(), signature);
}

Bytes PbftMessage::encode() const {
  ByteWriter w;
  w.u32(1 + 8 + 8 + 32 + 4 + 2 + 32);
  w.u8(static_cast<std::uint8_t>(phase));
  w.u64(view);
  w.u64(seq);
  w.raw(digest);
  w.u32(sender);
  w.field(signature);
  return std::move(w).take();
}

PbftMessage PbftMessage::decode(std::span<const std::uint8_t> frame) {
  ByteReader r(frame);
  if (r.u32() != r.remaining()) throw DecodeError("pbft length mismatch");
  PbftMessage m;
  auto ph = r.u8();
  if (ph < 1 || ph > 4) throw DecodeError("unknown pbft phase");
  m.phase = static_cast<Phase>(ph);
  m.view = r.u64();
  m.seq = r.u64();
  m.digest = r.fixed<32>();
  m.sender = r.u32();
  auto sig = r.field();
  if (sig.size() != 32) throw DecodeError("pbft signature must be 32 bytes");
  std::copy(sig.begin(), sig.end(), m.signature.begin());
  r.expect_done();
  return m;
}

// ------------------------------------------------------------- roster

ClusterRoster::ClusterRoster(int cluster_id, std::vector<RosterEntry> members, std::uint64_t version)
    : cluster_id_(cluster_id), members_(std::move(members)), version_(version) {
  for (std::size_t i = 0; i < members_.size(); ++i)
    if (!index_.emplace(members_[i].id, i).second) throw std::invalid_argument("duplicate roster member");
}

std::optional<std::size_t> ClusterRoster::index_of(NodeId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Digest ClusterRoster::digest() const {
  crypto::Sha256 h;
  h.update("IOB/v1/roster").update_u32(static_cast<std::uint32_t>(cluster_id_)).update_u64(version_);
  for (const auto& m : members_) {
    h.update_u32(m.id).update(m.public_key).update_u32(static_cast<std::uint32_t>(m.address.size()));
    h.update(m.address);
    h.update_u32(static_cast<std::uint32_t>(m.status)).update_u32(static_cast<std::uint32_t>(m.role));
  }
  return h.finish();
}

void ClusterRoster::set_status(NodeId id, NodeStatus s) {
  auto i = index_of(id);
  if (!i) throw std::out_of_range("node not in roster");
  members_[*i].status = s;
}

ClusterRoster make_roster(int cluster_id, std::span<const NodeId> ids, const KeyRegistry& keys,
                          std::span<const cluster::Role> roles) {
  if (!roles.empty() && roles.size() != ids.size()) throw std::invalid_argument("roles size mismatch");
  std::vector<RosterEntry> m;
  m.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    RosterEntry e;
    e.id = ids[i];
    e.public_key = keys.public_key(ids[i]);
    e.address = "10." + std::to_string((ids[i] >> 16) & 0xFF) + "." + std::to_string((ids[i] >> 8) & 0xFF) +
                "." + std::to_string(ids[i] & 0xFF);
    e.role = roles.empty() ? cluster::Role::secondary : roles[i];
    m.push_back(std::move(e));
  }
  return ClusterRoster(cluster_id, std::move(m));
}

// ------------------------------------------------------------- payload sizes

namespace {
constexpr std::size_t kPbftWire = 4 + 1 + 8 + 8 + 32 + 4 + 2 + 32;
std::size_t block_wire(const BlockProposal& b) { return 4 + 4 + 32 + 8 + 32 + 32 + 4 + b.payload.size(); }
}  // namespace

std::string_view PbftPayload::kind() const {
  switch (msg.phase) {
    case Phase::pre_prepare: return "PRE_PREPARE";
    case Phase::prepare: return "PREPARE";
    case Phase::commit: return "COMMIT";
    case Phase::reply: return "REPLY";
  }
  return "PBFT";
}

std::size_t PbftPayload::wire_size() const { return kPbftWire + (block ? block_wire(*block) : 0); }

std::size_t RequestPayload::wire_size() const { return 4 + block_wire(*block); }

std::size_t BlockPayload::wire_size() const { return 4 + block_wire(*block); }

Bytes ViewChange::signing_bytes() const {
  ByteWriter w;
  w.raw("IOB/v1/view-change");
  w.u64(new_view);
  w.u32(sender);
  w.u64(last_executed);
  w.u32(static_cast<std::uint32_t>(prepared.size()));
  for (const auto& p : prepared) {
    w.u64(p.seq);
    w.u64(p.view);
    w.raw(p.digest);
    w.u32(static_cast<std::uint32_t>(p.cert.size()));
    for (const auto& c : p.cert) {
      w.u32(c.sender);
      w.raw(c.signature);
    }
  }
  w.u32(static_cast<std::uint32_t>(pending.size()));
  for (const auto& b : pending) w.raw(b->digest);
  return std::move(w).take();
}

std::size_t ViewChange::wire_size() const {
  std::size_t s = 4 + 8 + 4 + 8 + 4 + 4 + 34;
  for (const auto& p : prepared) s += 8 + 8 + 32 + 4 + 36 * p.cert.size() + (p.block ? block_wire(*p.block) : 0);
  for (const auto& b : pending) s += block_wire(*b);
  return s;
}

Bytes NewView::signing_bytes() const {
  ByteWriter w;
  w.raw("IOB/v1/new-view");
  w.u64(view);
  w.u32(sender);
  w.u32(static_cast<std::uint32_t>(proofs.size()));
  for (const auto& vc : proofs) {
    w.u32(vc->sender);
    w.raw(vc->signature);
  }
  w.u32(static_cast<std::uint32_t>(plan.size()));
  for (const auto& e : plan) {
    w.u64(e.seq);
    w.raw(e.digest);
  }
  return std::move(w).take();
}

std::size_t NewView::wire_size() const {
  std::size_t s = 4 + 8 + 4 + 4 + 4 + 34;
  for (const auto& vc : proofs) s += vc->wire_size();
  for (const auto& e : plan) s += 8 + 32 + (e.block ? block_wire(*e.block) : 0);
  return s;
}

}  // namespace iob::consensus
