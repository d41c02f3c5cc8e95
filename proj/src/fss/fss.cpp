#include "iob/fss/fss.hpp"

#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>

namespace iob::fss {

namespace {

void check_point(const PointFunction& p) {
  if (p.N == 0) throw std::invalid_argument("domain size must be at least 1");
  if (p.i < 1 || p.i > p.N) throw std::invalid_argument("point index outside [1, N]");
}

}  // namespace

std::vector<DpfKey> dpf_gen(const Group& g, const PointFunction& p, std::uint32_t s, Rng& rng, bool test_mode) {
  check_point(p);
  if (s == 0 || (s == 1 && !test_mode)) throw std::invalid_argument("need at least 2 servers");
  std::vector<std::vector<Scalar>> masks(s - 1, std::vector<Scalar>(p.N));
  for (auto& m : masks)
    for (auto& x : m) x = g.random_any(rng);
  return dpf_gen_masked(g, p, masks);
}

std::vector<DpfKey> dpf_gen_masked(const Group& g, const PointFunction& p,
                                   std::span<const std::vector<Scalar>> masks) {
  check_point(p);
  std::vector<DpfKey> keys;
  std::vector<Scalar> last(p.N);
  for (std::uint32_t x = 1; x <= p.N; ++x) last[x - 1] = p.at(x);
  std::uint32_t j = 1;
  for (const auto& m : masks) {
    if (m.size() != p.N) throw std::invalid_argument("mask length differs from N");
    for (std::uint32_t x = 0; x < p.N; ++x) last[x] = g.sub(last[x], m[x]);
    keys.push_back({j++, m});
  }
  keys.push_back({j, std::move(last)});
  return keys;
}

std::vector<DpfKey> dpf_gen_threshold(const Group& g, const PointFunction& p, std::uint32_t s, std::uint32_t t,
                                      Rng& rng) {
  check_point(p);
  std::vector<DpfKey> keys(s);
  for (std::uint32_t j = 0; j < s; ++j) {
    keys[j].server = j + 1;
    keys[j].share.resize(p.N);
  }
  for (std::uint32_t x = 1; x <= p.N; ++x) {
    auto sh = crypto::shamir_split(g, p.at(x), s, t, rng);
    for (std::uint32_t j = 0; j < s; ++j) keys[j].share[x - 1] = sh[j].value;
  }
  return keys;
}

Scalar dpf_eval(const DpfKey& key, std::uint32_t x) {
  if (x < 1 || x > key.share.size()) throw std::out_of_range("dpf_eval: x outside [1, N]");
  return key.share[x - 1];
}

std::vector<std::string> default_labels(std::uint32_t N) {
  static const char* named[] = {"Sports", "Driving", "Going Home"};
  std::vector<std::string> out;
  for (std::uint32_t i = 0; i < N; ++i) out.push_back(i < 3 ? named[i] : "category-" + std::to_string(i + 1));
  return out;
}

KeyCeremony::KeyCeremony(const Group& g, std::uint32_t N, Rng& rng, std::vector<std::string> labels) {
  if (N == 0) throw std::invalid_argument("need at least one category");
  if (!g.order_exceeds(N)) throw std::invalid_argument("more categories than distinct nonzero scalars");
  std::set<Scalar> used;
  while (secrets_.size() < N) {
    auto d = g.random_scalar(rng);
    if (used.insert(d).second) secrets_.push_back(d);
  }
  publish(g, std::move(labels));
}

KeyCeremony::KeyCeremony(const Group& g, std::vector<Scalar> secrets, std::vector<std::string> labels)
    : secrets_(std::move(secrets)) {
  if (secrets_.empty()) throw std::invalid_argument("need at least one category");
  publish(g, std::move(labels));
}

void KeyCeremony::publish(const Group& g, std::vector<std::string> labels) {
  const auto N = size();
  if (labels.empty()) labels = default_labels(N);
  if (labels.size() != N) throw std::invalid_argument("label count differs from N");
  acl_.labels = std::move(labels);
  acl_.vk.clear();
  for (const auto& d : secrets_) acl_.vk.push_back(g.base_mul(d));
}

AccessKey KeyCeremony::issue(std::uint32_t k) const {
  if (k < 1 || k > size()) throw std::out_of_range("category outside [1, N]");
  return {k, secrets_[k - 1]};
}

std::pair<AccessKey, AccessControlList> keygen(const Group& g, std::uint32_t N, std::uint32_t k, Rng& rng) {
  if (k < 1 || k > N) throw std::out_of_range("category outside [1, N]");
  KeyCeremony c(g, N, rng);
  return {c.issue(k), c.acl()};
}

Scalar make_proof(const Group& g, const AccessKey& key) { return g.neg(key.secret); }

GroupElement local_verify(const Group& g, const AccessControlList& acl, const DpfKey& key,
                          const Scalar& proof_share) {
  if (key.share.size() != acl.size()) throw std::invalid_argument("key length differs from ACL size");
  GroupElement tau = g.base_mul(proof_share);
  for (std::size_t i = 0; i < acl.size(); ++i) {
    if (key.share[i].is_zero()) continue;
    tau = g.combine(tau, g.scalar_mul(acl.vk[i], key.share[i]));
  }
  return tau;
}

const char* to_string(AccessVerdict v) {
  switch (v) {
    case AccessVerdict::accept: return "accept";
    case AccessVerdict::reject: return "reject";
    case AccessVerdict::indeterminate: return "indeterminate";
  }
  return "?";
}

AccessVerdict check_access(const Group& g, std::span<const std::optional<GroupElement>> taus) {
  if (taus.empty()) return AccessVerdict::indeterminate;
  GroupElement acc = g.identity();
  for (const auto& t : taus) {
    if (!t) return AccessVerdict::indeterminate;
    acc = g.combine(acc, *t);
  }
  return acc == g.identity() ? AccessVerdict::accept : AccessVerdict::reject;
}

AccessVerdict check_access(const Group& g, std::span<const GroupElement> taus) {
  std::vector<std::optional<GroupElement>> v(taus.begin(), taus.end());
  return check_access(g, v);
}

AccessVerdict check_access_threshold(const Group& g, std::span<const std::pair<std::uint32_t, GroupElement>> taus,
                                     std::uint32_t t) {
  if (t == 0 || taus.size() < t) return AccessVerdict::indeterminate;
  std::vector<std::uint32_t> idx;
  for (std::uint32_t j = 0; j < t; ++j) idx.push_back(taus[j].first);
  auto lambda = crypto::lagrange_at_zero(g, idx);
  GroupElement acc = g.identity();
  for (std::uint32_t j = 0; j < t; ++j) acc = g.combine(acc, g.scalar_mul(taus[j].second, lambda[j]));
  return acc == g.identity() ? AccessVerdict::accept : AccessVerdict::reject;
}

void write_acl_csv(std::ostream& os, const AccessControlList& acl) {
  os << "category_index,label,vk_hex\n";
  for (std::size_t i = 0; i < acl.size(); ++i) {
    if (acl.labels[i].find_first_of(",\n\"") != std::string::npos)
      throw std::invalid_argument("label contains a CSV delimiter");
    os << i + 1 << ',' << acl.labels[i] << ',' << to_hex(acl.vk[i].encoding()) << '\n';
  }
}

AccessControlList read_acl_csv(const Group& g, std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "category_index,label,vk_hex") throw DecodeError("missing ACL header");
  AccessControlList acl;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto a = line.find(',');
    auto b = line.rfind(',');
    if (a == std::string::npos || a == b) throw DecodeError("ACL row needs three fields");
    std::size_t idx = 0;
    try {
      idx = std::stoul(line.substr(0, a));
    } catch (const std::exception&) {
      throw DecodeError("bad category index");
    }
    if (idx != acl.size() + 1) throw DecodeError("category indices must run 1..N in order");
    acl.labels.push_back(line.substr(a + 1, b - a - 1));
    acl.vk.push_back(g.decode_element(from_hex(line.substr(b + 1))));
  }
  return acl;
}

namespace wire {

namespace {

Bytes frame(MsgType type, const ByteWriter& body) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(body.size() + 2));
  w.u8(kVersion);
  w.u8(static_cast<std::uint8_t>(type));
  w.raw(body.bytes());
  return std::move(w).take();
}

ByteReader open(MsgType want, ByteReader& outer) {
  const std::uint32_t len = outer.u32();
  ByteReader r(outer.raw(len));
  outer.expect_done();
  if (r.u8() != kVersion) throw DecodeError("unsupported wire version");
  if (r.u8() != static_cast<std::uint8_t>(want)) throw DecodeError("unexpected message type");
  return r;
}

}  // namespace

Bytes encode(const AccessRequest& m) {
  ByteWriter b;
  b.u64(m.request_id);
  b.u32(m.server);
  b.u32(static_cast<std::uint32_t>(m.key.size()));
  for (const auto& x : m.key) b.field(x.le_bytes());
  b.field(m.proof_share.le_bytes());
  return frame(MsgType::access_request, b);
}

Bytes encode(const AccessResult& m) {
  ByteWriter b;
  b.u64(m.request_id);
  b.u8(m.accept ? 1 : 0);
  return frame(MsgType::access_result, b);
}

Bytes encode(const TauShare& m) {
  ByteWriter b;
  b.u64(m.request_id);
  b.u32(m.server);
  b.field(m.tau.encoding());
  return frame(MsgType::tau_share, b);
}

std::size_t access_request_size(const Group&, std::uint32_t N) {
  return 4 + 2 + 8 + 4 + 4 + static_cast<std::size_t>(N + 1) * (2 + Scalar::kBytes);
}

AccessRequest decode_request(const Group& g, std::span<const std::uint8_t> bytes) {
  ByteReader outer(bytes);
  auto r = open(MsgType::access_request, outer);
  AccessRequest m;
  m.request_id = r.u64();
  m.server = r.u32();
  const auto n = r.u32();
  if (n > r.remaining() / (2 + Scalar::kBytes)) throw DecodeError("key length exceeds frame");
  for (std::uint32_t i = 0; i < n; ++i) m.key.push_back(g.decode_scalar(r.field()));
  m.proof_share = g.decode_scalar(r.field());
  r.expect_done();
  return m;
}

AccessResult decode_result(std::span<const std::uint8_t> bytes) {
  ByteReader outer(bytes);
  auto r = open(MsgType::access_result, outer);
  AccessResult m;
  m.request_id = r.u64();
  const auto v = r.u8();
  if (v > 1) throw DecodeError("access result flag must be 0 or 1");
  m.accept = v == 1;
  r.expect_done();
  return m;
}

TauShare decode_tau(const Group& g, std::span<const std::uint8_t> bytes) {
  ByteReader outer(bytes);
  auto r = open(MsgType::tau_share, outer);
  TauShare m;
  m.request_id = r.u64();
  m.server = r.u32();
  m.tau = g.decode_element(r.field());
  r.expect_done();
  return m;
}

}  // namespace wire

}  // namespace iob::fss
