#include <doctest.h>

#include <algorithm>

#include "iob/auth/protocol.hpp"
#include "iob/auth/wire.hpp"
#include "iob/auth/zkp.hpp"

using namespace iob;
using namespace iob::auth;

namespace {

std::uint64_t pow4(std::uint64_t e) {
  std::uint64_t r = 1, b = 4;
  while (e) {
    if (e & 1) r = r * b % 467;
    b = b * b % 467;
    e >>= 1;
  }
  return r;
}

std::uint64_t value(const GroupElement& e) {
  auto b = e.encoding();
  return (std::uint64_t{b[0]} << 8) | b[1];
}

bool contains(const Bytes& hay, std::span<const std::uint8_t> needle) {
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

}  // namespace

TEST_CASE("prove: worked example on test467") {
  auto g = crypto::make_group("test467");
  auto cred = Credential::from_private(*g, g->from_u64(7));
  CHECK(value(cred.pu) == 39);
  auto p = testing::prove_with(*g, cred, g->from_u64(11), g->from_u64(5));
  CHECK(value(p.commitment) == pow4(11));
  CHECK(value(p.commitment) == 177);
  CHECK(p.response.low_u64() == 209);
  // injected challenge is not H(G||V||pu), so the Fiat-Shamir check refuses it
  CHECK(!verify_proof(*g, cred.pu, p.commitment, p.challenge, p.response));
  // but the algebraic relation r*G + c*pu == V holds
  CHECK(g->combine(g->base_mul(p.response), g->scalar_mul(cred.pu, p.challenge)) == p.commitment);
  CHECK_THROWS(Credential::from_private(*g, g->from_u64(0)));
}

TEST_CASE("prove: completeness on both backends") {
  for (const char* backend : {"test467", "prod"}) {
    auto g = crypto::make_group(backend);
    Rng rng(1);
    int ok = 0;
    for (int i = 0; i < 1000; ++i) {
      auto cred = Credential::generate(*g, rng);
      auto p = prove(*g, cred, rng);
      if (verify_proof(*g, cred.pu, p.commitment, p.challenge, p.response)) ++ok;
    }
    CHECK(ok == 1000);
  }
}

TEST_CASE("prove: response tampering rejects") {
  auto g = crypto::make_group("test467");
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    auto cred = Credential::generate(*g, rng);
    auto p = prove(*g, cred, rng);
    for (std::uint64_t d = 1; d < 233; ++d)
      CHECK(!verify_proof(*g, cred.pu, p.commitment, p.challenge, g->add(p.response, g->from_u64(d))));
  }
}

TEST_CASE("share_proof: reconstruction and threshold contract") {
  auto g = crypto::make_group("test467");
  Rng rng(3);
  auto one = crypto::shamir_split(*g, g->from_u64(100), 1, 1, rng);
  CHECK(one[0].value.low_u64() == 100);

  auto sh = crypto::shamir_split(*g, g->from_u64(100), 3, 2, rng);
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b) {
      // two-point interpolation at 0 by hand: (x_b y_a - x_a y_b) / (x_b - x_a)
      std::int64_t xa = sh[a].index, xb = sh[b].index;
      std::int64_t ya = sh[a].value.low_u64(), yb = sh[b].value.low_u64();
      std::int64_t num = ((xb * ya - xa * yb) % 233 + 233) % 233;
      std::int64_t den = xb - xa;
      std::int64_t inv = 1;
      for (int k = 0; k < 231; ++k) inv = inv * den % 233;  // den^(n-2)
      CHECK((num * inv) % 233 == 100);
      std::vector<crypto::Share> pair{sh[a], sh[b]};
      CHECK(crypto::shamir_reconstruct(*g, pair).low_u64() == 100);
    }

  auto cred = Credential::generate(*g, rng);
  auto p = prove(*g, cred, rng);
  CHECK_THROWS(share_proof(*g, p, 3, 0, rng));
  CHECK_THROWS(share_proof(*g, p, 3, 4, rng));
  CHECK(quarter_threshold(1) == 1);
  CHECK(quarter_threshold(4) == 1);
  CHECK(quarter_threshold(5) == 2);
  CHECK(quarter_threshold(2000) == 500);
}

TEST_CASE("share_proof: t-1 slices leave every secret feasible") {
  auto g = crypto::make_group("test467");
  Rng rng(4);
  // t = 3: two known points; count polynomials a0 + a1 x + a2 x^2 through them per a0
  auto sh = crypto::shamir_split(*g, g->from_u64(57), 9, 3, rng);
  const std::uint64_t x1 = sh[0].index, y1 = sh[0].value.low_u64();
  const std::uint64_t x2 = sh[4].index, y2 = sh[4].value.low_u64();
  std::vector<int> per_secret(233, 0);
  for (std::uint64_t a0 = 0; a0 < 233; ++a0)
    for (std::uint64_t a1 = 0; a1 < 233; ++a1)
      for (std::uint64_t a2 = 0; a2 < 233; ++a2)
        if ((a0 + a1 * x1 + a2 * x1 * x1) % 233 == y1 && (a0 + a1 * x2 + a2 * x2 * x2) % 233 == y2)
          ++per_secret[a0];
  CHECK(std::all_of(per_secret.begin(), per_secret.end(), [](int c) { return c == 1; }));
}

TEST_CASE("ca_verify: accept, reject and indeterminate") {
  auto g = crypto::make_group("test467");
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    auto cred = Credential::generate(*g, rng);
    auto p = prove(*g, cred, rng);
    auto b = share_proof(*g, p, 8, 2, rng);
    CHECK(ca_verify(*g, b, cred.pu) == Verdict::accept);
    auto forged = b;
    do {
      forged.commitment = g->base_mul(g->random_scalar(rng));
    } while (forged.commitment == b.commitment);
    CHECK(ca_verify(*g, forged, cred.pu) == Verdict::reject);
  }
  auto cred = Credential::generate(*g, rng);
  auto b = share_proof(*g, prove(*g, cred, rng), 8, 3, rng);
  std::vector<Share> few(b.c_shares.begin(), b.c_shares.begin() + 2);
  CHECK(ca_verify(*g, b.commitment, cred.pu, few, b.r_shares, 8, 3) == Verdict::indeterminate);
  // malformed slices are skipped when enough remain
  std::vector<Share> noisy{{0, b.c_shares[0].value}, {9, b.c_shares[1].value}, b.c_shares[2], b.c_shares[2],
                           b.c_shares[3], b.c_shares[5]};
  CHECK(ca_verify(*g, b.commitment, cred.pu, noisy, b.r_shares, 8, 3) == Verdict::accept);
}

TEST_CASE("ca_verify: every single-field tampering rejects") {
  auto g = crypto::make_group("test467");
  Rng rng(6);
  const std::uint32_t q = 8, t = quarter_threshold(q);
  for (int i = 0; i < 100; ++i) {
    auto cred = Credential::generate(*g, rng);
    auto b = share_proof(*g, prove(*g, cred, rng), q, t, rng);
    for (std::uint64_t v = 1; v < 467; ++v) {
      if (!g->is_member(std::array<std::uint8_t, 2>{std::uint8_t(v >> 8), std::uint8_t(v)})) continue;
      auto e = g->decode_element(std::array<std::uint8_t, 2>{std::uint8_t(v >> 8), std::uint8_t(v)});
      if (e == b.commitment) continue;
      auto f = b;
      f.commitment = e;
      CHECK(ca_verify(*g, f, cred.pu) == Verdict::reject);
    }
    for (std::uint32_t j = 0; j < q; ++j) {
      // put slice j first so the reconstruction uses it
      for (int which = 0; which < 2; ++which) {
        for (std::uint64_t d = 1; d < 233; ++d) {
          auto cs = b.c_shares, rs = b.r_shares;
          std::rotate(cs.begin(), cs.begin() + j, cs.end());
          std::rotate(rs.begin(), rs.begin() + j, rs.end());
          auto& victim = which == 0 ? cs[0] : rs[0];
          victim.value = g->add(victim.value, g->from_u64(d));
          CHECK(ca_verify(*g, b.commitment, cred.pu, cs, rs, q, t) == Verdict::reject);
        }
      }
    }
  }
}

TEST_CASE("tokens: digest, registry, cross-domain") {
  auto g = crypto::make_group("prod");
  Rng rng(7);
  auto cred = Credential::generate(*g, rng);
  auto tok = issue_token(cred.pu, from_seconds(10));
  CHECK(tok.digest == token_digest(cred.pu, from_seconds(10)));
  CHECK(tok.validity_window == kDefaultTokenValidity);
  CHECK(issue_token(cred.pu, from_seconds(10)).digest == tok.digest);
  CHECK(issue_token(cred.pu, from_seconds(11)).digest != tok.digest);

  CaRegistry reg;
  CHECK(cross_domain_verify(tok, cred.pu, reg, from_seconds(11)) == XDomainResult::reauth_required);
  reg.record(cred.pu, tok);
  REQUIRE(reg.find(cred.pu) != nullptr);
  const auto before = reg;
  CHECK(cross_domain_verify(tok, cred.pu, reg, from_seconds(12)) == XDomainResult::accept);
  auto flipped = tok;
  flipped.digest[5] ^= 0x10;
  CHECK(cross_domain_verify(flipped, cred.pu, reg, from_seconds(12)) == XDomainResult::reject);
  CHECK(cross_domain_verify(tok, cred.pu, reg, from_seconds(10) + kDefaultTokenValidity) == XDomainResult::accept);
  CHECK(cross_domain_verify(tok, cred.pu, reg, from_seconds(10) + kDefaultTokenValidity + 1) ==
        XDomainResult::reauth_required);
  CHECK(reg == before);
}

TEST_CASE("wire: round trips and private key never serialized") {
  for (const char* backend : {"test467", "prod"}) {
    auto g = crypto::make_group(backend);
    Rng rng(8);
    auto cred = Credential::generate(*g, rng);
    auto p = prove(*g, cred, rng);
    auto b = share_proof(*g, p, 5, 2, rng);
    for (std::uint32_t j = 0; j < 5; ++j) {
      wire::AuthRequest req{b.commitment, b.c_shares[j].index, b.c_shares[j].value, b.r_shares[j].value, cred.pu};
      auto bytes = wire::encode(req);
      if (std::string_view(backend) == "prod") CHECK(!contains(bytes, cred.pr.le_bytes()));
      auto m = std::get<wire::AuthRequest>(wire::decode(*g, bytes));
      CHECK(m.commitment == req.commitment);
      CHECK(m.share_index == req.share_index);
      CHECK(m.c_share == req.c_share);
      CHECK(m.r_share == req.r_share);
      CHECK(m.pu == req.pu);
      auto cut = bytes;
      cut.resize(cut.size() - 1);
      CHECK_THROWS_AS(wire::decode(*g, cut), DecodeError);
    }
    auto tok = issue_token(cred.pu, 99);
    auto tb = std::get<wire::Token>(wire::decode(*g, wire::encode(wire::Token{tok.digest, tok.timestamp})));
    CHECK(tb.digest == tok.digest);
    CHECK(tb.timestamp == 99);
    auto rb = std::get<wire::AuthResult>(wire::decode(*g, wire::encode(wire::AuthResult{true})));
    CHECK(rb.accept);
    auto xb = std::get<wire::XDomainRequest>(wire::decode(*g, wire::encode(wire::XDomainRequest{tok.digest, cred.pu})));
    CHECK(xb.pu == cred.pu);
  }
}

TEST_CASE("protocol: single CA, one user") {
  AuthSetup s;
  s.ca = {{39.9, 116.3, 5}};
  s.users = {{{39.91, 116.31, 5}, 0, false}};
  auto r = run_auth(s);
  CHECK(r.q == 1);
  CHECK(r.t == 1);
  REQUIRE(r.users[0].done);
  CHECK(r.users[0].verdict == Verdict::accept);
  CHECK(r.registries_agree);
  CHECK(r.registries[0].size() == 1);
}

TEST_CASE("protocol: CA nodes agree and issue identical tokens") {
  AuthSetup s;
  Rng rng(9);
  for (int i = 0; i < 13; ++i) s.ca.push_back({39.8 + 0.2 * uniform01(rng), 116.2 + 0.2 * uniform01(rng), 1 + 9 * uniform01(rng)});
  s.users = {{{39.9, 116.3, 4}, 0, false}, {{39.95, 116.25, 4}, from_seconds(0.001), false}, {{39.85, 116.35, 4}, 0, true}};
  auto r = run_auth(s);
  CHECK(r.quiescent);
  CHECK(r.t == 4);
  CHECK(r.users[0].verdict == Verdict::accept);
  CHECK(r.users[1].verdict == Verdict::accept);
  CHECK(r.users[2].done);
  CHECK(r.users[2].verdict == Verdict::reject);
  CHECK(r.verdicts_agree);
  CHECK(r.consensus_safe);
  CHECK(r.registries_agree);
  for (const auto& reg : r.registries) CHECK(reg.size() == 2);
  CHECK(r.users[0].latency > 0);
  CHECK(r.counts.at("AUTH_REQUEST") == 3 * 13);
  CHECK(r.counts.at("AUTH_SLICE") == 3 * 13 * 12);
  CHECK(r.counts.at("TOKEN") == 2 * 13);
  CHECK(r.counts.at("AUTH_RESULT") == 13);

  // tokens the users hold pass cross-domain checks at every CA node
  for (const auto& reg : r.registries)
    for (int u = 0; u < 2; ++u)
      CHECK(cross_domain_verify(r.users[u].token, r.users[u].pu, reg, r.users[u].token.timestamp + 1) ==
            XDomainResult::accept);

  auto again = run_auth(s);
  CHECK(again.users[0].latency == r.users[0].latency);
  CHECK(again.messages == r.messages);
}

TEST_CASE("protocol: more CA nodes take longer") {
  SimTime prev = 0;
  for (int q : {4, 16, 64, 160}) {
    AuthSetup s;
    Rng rng(10);
    for (int i = 0; i < q; ++i) s.ca.push_back({39.8 + 0.3 * uniform01(rng), 116.2 + 0.3 * uniform01(rng), 1 + 9 * uniform01(rng)});
    s.users = {{{39.9, 116.3, 5}, 0, false}};
    auto r = run_auth(s);
    REQUIRE(r.users[0].done);
    CHECK(r.users[0].latency > prev);
    prev = r.users[0].latency;
  }
}
