#include "iob/sim/cost_model.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <vector>

#include "iob/crypto/hash.hpp"
#include "iob/crypto/shamir.hpp"

namespace iob::sim {

SimTime CostModel::share(std::uint64_t q, std::uint64_t t) const {
  // Horner evaluation: t mul+add per slice, twice
  return static_cast<SimTime>(2 * q * t * 2) * scalar_op;
}

SimTime CostModel::lagrange(std::uint64_t t) const {
  // denominators are packed three factors per field multiplication
  return static_cast<SimTime>(t * t) * small_mul + static_cast<SimTime>(t * t / 3 + 5 * t) * scalar_op + scalar_inv;
}

SimTime CostModel::ca_verify(std::uint64_t t) const {
  return lagrange(t) + static_cast<SimTime>(4 * t) * scalar_op + base_mul + scalar_mul + combine + hash;
}

SimTime CostModel::dpf_gen(std::uint64_t N, std::uint64_t s) const {
  return static_cast<SimTime>(N * s) * scalar_op;
}

SimTime CostModel::local_verify(std::uint64_t N) const {
  return base_mul + static_cast<SimTime>(N) * (scalar_mul + combine);
}

std::map<std::string, std::int64_t> CostModel::to_map() const {
  return {{"cost.base_mul", base_mul}, {"cost.scalar_mul", scalar_mul}, {"cost.combine", combine},
          {"cost.scalar_op", scalar_op}, {"cost.scalar_inv", scalar_inv}, {"cost.small_mul", small_mul},
          {"cost.hash", hash},         {"cost.sign", sign},             {"cost.verify", verify}};
}

void CostModel::apply(const std::map<std::string, std::string>& kv) {
  std::map<std::string, SimTime*> fields{{"cost.base_mul", &base_mul},     {"cost.scalar_mul", &scalar_mul},
                                         {"cost.combine", &combine},       {"cost.scalar_op", &scalar_op},
                                         {"cost.scalar_inv", &scalar_inv}, {"cost.small_mul", &small_mul},
                                         {"cost.hash", &hash},             {"cost.sign", &sign},
                                         {"cost.verify", &verify}};
  for (const auto& [k, v] : kv) {
    auto it = fields.find(k);
    if (it == fields.end()) continue;
    std::size_t pos = 0;
    long long x = std::stoll(v, &pos);
    if (pos != v.size() || x < 0) throw std::invalid_argument(k + " must be a nonnegative integer (ns)");
    *it->second = x;
  }
}

namespace {

template <class F>
SimTime per_op(int rounds, int batch, F&& f) {
  std::vector<double> samples;
  for (int r = 0; r < rounds; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < batch; ++i) f(i);
    auto t1 = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count() / batch);
  }
  std::nth_element(samples.begin(), samples.begin() + rounds / 2, samples.end());
  return std::max<SimTime>(1, static_cast<SimTime>(samples[rounds / 2] + 0.5));
}

}  // namespace

CostModel measure(const crypto::Group& g, int rounds) {
  if (rounds < 1) throw std::invalid_argument("rounds must be positive");
  Rng rng(1);
  std::vector<crypto::Scalar> ks;
  for (int i = 0; i < 64; ++i) ks.push_back(g.random_scalar(rng));
  std::vector<crypto::GroupElement> ps;
  for (const auto& k : ks) ps.push_back(g.base_mul(k));
  volatile std::uint8_t sink = 0;

  CostModel c;
  c.base_mul = per_op(rounds, 200, [&](int i) { sink ^= g.base_mul(ks[i % 64]).encoding()[0]; });
  c.scalar_mul = per_op(rounds, 100, [&](int i) { sink ^= g.scalar_mul(ps[i % 64], ks[(i + 1) % 64]).encoding()[0]; });
  c.combine = per_op(rounds, 500, [&](int i) { sink ^= g.combine(ps[i % 64], ps[(i + 7) % 64]).encoding()[0]; });
  crypto::Scalar acc = ks[0];
  c.scalar_op = per_op(rounds, 20000, [&](int i) { acc = g.mul(acc, ks[i % 64]); });
  c.scalar_inv = per_op(rounds, 500, [&](int i) { acc = g.add(acc, g.inv(ks[i % 64])); });
  std::uint64_t w = 3;
  c.small_mul = per_op(rounds, 200000, [&](int i) { w = w * static_cast<std::uint64_t>(i | 1) + 1; });
  sink ^= static_cast<std::uint8_t>(w) ^ acc.le_bytes()[0];
  Bytes msg(96, 0x5a);
  c.hash = per_op(rounds, 5000, [&](int i) {
    msg[0] = static_cast<std::uint8_t>(i);
    sink ^= crypto::sha256(msg)[0];
  });
  Bytes key(32, 0x11);
  c.sign = per_op(rounds, 5000, [&](int i) {
    msg[1] = static_cast<std::uint8_t>(i);
    sink ^= crypto::hmac_sha256(key, msg)[0];
  });
  c.verify = c.sign;
  (void)sink;
  return c;
}

}  // namespace iob::sim
