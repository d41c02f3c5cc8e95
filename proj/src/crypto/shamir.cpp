#include "iob/crypto/shamir.hpp"

#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace iob::crypto {

namespace {

// Product of small integers mod n. Factors are packed into a machine word
// before touching the field, which matters for reconstructions with t in
// the hundreds.
class SmallProduct {
 public:
  explicit SmallProduct(const Group& g) : g_(g), acc_field_(g.from_u64(1)) {}

  void feed(std::uint64_t v) {
    if (acc_ > std::numeric_limits<std::uint64_t>::max() / v) flush();
    acc_ *= v;
  }
  Scalar result() {
    flush();
    return acc_field_;
  }

 private:
  void flush() {
    if (acc_ != 1) acc_field_ = g_.mul(acc_field_, g_.from_u64(acc_));
    acc_ = 1;
  }
  const Group& g_;
  std::uint64_t acc_ = 1;
  Scalar acc_field_;
};

}  // namespace

std::vector<Share> shamir_split(const Group& g, const Scalar& secret, std::uint32_t q,
                                std::uint32_t t, Rng& rng) {
  if (t == 0 || t > q) throw std::invalid_argument("shamir threshold must satisfy 1 <= t <= q");
  if (!g.order_exceeds(q)) throw std::invalid_argument("share count must be below the group order");

  std::vector<Scalar> coeffs;
  coeffs.reserve(t);
  coeffs.push_back(secret);
  for (std::uint32_t i = 1; i < t; ++i) coeffs.push_back(g.random_any(rng));

  std::vector<Share> shares;
  shares.reserve(q);
  for (std::uint32_t x = 1; x <= q; ++x) {
    Scalar xs = g.from_u64(x);
    Scalar acc = coeffs.back();
    for (std::size_t k = coeffs.size() - 1; k-- > 0;) acc = g.add(g.mul(acc, xs), coeffs[k]);
    shares.push_back({x, acc});
  }
  return shares;
}

std::vector<Scalar> lagrange_at_zero(const Group& g, std::span<const std::uint32_t> indices) {
  const std::size_t t = indices.size();
  if (t == 0) throw std::invalid_argument("no evaluation points");
  {
    std::unordered_set<std::uint32_t> seen;
    for (auto x : indices) {
      if (x == 0 || !g.order_exceeds(x) || !seen.insert(x).second)
        throw std::invalid_argument("evaluation points must be distinct, nonzero and below n");
    }
  }

  // lambda_i = prod_{j != i} x_j / (x_j - x_i) = N / (x_i * prod_{j != i} (x_j - x_i))
  SmallProduct total(g);
  for (auto x : indices) total.feed(x);
  const Scalar numerator = total.result();

  std::vector<Scalar> den(t);
  std::vector<bool> negative(t, false);
  for (std::size_t i = 0; i < t; ++i) {
    SmallProduct p(g);
    p.feed(indices[i]);
    bool neg = false;
    for (std::size_t j = 0; j < t; ++j) {
      if (j == i) continue;
      std::int64_t d = static_cast<std::int64_t>(indices[j]) - static_cast<std::int64_t>(indices[i]);
      if (d < 0) {
        neg = !neg;
        d = -d;
      }
      p.feed(static_cast<std::uint64_t>(d));
    }
    den[i] = p.result();
    negative[i] = neg;
  }

  // Batch inversion.
  std::vector<Scalar> prefix(t);
  Scalar acc = g.from_u64(1);
  for (std::size_t i = 0; i < t; ++i) {
    prefix[i] = acc;
    acc = g.mul(acc, den[i]);
  }
  Scalar inv_acc = g.inv(acc);
  std::vector<Scalar> out(t);
  for (std::size_t i = t; i-- > 0;) {
    Scalar inv_i = g.mul(inv_acc, prefix[i]);
    inv_acc = g.mul(inv_acc, den[i]);
    Scalar l = g.mul(numerator, inv_i);
    out[i] = negative[i] ? g.neg(l) : l;
  }
  return out;
}

Scalar shamir_reconstruct(const Group& g, std::span<const Share> shares) {
  std::vector<std::uint32_t> xs;
  xs.reserve(shares.size());
  for (const auto& s : shares) xs.push_back(s.index);
  auto lambda = lagrange_at_zero(g, xs);
  Scalar acc;
  for (std::size_t i = 0; i < shares.size(); ++i) acc = g.add(acc, g.mul(lambda[i], shares[i].value));
  return acc;
}

std::vector<Scalar> additive_split(const Group& g, const Scalar& secret, std::uint32_t s, Rng& rng) {
  if (s == 0) throw std::invalid_argument("additive sharing needs at least one share");
  std::vector<Scalar> out;
  out.reserve(s);
  Scalar rest = secret;
  for (std::uint32_t j = 0; j + 1 < s; ++j) {
    out.push_back(g.random_any(rng));
    rest = g.sub(rest, out.back());
  }
  out.push_back(rest);
  return out;
}

}  // namespace iob::crypto
