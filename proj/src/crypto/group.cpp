#include "iob/crypto/group.hpp"

#include <algorithm>
#include <stdexcept>

#include <sodium.h>

#include "iob/crypto/hash.hpp"

namespace iob::crypto {

bool Scalar::is_zero() const {
  return std::all_of(le_.begin(), le_.end(), [](std::uint8_t b) { return b == 0; });
}

std::uint64_t Scalar::low_u64() const {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | le_[static_cast<std::size_t>(i)];
  return v;
}

GroupElement::GroupElement(std::span<const std::uint8_t> enc) {
  if (enc.size() > kMaxBytes) throw std::length_error("group element encoding too long");
  std::copy(enc.begin(), enc.end(), buf_.begin());
  len_ = static_cast<std::uint8_t>(enc.size());
}

Scalar Group::random_scalar(Rng& rng) const {
  for (;;) {
    Scalar s = random_any(rng);
    if (!s.is_zero()) return s;
  }
}

Scalar Group::hash_to_scalar(std::span<const std::uint8_t> transcript) const {
  Digest d = Sha256().update(kHashToScalarTag).update(transcript).finish();
  return reduce(d);
}

GroupElement Group::decode_element(std::span<const std::uint8_t> enc) const {
  if (enc.size() > GroupElement::kMaxBytes || !is_member(enc))
    throw DecodeError("not a member of the order-n subgroup");
  return make_element(enc);
}

Scalar Group::decode_scalar(std::span<const std::uint8_t> le) const {
  if (le.size() != Scalar::kBytes) throw DecodeError("scalar must be 32 bytes");
  Scalar s = reduce(le);
  if (!std::equal(le.begin(), le.end(), s.le_bytes().begin()))
    throw DecodeError("non-canonical scalar");
  return s;
}

namespace {

// ---------------------------------------------------------------- ristretto255

class RistrettoGroup final : public Group {
 public:
  RistrettoGroup() {
    ensure_sodium();
    std::uint8_t one[32] = {1};
    std::uint8_t g[32];
    crypto_scalarmult_ristretto255_base(g, one);
    generator_ = make_element(std::span<const std::uint8_t>(g, 32));
    std::uint8_t zero[32] = {};
    identity_ = make_element(std::span<const std::uint8_t>(zero, 32));
  }

  std::string_view name() const override { return "prod"; }
  GroupParams params() const override {
    return {generator_,
            "7237005577332262213973186563042994240857116359379907606001950938285454250989",
            "ristretto255 (prime-order group over Curve25519)"};
  }
  const GroupElement& generator() const override { return generator_; }
  const GroupElement& identity() const override { return identity_; }

  GroupElement scalar_mul(const GroupElement& base, const Scalar& k) const override {
    if (k.is_zero() || base == identity_) return identity_;
    std::uint8_t out[32];
    int rc = base == generator_
                 ? crypto_scalarmult_ristretto255_base(out, k.le_bytes().data())
                 : crypto_scalarmult_ristretto255(out, k.le_bytes().data(), base.encoding().data());
    // libsodium reports an identity result as an error.
    if (rc != 0) return identity_;
    return make_element(std::span<const std::uint8_t>(out, 32));
  }

  GroupElement combine(const GroupElement& a, const GroupElement& b) const override {
    std::uint8_t out[32];
    if (crypto_core_ristretto255_add(out, a.encoding().data(), b.encoding().data()) != 0)
      throw std::invalid_argument("ristretto255 add on invalid point");
    return make_element(std::span<const std::uint8_t>(out, 32));
  }

  GroupElement inverse(const GroupElement& a) const override {
    std::uint8_t out[32];
    if (crypto_core_ristretto255_sub(out, identity_.encoding().data(), a.encoding().data()) != 0)
      throw std::invalid_argument("ristretto255 sub on invalid point");
    return make_element(std::span<const std::uint8_t>(out, 32));
  }

  bool is_member(std::span<const std::uint8_t> enc) const override {
    return enc.size() == 32 && crypto_core_ristretto255_is_valid_point(enc.data()) == 1;
  }

  Scalar add(const Scalar& a, const Scalar& b) const override {
    Scalar::Repr r;
    crypto_core_ristretto255_scalar_add(r.data(), a.le_bytes().data(), b.le_bytes().data());
    return make_scalar(r);
  }
  Scalar sub(const Scalar& a, const Scalar& b) const override {
    Scalar::Repr r;
    crypto_core_ristretto255_scalar_sub(r.data(), a.le_bytes().data(), b.le_bytes().data());
    return make_scalar(r);
  }
  Scalar mul(const Scalar& a, const Scalar& b) const override {
    Scalar::Repr r;
    crypto_core_ristretto255_scalar_mul(r.data(), a.le_bytes().data(), b.le_bytes().data());
    return make_scalar(r);
  }
  Scalar neg(const Scalar& a) const override {
    Scalar::Repr r;
    crypto_core_ristretto255_scalar_negate(r.data(), a.le_bytes().data());
    return make_scalar(r);
  }
  Scalar inv(const Scalar& a) const override {
    Scalar::Repr r;
    if (crypto_core_ristretto255_scalar_invert(r.data(), a.le_bytes().data()) != 0)
      throw std::domain_error("inverse of zero scalar");
    return make_scalar(r);
  }
  Scalar reduce(std::span<const std::uint8_t> le) const override {
    if (le.size() > 64) throw std::invalid_argument("reduce input longer than 64 bytes");
    std::uint8_t wide[64] = {};
    std::copy(le.begin(), le.end(), wide);
    Scalar::Repr r;
    crypto_core_ristretto255_scalar_reduce(r.data(), wide);
    return make_scalar(r);
  }
  Scalar from_u64(std::uint64_t v) const override {
    Scalar::Repr r{};
    for (int i = 0; i < 8; ++i) r[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v >> (8 * i));
    return make_scalar(r);  // v < 2^64 < n
  }
  Scalar random_any(Rng& rng) const override {
    std::uint8_t wide[64];
    for (int i = 0; i < 8; ++i) {
      std::uint64_t w = rng();
      for (int j = 0; j < 8; ++j) wide[8 * i + j] = static_cast<std::uint8_t>(w >> (8 * j));
    }
    return reduce(std::span<const std::uint8_t>(wide, 64));
  }
  bool order_exceeds(std::uint64_t) const override { return true; }

 private:
  GroupElement generator_;
  GroupElement identity_;
};

// ---------------------------------------------------------------- test467

class SmallGroup final : public Group {
 public:
  static constexpr std::uint64_t kP = 467;
  static constexpr std::uint64_t kN = 233;
  static constexpr std::uint64_t kG = 4;

  SmallGroup() : generator_(elem(kG)), identity_(elem(1)) {}

  std::string_view name() const override { return "test467"; }
  GroupParams params() const override {
    return {generator_, "233", "order-233 subgroup of Z_467^* (generator 4)"};
  }
  const GroupElement& generator() const override { return generator_; }
  const GroupElement& identity() const override { return identity_; }

  GroupElement scalar_mul(const GroupElement& base, const Scalar& k) const override {
    std::uint64_t b = value(base), e = k.low_u64(), r = 1;
    while (e) {
      if (e & 1) r = r * b % kP;
      b = b * b % kP;
      e >>= 1;
    }
    return elem(r);
  }
  GroupElement combine(const GroupElement& a, const GroupElement& b) const override {
    return elem(value(a) * value(b) % kP);
  }
  GroupElement inverse(const GroupElement& a) const override {
    // a^(n-1) is the inverse inside the order-n subgroup.
    return scalar_mul(a, sc(kN - 1));
  }
  bool is_member(std::span<const std::uint8_t> enc) const override {
    if (enc.size() != 2) return false;
    std::uint64_t v = (std::uint64_t{enc[0]} << 8) | enc[1];
    if (v == 0 || v >= kP) return false;
    std::uint64_t b = v, e = kN, r = 1;
    while (e) {
      if (e & 1) r = r * b % kP;
      b = b * b % kP;
      e >>= 1;
    }
    return r == 1;
  }

  Scalar add(const Scalar& a, const Scalar& b) const override { return sc((a.low_u64() + b.low_u64()) % kN); }
  Scalar sub(const Scalar& a, const Scalar& b) const override {
    return sc((a.low_u64() + kN - b.low_u64()) % kN);
  }
  Scalar mul(const Scalar& a, const Scalar& b) const override { return sc(a.low_u64() * b.low_u64() % kN); }
  Scalar neg(const Scalar& a) const override { return sc((kN - a.low_u64()) % kN); }
  Scalar inv(const Scalar& a) const override {
    if (a.is_zero()) throw std::domain_error("inverse of zero scalar");
    std::uint64_t b = a.low_u64(), e = kN - 2, r = 1;
    while (e) {
      if (e & 1) r = r * b % kN;
      b = b * b % kN;
      e >>= 1;
    }
    return sc(r);
  }
  Scalar reduce(std::span<const std::uint8_t> le) const override {
    if (le.size() > 64) throw std::invalid_argument("reduce input longer than 64 bytes");
    std::uint64_t r = 0;
    for (auto it = le.rbegin(); it != le.rend(); ++it) r = (r * 256 + *it) % kN;
    return sc(r);
  }
  Scalar from_u64(std::uint64_t v) const override { return sc(v % kN); }
  Scalar random_any(Rng& rng) const override {
    return sc(std::uniform_int_distribution<std::uint64_t>(0, kN - 1)(rng));
  }
  bool order_exceeds(std::uint64_t v) const override { return kN > v; }

 private:
  static Scalar sc(std::uint64_t v) {
    Scalar::Repr r{};
    r[0] = static_cast<std::uint8_t>(v);
    return make_scalar(r);
  }
  static GroupElement elem(std::uint64_t v) {
    std::uint8_t b[2] = {static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
    return make_element(std::span<const std::uint8_t>(b, 2));
  }
  static std::uint64_t value(const GroupElement& e) {
    auto enc = e.encoding();
    return (std::uint64_t{enc[0]} << 8) | enc[1];
  }

  GroupElement generator_;
  GroupElement identity_;
};

}  // namespace

std::unique_ptr<Group> make_group(std::string_view backend) {
  if (backend == "prod") return std::make_unique<RistrettoGroup>();
  if (backend == "test467") return std::make_unique<SmallGroup>();
  throw std::invalid_argument("unknown crypto backend: " + std::string(backend));
}

}  // namespace iob::crypto
