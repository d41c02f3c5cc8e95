#pragma once

// Prime-order group abstraction shared by the identity proofs (additive,
// elliptic-curve notation) and the access-control exponent algebra
// (multiplicative notation). Protocol code only sees combine/scalar_mul.

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "iob/util/bytes.hpp"
#include "iob/util/rng.hpp"

namespace iob::crypto {

class Group;

/// Integer in [0, n). Always reduced; only a Group can mint one.
class Scalar {
 public:
  static constexpr std::size_t kBytes = 32;
  using Repr = std::array<std::uint8_t, kBytes>;  // little-endian

  Scalar() = default;  // zero

  const Repr& le_bytes() const { return le_; }
  bool is_zero() const;
  std::uint64_t low_u64() const;

  friend bool operator==(const Scalar&, const Scalar&) = default;
  friend auto operator<=>(const Scalar&, const Scalar&) = default;

 private:
  friend class Group;
  explicit Scalar(const Repr& le) : le_(le) {}
  Repr le_{};
};

/// Canonical encoding of a member of the order-n subgroup.
class GroupElement {
 public:
  static constexpr std::size_t kMaxBytes = 32;

  GroupElement() = default;

  std::span<const std::uint8_t> encoding() const { return {buf_.data(), len_}; }
  Bytes to_bytes() const { return {buf_.begin(), buf_.begin() + len_}; }

  friend bool operator==(const GroupElement& a, const GroupElement& b) {
    return a.len_ == b.len_ && a.buf_ == b.buf_;
  }
  friend auto operator<=>(const GroupElement& a, const GroupElement& b) {
    return a.buf_ <=> b.buf_;
  }

 private:
  friend class Group;
  GroupElement(std::span<const std::uint8_t> enc);
  std::array<std::uint8_t, kMaxBytes> buf_{};
  std::uint8_t len_ = 0;
};

struct GroupParams {
  GroupElement generator;
  std::string order;        // decimal
  std::string description;  // backend name
};

class Group {
 public:
  virtual ~Group() = default;

  virtual std::string_view name() const = 0;
  virtual GroupParams params() const = 0;
  virtual const GroupElement& generator() const = 0;
  virtual const GroupElement& identity() const = 0;

  virtual GroupElement scalar_mul(const GroupElement& base, const Scalar& k) const = 0;
  virtual GroupElement combine(const GroupElement& a, const GroupElement& b) const = 0;
  virtual GroupElement inverse(const GroupElement& a) const = 0;
  virtual bool is_member(std::span<const std::uint8_t> enc) const = 0;

  // Scalar field Z_n.
  virtual Scalar add(const Scalar& a, const Scalar& b) const = 0;
  virtual Scalar sub(const Scalar& a, const Scalar& b) const = 0;
  virtual Scalar mul(const Scalar& a, const Scalar& b) const = 0;
  virtual Scalar neg(const Scalar& a) const = 0;
  /// Throws std::domain_error on zero.
  virtual Scalar inv(const Scalar& a) const = 0;
  /// Reduces a little-endian integer of at most 64 bytes mod n.
  virtual Scalar reduce(std::span<const std::uint8_t> le) const = 0;
  virtual Scalar from_u64(std::uint64_t v) const = 0;
  /// Uniform over [0, n-1].
  virtual Scalar random_any(Rng& rng) const = 0;
  /// True when n > v; share indices must stay below n.
  virtual bool order_exceeds(std::uint64_t v) const = 0;

  GroupElement base_mul(const Scalar& k) const { return scalar_mul(generator(), k); }

  /// Uniform over [1, n-1].
  Scalar random_scalar(Rng& rng) const;

  /// SHA-256 of a fixed protocol tag followed by the transcript, reduced mod n.
  Scalar hash_to_scalar(std::span<const std::uint8_t> transcript) const;

  /// Validates membership; throws DecodeError.
  GroupElement decode_element(std::span<const std::uint8_t> enc) const;
  /// 32-byte little-endian canonical scalar; throws DecodeError if >= n.
  Scalar decode_scalar(std::span<const std::uint8_t> le) const;

 protected:
  static Scalar make_scalar(const Scalar::Repr& le) { return Scalar(le); }
  static GroupElement make_element(std::span<const std::uint8_t> enc) { return GroupElement(enc); }
};

inline constexpr std::string_view kHashToScalarTag = "IOB/v1/hash-to-scalar";

/// Backend selected by `crypto.backend`: "prod" (ristretto255) or "test467"
/// (order-233 subgroup of Z_467^*, generator 4).
std::unique_ptr<Group> make_group(std::string_view backend);

}  // namespace iob::crypto
