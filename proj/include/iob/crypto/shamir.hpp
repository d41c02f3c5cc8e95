#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "iob/crypto/group.hpp"

namespace iob::crypto {

/// A point (index, f(index)) of a random degree-(t-1) polynomial over Z_n
/// whose constant term is the secret.
struct Share {
  std::uint32_t index = 0;  // 1-based evaluation point
  Scalar value;
  friend bool operator==(const Share&, const Share&) = default;
};

/// Splits `secret` into q shares, any t of which reconstruct it.
/// Throws std::invalid_argument unless 1 <= t <= q < n.
std::vector<Share> shamir_split(const Group& g, const Scalar& secret, std::uint32_t q,
                                std::uint32_t t, Rng& rng);

/// Lagrange basis coefficients at x = 0 for the given distinct, nonzero
/// evaluation points.
std::vector<Scalar> lagrange_at_zero(const Group& g, std::span<const std::uint32_t> indices);

/// Interpolates f(0) from all supplied shares.
Scalar shamir_reconstruct(const Group& g, std::span<const Share> shares);

/// Additive sharing: s values summing to `secret` mod n.
std::vector<Scalar> additive_split(const Group& g, const Scalar& secret, std::uint32_t s, Rng& rng);

}  // namespace iob::crypto
