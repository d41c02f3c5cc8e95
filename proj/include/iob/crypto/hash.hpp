#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

#include <sodium.h>

namespace iob::crypto {

using Digest = std::array<std::uint8_t, 32>;

void ensure_sodium();

/// Incremental SHA-256. H throughout the stack is SHA-256.
class Sha256 {
 public:
  Sha256();
  Sha256& update(std::span<const std::uint8_t> data);
  Sha256& update(std::string_view s);
  Sha256& update_u64(std::uint64_t v);  // big-endian
  Sha256& update_u32(std::uint32_t v);
  Digest finish();

 private:
  crypto_hash_sha256_state st_;
};

Digest sha256(std::span<const std::uint8_t> data);

/// HMAC-SHA256, used as the simulator's lightweight message signature.
Digest hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> msg);

}  // namespace iob::crypto
