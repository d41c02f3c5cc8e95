#include "iob/crypto/hash.hpp"

#include <stdexcept>

namespace iob::crypto {

void ensure_sodium() {
  static const bool ok = sodium_init() >= 0;
  if (!ok) throw std::runtime_error("libsodium initialisation failed");
}

Sha256::Sha256() {
  ensure_sodium();
  crypto_hash_sha256_init(&st_);
}

Sha256& Sha256::update(std::span<const std::uint8_t> data) {
  crypto_hash_sha256_update(&st_, data.data(), data.size());
  return *this;
}

Sha256& Sha256::update(std::string_view s) {
  crypto_hash_sha256_update(&st_, reinterpret_cast<const unsigned char*>(s.data()), s.size());
  return *this;
}

Sha256& Sha256::update_u64(std::uint64_t v) {
  std::uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
  return update(b);
}

Sha256& Sha256::update_u32(std::uint32_t v) {
  std::uint8_t b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(v >> (24 - 8 * i));
  return update(b);
}

Digest Sha256::finish() {
  Digest d{};
  crypto_hash_sha256_final(&st_, d.data());
  return d;
}

Digest sha256(std::span<const std::uint8_t> data) { return Sha256().update(data).finish(); }

Digest hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> msg) {
  ensure_sodium();
  crypto_auth_hmacsha256_state st;
  crypto_auth_hmacsha256_init(&st, key.data(), key.size());
  crypto_auth_hmacsha256_update(&st, msg.data(), msg.size());
  Digest d{};
  crypto_auth_hmacsha256_final(&st, d.data());
  return d;
}

}  // namespace iob::crypto
