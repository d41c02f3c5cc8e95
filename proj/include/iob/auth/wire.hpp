#pragma once

// Identity-layer wire messages. Layout is documented in docs/wire-format.md;
// every frame is u32 body length | u8 version | u8 type | fields.

#include <cstdint>
#include <variant>

#include "iob/auth/zkp.hpp"
#include "iob/util/bytes.hpp"

namespace iob::auth::wire {

inline constexpr std::uint8_t kVersion = 1;

enum class MsgType : std::uint8_t {
  auth_request = 0x01,
  auth_result = 0x02,
  token = 0x03,
  xdomain_request = 0x04,
};

struct AuthRequest {
  GroupElement commitment;  // V
  std::uint32_t share_index = 0;
  Scalar c_share;
  Scalar r_share;
  GroupElement pu;
};

struct AuthResult {
  bool accept = false;
};

struct Token {
  Digest digest{};
  SimTime timestamp = 0;
};

struct XDomainRequest {
  Digest digest{};
  GroupElement pu;
};

using Message = std::variant<AuthRequest, AuthResult, Token, XDomainRequest>;

Bytes encode(const AuthRequest& m);
Bytes encode(const AuthResult& m);
Bytes encode(const Token& m);
Bytes encode(const XDomainRequest& m);

/// Throws DecodeError on malformed frames, unknown types, non-member group
/// elements or non-canonical scalars.
Message decode(const Group& g, std::span<const std::uint8_t> frame);

}  // namespace iob::auth::wire
