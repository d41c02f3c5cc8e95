#include "iob/auth/wire.hpp"

namespace iob::auth::wire {

namespace {

Bytes frame(MsgType type, const ByteWriter& body) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(body.size() + 2));
  w.u8(kVersion);
  w.u8(static_cast<std::uint8_t>(type));
  w.raw(body.bytes());
  return std::move(w).take();
}

}  // namespace

Bytes encode(const AuthRequest& m) {
  ByteWriter b;
  b.field(m.commitment.encoding());
  b.u32(m.share_index);
  b.field(m.c_share.le_bytes());
  b.field(m.r_share.le_bytes());
  b.field(m.pu.encoding());
  return frame(MsgType::auth_request, b);
}

Bytes encode(const AuthResult& m) {
  ByteWriter b;
  b.u8(m.accept ? 1 : 0);
  return frame(MsgType::auth_result, b);
}

Bytes encode(const Token& m) {
  ByteWriter b;
  b.raw(m.digest);
  b.u64(static_cast<std::uint64_t>(m.timestamp));
  return frame(MsgType::token, b);
}

Bytes encode(const XDomainRequest& m) {
  ByteWriter b;
  b.raw(m.digest);
  b.field(m.pu.encoding());
  return frame(MsgType::xdomain_request, b);
}

Message decode(const Group& g, std::span<const std::uint8_t> bytes) {
  ByteReader outer(bytes);
  const std::uint32_t len = outer.u32();
  ByteReader r(outer.raw(len));
  outer.expect_done();
  if (r.u8() != kVersion) throw DecodeError("unsupported wire version");
  const auto type = static_cast<MsgType>(r.u8());
  Message out;
  switch (type) {
    case MsgType::auth_request: {
      AuthRequest m;
      m.commitment = g.decode_element(r.field());
      m.share_index = r.u32();
      m.c_share = g.decode_scalar(r.field());
      m.r_share = g.decode_scalar(r.field());
      m.pu = g.decode_element(r.field());
      out = m;
      break;
    }
    case MsgType::auth_result: {
      std::uint8_t v = r.u8();
      if (v > 1) throw DecodeError("auth result flag must be 0 or 1");
      out = AuthResult{v == 1};
      break;
    }
    case MsgType::token: {
      Token m;
      m.digest = r.fixed<32>();
      m.timestamp = static_cast<SimTime>(r.u64());
      out = m;
      break;
    }
    case MsgType::xdomain_request: {
      XDomainRequest m;
      m.digest = r.fixed<32>();
      m.pu = g.decode_element(r.field());
      out = m;
      break;
    }
    default:
      throw DecodeError("unknown identity message type");
  }
  r.expect_done();
  return out;
}

}  // namespace iob::auth::wire
