#pragma once

#include <cstdint>

#include "botwatch/packet.hpp"

namespace fixtures {

inline botwatch::PacketRecord pkt(double t, std::uint32_t src, std::uint16_t sport, std::uint32_t dst,
                                  std::uint16_t dport, std::uint8_t proto = botwatch::ip_proto::UDP,
                                  std::uint32_t payload = 0, std::uint8_t flags = 0) {
  botwatch::PacketRecord p;
  p.ts_us = static_cast<std::int64_t>(t * 1e6 + (t >= 0 ? 0.5 : -0.5));
  p.src_ip = botwatch::IpAddress::v4(src);
  p.dst_ip = botwatch::IpAddress::v4(dst);
  p.src_port = sport;
  p.dst_port = dport;
  p.protocol = proto;
  p.link_header_len = 14;
  p.ip_header_len = 20;
  p.ttl = 64;
  if (proto == botwatch::ip_proto::TCP) {
    p.l4_header_len = 20;
    p.tcp_flags = flags;
    p.tcp_window = 1024;
  } else if (proto == botwatch::ip_proto::UDP) {
    p.l4_header_len = 8;
  } else {
    p.l4_header_len = 8;
  }
  p.payload_len = payload;
  p.total_len = 14u + 20u + p.l4_header_len + payload;
  return p;
}

}  // namespace fixtures
