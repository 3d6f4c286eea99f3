#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace botwatch {

/// IPv4 or IPv6 address held as opaque bytes. IPv4 occupies the first four
/// bytes; the rest are zero.
class IpAddress {
 public:
  IpAddress() = default;

  static IpAddress v4(std::uint32_t host_order);
  static IpAddress v4(std::span<const std::uint8_t, 4> bytes);
  static IpAddress v6(std::span<const std::uint8_t, 16> bytes);
  /// Parses dotted-quad or RFC 4291 text. Throws Error(InvalidArgument).
  static IpAddress parse(const std::string& text);

  bool is_v6() const noexcept { return v6_; }
  std::span<const std::uint8_t> bytes() const noexcept {
    return {bytes_.data(), v6_ ? 16u : 4u};
  }
  std::string to_string() const;

  friend auto operator<=>(const IpAddress&, const IpAddress&) = default;
  friend bool operator==(const IpAddress&, const IpAddress&) = default;

 private:
  bool v6_ = false;
  std::array<std::uint8_t, 16> bytes_{};
};

enum class LinkType : std::uint32_t {
  Ethernet = 1,
  Raw = 101,
  Ipv4 = 228,
  Ipv6 = 229,
};

namespace tcp_flag {
inline constexpr std::uint8_t FIN = 0x01;
inline constexpr std::uint8_t SYN = 0x02;
inline constexpr std::uint8_t RST = 0x04;
inline constexpr std::uint8_t PSH = 0x08;
inline constexpr std::uint8_t ACK = 0x10;
inline constexpr std::uint8_t URG = 0x20;
inline constexpr std::uint8_t ECE = 0x40;
inline constexpr std::uint8_t CWR = 0x80;
}  // namespace tcp_flag

inline constexpr std::array<const char*, 8> kTcpFlagNames = {
    "fin", "syn", "rst", "psh", "ack", "urg", "ece", "cwr"};

namespace ip_proto {
inline constexpr std::uint8_t ICMP = 1;
inline constexpr std::uint8_t TCP = 6;
inline constexpr std::uint8_t UDP = 17;
inline constexpr std::uint8_t ICMPV6 = 58;
}  // namespace ip_proto

/// Decoded L2/L3/L4 header fields of one captured frame. Payload is measured,
/// never stored.
struct PacketRecord {
  std::int64_t ts_us = 0;  ///< capture time, microseconds since epoch
  IpAddress src_ip;
  IpAddress dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t protocol = 0;
  std::uint16_t link_header_len = 0;
  std::uint16_t ip_header_len = 0;
  std::uint16_t l4_header_len = 0;
  std::uint32_t total_len = 0;  ///< bytes on wire, link header included
  std::uint8_t ttl = 0;
  std::optional<std::uint8_t> tcp_flags;    ///< present iff protocol == TCP
  std::optional<std::uint16_t> tcp_window;  ///< present iff protocol == TCP
  std::uint32_t payload_len = 0;
  std::uint32_t ip_id = 0;  ///< IPv4 identification / IPv6 fragment id; keying only
  bool more_fragments = false;
  /// Bytes of non-leading fragments attributed to this packet's datagram.
  std::uint32_t fragment_bytes = 0;
  std::uint16_t fragment_count = 0;

  double ts_seconds() const noexcept { return static_cast<double>(ts_us) * 1e-6; }
  bool is_tcp() const noexcept { return protocol == ip_proto::TCP; }
  bool has_flag(std::uint8_t flag) const noexcept {
    return tcp_flags && (*tcp_flags & flag) != 0;
  }

  friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

}  // namespace botwatch
