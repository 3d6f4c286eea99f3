#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "botwatch/matrix.hpp"

namespace fixtures {

using Bytes = std::vector<std::uint8_t>;

inline void le32(Bytes& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void le16(Bytes& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}
inline void be32(Bytes& b, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void be16(Bytes& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v));
}

inline Bytes global_header(std::uint32_t magic = 0xa1b2c3d4, std::uint32_t link = 1) {
  Bytes b;
  le32(b, magic);
  le16(b, 2);
  le16(b, 4);
  le32(b, 0);
  le32(b, 0);
  le32(b, 65535);
  le32(b, link);
  return b;
}

inline void record(Bytes& file, std::uint32_t sec, std::uint32_t usec, const Bytes& frame) {
  le32(file, sec);
  le32(file, usec);
  le32(file, static_cast<std::uint32_t>(frame.size()));
  le32(file, static_cast<std::uint32_t>(frame.size()));
  file.insert(file.end(), frame.begin(), frame.end());
}

inline void ethernet(Bytes& b, std::uint16_t ethertype = 0x0800) {
  for (int i = 0; i < 6; ++i) b.push_back(0xaa);
  for (int i = 0; i < 6; ++i) b.push_back(0xbb);
  be16(b, ethertype);
}

/// IPv4 header without options; checksum left 0.
inline void ipv4(Bytes& b, std::uint16_t total, std::uint8_t proto, std::uint32_t src, std::uint32_t dst,
                 std::uint8_t ttl = 64) {
  b.push_back(0x45);
  b.push_back(0);
  be16(b, total);
  be16(b, 0x1234);
  be16(b, 0x4000);
  b.push_back(ttl);
  b.push_back(proto);
  be16(b, 0);
  be32(b, src);
  be32(b, dst);
}

inline void tcp(Bytes& b, std::uint16_t sport, std::uint16_t dport, std::uint8_t flags, std::uint16_t window) {
  be16(b, sport);
  be16(b, dport);
  be32(b, 1000);
  be32(b, 0);
  b.push_back(0x50);
  b.push_back(flags);
  be16(b, window);
  be16(b, 0);
  be16(b, 0);
}

inline void udp(Bytes& b, std::uint16_t sport, std::uint16_t dport, std::uint16_t len) {
  be16(b, sport);
  be16(b, dport);
  be16(b, len);
  be16(b, 0);
}

constexpr std::uint32_t kHostA = 0x0A000001;  // 10.0.0.1
constexpr std::uint32_t kHostB = 0x0A000002;  // 10.0.0.2

/// 54-byte Ethernet/IPv4/TCP frame.
inline Bytes tcp_frame(std::uint8_t flags, std::uint16_t sport = 5000, std::uint16_t dport = 80,
                       std::uint32_t src = kHostA, std::uint32_t dst = kHostB) {
  Bytes f;
  ethernet(f);
  ipv4(f, 40, 6, src, dst);
  tcp(f, sport, dport, flags, 29200);
  return f;
}

/// 42-byte Ethernet/IPv4/UDP frame, empty payload.
inline Bytes udp_frame(std::uint16_t sport = 4000, std::uint16_t dport = 53) {
  Bytes f;
  ethernet(f);
  ipv4(f, 28, 17, kHostA, kHostB);
  udp(f, sport, dport, 8);
  return f;
}

/// Ethernet + 16 bytes of an IPv4 header claiming ihl=5: 30 bytes.
inline Bytes short_ipv4_frame() {
  Bytes f;
  ethernet(f);
  ipv4(f, 28, 17, kHostA, kHostB);
  f.resize(30);
  return f;
}

inline void write_file(const std::filesystem::path& p, const Bytes& b) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

inline std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "botwatch_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

inline botwatch::Matrix gaussian(std::size_t n, std::size_t d, std::mt19937_64& rng, double sd = 1.0,
                                 double shift = 0.0) {
  std::normal_distribution<double> g(shift, sd);
  botwatch::Matrix m(n, d);
  for (auto& v : m.data()) v = g(rng);
  return m;
}

}  // namespace fixtures
