#include "botwatch/pcap.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <chrono>
#include <cstring>
#include <sstream>
#include <thread>

#include "botwatch/error.hpp"

namespace botwatch {

namespace {

constexpr std::uint32_t kMagicMicros = 0xa1b2c3d4;
constexpr std::uint32_t kMagicMicrosSwapped = 0xd4c3b2a1;
constexpr std::uint32_t kMagicNanos = 0xa1b23c4d;
constexpr std::uint32_t kMagicNanosSwapped = 0x4d3cb2a1;
constexpr std::uint32_t kMaxRecordLen = 256 * 1024;

constexpr std::uint16_t kEtherIpv4 = 0x0800;
constexpr std::uint16_t kEtherIpv6 = 0x86dd;
constexpr std::uint16_t kEtherVlan = 0x8100;
constexpr std::uint16_t kEtherQinQ = 0x88a8;

std::uint16_t be16(std::span<const std::uint8_t> b, std::size_t off) {
  return static_cast<std::uint16_t>((b[off] << 8) | b[off + 1]);
}
std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}
void put16(std::vector<std::uint8_t>& b, std::size_t off, std::uint16_t v) {
  b[off] = static_cast<std::uint8_t>(v >> 8);
  b[off + 1] = static_cast<std::uint8_t>(v & 0xff);
}
std::uint32_t bswap32(std::uint32_t v) {
  return ((v & 0xff) << 24) | ((v & 0xff00) << 8) | ((v >> 8) & 0xff00) | (v >> 24);
}

[[noreturn]] void malformed(const std::string& what) {
  fail(ErrorCode::MalformedHeader, "malformed header: " + what);
}

bool is_ipv6_extension(std::uint8_t next) {
  return next == 0 || next == 43 || next == 44 || next == 60 || next == 51;
}

// Fills L4 fields of `p` from bytes [l4, l4_end) of `raw`.
void decode_l4(PacketRecord& p, std::span<const std::uint8_t> raw,
               std::size_t l4, std::size_t l4_end) {
  const std::size_t avail = l4_end > l4 ? l4_end - l4 : 0;
  switch (p.protocol) {
    case ip_proto::TCP: {
      if (avail < 20) malformed("TCP header shorter than 20 bytes");
      const std::size_t off = static_cast<std::size_t>(raw[l4 + 12] >> 4) * 4;
      if (off < 20 || off > avail) malformed("TCP data offset out of range");
      p.src_port = be16(raw, l4);
      p.dst_port = be16(raw, l4 + 2);
      p.tcp_flags = raw[l4 + 13];
      p.tcp_window = be16(raw, l4 + 14);
      p.l4_header_len = static_cast<std::uint16_t>(off);
      break;
    }
    case ip_proto::UDP:
      if (avail < 8) malformed("UDP header shorter than 8 bytes");
      p.src_port = be16(raw, l4);
      p.dst_port = be16(raw, l4 + 2);
      p.l4_header_len = 8;
      break;
    case ip_proto::ICMP:
    case ip_proto::ICMPV6:
      if (avail < 8) malformed("ICMP header shorter than 8 bytes");
      p.l4_header_len = 8;
      break;
    default:
      p.l4_header_len = 0;
      break;
  }
}

DecodedFrame decode_ipv4(std::span<const std::uint8_t> raw, std::size_t l3,
                         std::uint32_t wire_len, PacketRecord p) {
  if (raw.size() < l3 + 20) malformed("frame shorter than IPv4 header");
  if ((raw[l3] >> 4) != 4) malformed("IP version is not 4");
  const std::size_t ihl = static_cast<std::size_t>(raw[l3] & 0x0f) * 4;
  if (ihl < 20 || raw.size() < l3 + ihl) malformed("IPv4 IHL out of range");
  const std::size_t ip_total = be16(raw, l3 + 2);
  if (ip_total < ihl) malformed("IPv4 total length below header length");
  if (l3 + ip_total > wire_len) malformed("IPv4 total length exceeds frame");

  const std::uint16_t frag = be16(raw, l3 + 6);
  const bool more = (frag & 0x2000) != 0;
  const std::uint16_t offset = frag & 0x1fff;
  p.ip_id = be16(raw, l3 + 4);
  p.ttl = raw[l3 + 8];
  p.protocol = raw[l3 + 9];
  p.src_ip = IpAddress::v4(std::span<const std::uint8_t, 4>(raw.subspan(l3 + 12, 4)));
  p.dst_ip = IpAddress::v4(std::span<const std::uint8_t, 4>(raw.subspan(l3 + 16, 4)));
  p.ip_header_len = static_cast<std::uint16_t>(ihl);

  if (offset != 0) {
    return {std::nullopt,
            FragmentContinuation{p.src_ip, p.dst_ip, p.protocol, p.ip_id,
                                 static_cast<std::uint32_t>(ip_total - ihl)}};
  }
  p.more_fragments = more;
  const std::size_t l4 = l3 + ihl;
  const std::size_t l4_end = std::min(raw.size(), l3 + ip_total);
  decode_l4(p, raw, l4, l4_end);
  return {p, std::nullopt};
}

DecodedFrame decode_ipv6(std::span<const std::uint8_t> raw, std::size_t l3,
                         std::uint32_t wire_len, PacketRecord p) {
  if (raw.size() < l3 + 40) malformed("frame shorter than IPv6 header");
  if ((raw[l3] >> 4) != 6) malformed("IP version is not 6");
  const std::size_t payload_field = be16(raw, l3 + 4);
  if (l3 + 40 + payload_field > wire_len) malformed("IPv6 payload length exceeds frame");
  p.ttl = raw[l3 + 7];
  p.src_ip = IpAddress::v6(std::span<const std::uint8_t, 16>(raw.subspan(l3 + 8, 16)));
  p.dst_ip = IpAddress::v6(std::span<const std::uint8_t, 16>(raw.subspan(l3 + 24, 16)));

  std::uint8_t next = raw[l3 + 6];
  std::size_t hdr = 40;
  bool continuation = false;
  for (int depth = 0; is_ipv6_extension(next); ++depth) {
    if (depth > 8) malformed("IPv6 extension chain too long");
    const std::size_t at = l3 + hdr;
    if (raw.size() < at + 8) malformed("truncated IPv6 extension header");
    std::size_t len = 0;
    if (next == 44) {
      len = 8;
      const std::uint16_t off_flags = be16(raw, at + 2);
      p.ip_id = be32(raw, at + 4);
      p.more_fragments = (off_flags & 0x1) != 0;
      continuation = (off_flags >> 3) != 0;
    } else if (next == 51) {
      len = (static_cast<std::size_t>(raw[at + 1]) + 2) * 4;
    } else {
      len = (static_cast<std::size_t>(raw[at + 1]) + 1) * 8;
    }
    next = raw[at];
    hdr += len;
    if (hdr > 40 + payload_field) malformed("IPv6 extension exceeds payload");
  }
  p.protocol = next;
  p.ip_header_len = static_cast<std::uint16_t>(hdr);
  if (continuation) {
    return {std::nullopt,
            FragmentContinuation{p.src_ip, p.dst_ip, p.protocol, p.ip_id,
                                 static_cast<std::uint32_t>(40 + payload_field - hdr)}};
  }
  const std::size_t l4_end = std::min(raw.size(), l3 + 40 + payload_field);
  decode_l4(p, raw, l3 + hdr, l4_end);
  return {p, std::nullopt};
}

}  // namespace

IpAddress IpAddress::v4(std::uint32_t host_order) {
  IpAddress a;
  a.bytes_[0] = static_cast<std::uint8_t>(host_order >> 24);
  a.bytes_[1] = static_cast<std::uint8_t>(host_order >> 16);
  a.bytes_[2] = static_cast<std::uint8_t>(host_order >> 8);
  a.bytes_[3] = static_cast<std::uint8_t>(host_order);
  return a;
}

IpAddress IpAddress::v4(std::span<const std::uint8_t, 4> bytes) {
  IpAddress a;
  std::copy(bytes.begin(), bytes.end(), a.bytes_.begin());
  return a;
}

IpAddress IpAddress::v6(std::span<const std::uint8_t, 16> bytes) {
  IpAddress a;
  a.v6_ = true;
  std::copy(bytes.begin(), bytes.end(), a.bytes_.begin());
  return a;
}

IpAddress IpAddress::parse(const std::string& text) {
  std::array<std::uint8_t, 16> buf{};
  if (inet_pton(AF_INET, text.c_str(), buf.data()) == 1) {
    return v4(std::span<const std::uint8_t, 4>(buf.data(), 4));
  }
  if (inet_pton(AF_INET6, text.c_str(), buf.data()) == 1) {
    return v6(std::span<const std::uint8_t, 16>(buf));
  }
  fail(ErrorCode::InvalidArgument, "not an IP address: '" + text + "'");
}

std::string IpAddress::to_string() const {
  char buf[INET6_ADDRSTRLEN] = {};
  inet_ntop(v6_ ? AF_INET6 : AF_INET, bytes_.data(), buf, sizeof(buf));
  return buf;
}

DecodedFrame decode_frame(std::span<const std::uint8_t> raw, LinkType link,
                          std::uint32_t wire_len, std::int64_t ts_us) {
  if (wire_len == 0) wire_len = static_cast<std::uint32_t>(raw.size());
  if (wire_len < raw.size()) malformed("wire length below captured length");

  PacketRecord p;
  p.ts_us = ts_us;
  p.total_len = wire_len;

  std::size_t l3 = 0;
  int version = 0;
  switch (link) {
    case LinkType::Ethernet: {
      if (raw.size() < 14) malformed("frame shorter than Ethernet header");
      std::uint16_t type = be16(raw, 12);
      l3 = 14;
      if (type == kEtherVlan || type == kEtherQinQ) {
        if (raw.size() < 18) malformed("truncated 802.1Q tag");
        type = be16(raw, 16);
        l3 = 18;
        if (type == kEtherVlan || type == kEtherQinQ) {
          fail(ErrorCode::NonIP, "nested VLAN tags are not decoded");
        }
      }
      if (type == kEtherIpv4) {
        version = 4;
      } else if (type == kEtherIpv6) {
        version = 6;
      } else {
        fail(ErrorCode::NonIP, "ethertype is not IP");
      }
      break;
    }
    case LinkType::Raw:
      if (raw.empty()) malformed("empty raw-IP frame");
      version = raw[0] >> 4;
      if (version != 4 && version != 6) fail(ErrorCode::NonIP, "raw frame is not IP");
      break;
    case LinkType::Ipv4:
      version = 4;
      break;
    case LinkType::Ipv6:
      version = 6;
      break;
    default:
      fail(ErrorCode::UnsupportedLinkType, "unsupported link type");
  }
  p.link_header_len = static_cast<std::uint16_t>(l3);

  DecodedFrame out = version == 4 ? decode_ipv4(raw, l3, wire_len, p)
                                  : decode_ipv6(raw, l3, wire_len, p);
  if (out.packet) {
    PacketRecord& q = *out.packet;
    const std::int64_t payload = static_cast<std::int64_t>(q.total_len) -
                                 q.link_header_len - q.ip_header_len - q.l4_header_len;
    if (payload < 0) malformed("headers exceed wire length");
    q.payload_len = static_cast<std::uint32_t>(payload);
  }
  return out;
}

std::vector<std::uint8_t> encode_frame(const PacketRecord& p) {
  if (p.total_len < std::uint32_t{p.link_header_len} + p.ip_header_len + p.l4_header_len) {
    fail(ErrorCode::InvalidArgument, "record headers exceed total_len");
  }
  if (p.link_header_len != 14 && p.link_header_len != 18) {
    fail(ErrorCode::InvalidArgument, "encode_frame writes Ethernet frames only");
  }
  std::vector<std::uint8_t> f(p.total_len, 0);
  const std::uint8_t dst_mac[6] = {0x02, 0, 0, 0, 0, 0x02};
  const std::uint8_t src_mac[6] = {0x02, 0, 0, 0, 0, 0x01};
  std::copy(std::begin(dst_mac), std::end(dst_mac), f.begin());
  std::copy(std::begin(src_mac), std::end(src_mac), f.begin() + 6);
  const std::uint16_t ether = p.src_ip.is_v6() ? kEtherIpv6 : kEtherIpv4;
  std::size_t l3 = 14;
  if (p.link_header_len == 18) {
    put16(f, 12, kEtherVlan);
    put16(f, 14, 1);
    put16(f, 16, ether);
    l3 = 18;
  } else {
    put16(f, 12, ether);
  }

  const std::size_t ip_len = p.total_len - l3;
  if (!p.src_ip.is_v6()) {
    if (p.ip_header_len < 20 || p.ip_header_len > 60 || p.ip_header_len % 4 != 0) {
      fail(ErrorCode::InvalidArgument, "bad IPv4 header length");
    }
    if (ip_len > 0xffff) fail(ErrorCode::InvalidArgument, "IPv4 datagram too long");
    f[l3] = static_cast<std::uint8_t>(0x40 | (p.ip_header_len / 4));
    put16(f, l3 + 2, static_cast<std::uint16_t>(ip_len));
    put16(f, l3 + 4, static_cast<std::uint16_t>(p.ip_id));
    put16(f, l3 + 6, p.more_fragments ? 0x2000 : 0x0000);
    f[l3 + 8] = p.ttl;
    f[l3 + 9] = p.protocol;
    std::copy_n(p.src_ip.bytes().begin(), 4, f.begin() + static_cast<long>(l3 + 12));
    std::copy_n(p.dst_ip.bytes().begin(), 4, f.begin() + static_cast<long>(l3 + 16));
    for (std::size_t i = l3 + 20; i < l3 + p.ip_header_len; ++i) f[i] = 0x01;  // NOP
    std::uint32_t sum = 0;
    for (std::size_t i = 0; i < p.ip_header_len; i += 2) sum += be16(f, l3 + i);
    while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
    put16(f, l3 + 10, static_cast<std::uint16_t>(~sum & 0xffff));
  } else {
    if (p.ip_header_len != 40) fail(ErrorCode::InvalidArgument, "IPv6 extension headers not encodable");
    if (ip_len - 40 > 0xffff) fail(ErrorCode::InvalidArgument, "IPv6 payload too long");
    f[l3] = 0x60;
    put16(f, l3 + 4, static_cast<std::uint16_t>(ip_len - 40));
    f[l3 + 6] = p.protocol;
    f[l3 + 7] = p.ttl;
    std::copy_n(p.src_ip.bytes().begin(), 16, f.begin() + static_cast<long>(l3 + 8));
    std::copy_n(p.dst_ip.bytes().begin(), 16, f.begin() + static_cast<long>(l3 + 24));
  }

  const std::size_t l4 = l3 + p.ip_header_len;
  switch (p.protocol) {
    case ip_proto::TCP:
      if (p.l4_header_len < 20 || p.l4_header_len > 60 || p.l4_header_len % 4 != 0) {
        fail(ErrorCode::InvalidArgument, "bad TCP header length");
      }
      put16(f, l4, p.src_port);
      put16(f, l4 + 2, p.dst_port);
      f[l4 + 12] = static_cast<std::uint8_t>((p.l4_header_len / 4) << 4);
      f[l4 + 13] = p.tcp_flags.value_or(0);
      put16(f, l4 + 14, p.tcp_window.value_or(0));
      for (std::size_t i = l4 + 20; i < l4 + p.l4_header_len; ++i) f[i] = 0x01;
      break;
    case ip_proto::UDP:
      if (p.l4_header_len != 8) fail(ErrorCode::InvalidArgument, "bad UDP header length");
      put16(f, l4, p.src_port);
      put16(f, l4 + 2, p.dst_port);
      put16(f, l4 + 4, static_cast<std::uint16_t>(p.total_len - l4));
      break;
    case ip_proto::ICMP:
    case ip_proto::ICMPV6:
      if (p.l4_header_len != 8) fail(ErrorCode::InvalidArgument, "bad ICMP header length");
      f[l4] = p.protocol == ip_proto::ICMP ? 8 : 128;  // echo request
      break;
    default:
      if (p.l4_header_len != 0) fail(ErrorCode::InvalidArgument, "unknown L4 protocol with header");
      break;
  }
  return f;
}

// --- PcapFileReader ---------------------------------------------------------

PcapFileReader::PcapFileReader(const std::filesystem::path& path) {
  auto in = std::make_unique<std::ifstream>(path, std::ios::binary);
  if (!*in) fail(ErrorCode::IOError, "cannot open capture '" + path.string() + "'");
  in_ = std::move(in);
  read_global_header();
}

PcapFileReader::PcapFileReader(std::unique_ptr<std::istream> in) : in_(std::move(in)) {
  read_global_header();
}

void PcapFileReader::read_global_header() {
  std::array<std::uint8_t, 24> h{};
  in_->read(reinterpret_cast<char*>(h.data()), h.size());
  const auto got = static_cast<std::size_t>(in_->gcount());
  if (got < 4) fail(ErrorCode::BadMagic, "file too short for a PCAP magic number");
  std::uint32_t magic = 0;
  std::memcpy(&magic, h.data(), 4);
  switch (magic) {
    case kMagicMicros: break;
    case kMagicMicrosSwapped: swapped_ = true; break;
    case kMagicNanos: nanos_ = true; break;
    case kMagicNanosSwapped: swapped_ = nanos_ = true; break;
    default: fail(ErrorCode::BadMagic, "not a PCAP file (bad magic number)");
  }
  if (got < h.size()) fail(ErrorCode::TruncatedHeader, "PCAP global header truncated");
  std::uint32_t snap = 0, network = 0;
  std::memcpy(&snap, h.data() + 16, 4);
  std::memcpy(&network, h.data() + 20, 4);
  if (swapped_) {
    snap = bswap32(snap);
    network = bswap32(network);
  }
  snaplen_ = snap;
  // Upper 16 bits of the link-type field hold FCS metadata.
  network &= 0xffff;
  switch (network) {
    case 1: link_ = LinkType::Ethernet; break;
    case 101: case 12: case 14: link_ = LinkType::Raw; break;
    case 228: link_ = LinkType::Ipv4; break;
    case 229: link_ = LinkType::Ipv6; break;
    default:
      fail(ErrorCode::UnsupportedLinkType,
           "unsupported link type " + std::to_string(network));
  }
}

bool PcapFileReader::next(RawRecord& out) {
  std::array<std::uint8_t, 16> h{};
  in_->read(reinterpret_cast<char*>(h.data()), h.size());
  const auto got = static_cast<std::size_t>(in_->gcount());
  if (got == 0) return false;
  if (got < h.size()) fail(ErrorCode::TruncatedHeader, "PCAP record header truncated");
  std::uint32_t fields[4];
  std::memcpy(fields, h.data(), sizeof(fields));
  if (swapped_) {
    for (auto& f : fields) f = bswap32(f);
  }
  const std::uint32_t incl = fields[2];
  if (incl > kMaxRecordLen) {
    fail(ErrorCode::TruncatedHeader, "PCAP record length " + std::to_string(incl) + " exceeds limit");
  }
  out.bytes.resize(incl);
  in_->read(reinterpret_cast<char*>(out.bytes.data()), incl);
  if (static_cast<std::uint32_t>(in_->gcount()) < incl) {
    fail(ErrorCode::TruncatedHeader, "PCAP record shorter than declared caplen");
  }
  const std::int64_t frac = nanos_ ? fields[1] / 1000 : fields[1];
  out.ts_us = static_cast<std::int64_t>(fields[0]) * 1'000'000 + frac;
  out.wire_len = std::max(fields[3], incl);
  return true;
}

// --- CaptureReader ------------------------------------------------------------

CaptureReader::CaptureReader(const std::filesystem::path& path) : file_(path) {}
CaptureReader::CaptureReader(std::unique_ptr<std::istream> in) : file_(std::move(in)) {}

void CaptureReader::attach_fragment(const FragmentContinuation& frag) {
  ++summary_.fragment_continuations;
  for (auto it = buffer_.rbegin(); it != buffer_.rend(); ++it) {
    PacketRecord& p = it->packet;
    if (p.ip_id == frag.ip_id && p.protocol == frag.protocol &&
        p.src_ip == frag.src_ip && p.dst_ip == frag.dst_ip) {
      p.fragment_bytes += frag.bytes;
      ++p.fragment_count;
      return;
    }
  }
  summary_.orphan_fragment_bytes += frag.bytes;
}

void CaptureReader::fill() {
  RawRecord raw;
  try {
    if (!file_.next(raw)) {
      eof_ = true;
      return;
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::TruncatedHeader) throw;
    eof_ = true;
    pending_error_ = e.what();
    return;
  }
  ++summary_.frames_read;
  DecodedFrame frame;
  try {
    frame = decode_frame(raw.bytes, file_.link_type(), raw.wire_len, raw.ts_us);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NonIP) {
      ++summary_.skipped_non_ip;
      return;
    }
    if (e.code() == ErrorCode::MalformedHeader) {
      ++summary_.malformed;
      return;
    }
    throw;
  }
  if (frame.continuation) {
    attach_fragment(*frame.continuation);
    return;
  }
  PacketRecord& p = *frame.packet;
  if (p.ts_us < released_ts_ || (newest_ts_ != INT64_MIN && p.ts_us < newest_ts_ - kReorderHorizonUs)) {
    ++summary_.dropped_clock_skew;
    return;
  }
  if (p.ts_us < newest_ts_) ++summary_.reordered;
  newest_ts_ = std::max(newest_ts_, p.ts_us);
  buffer_.push_back({std::move(p), seq_++});
  std::push_heap(buffer_.begin(), buffer_.end(), Later{});
}

std::optional<PacketRecord> CaptureReader::next() {
  for (;;) {
    if (!buffer_.empty() &&
        (eof_ || buffer_.front().packet.ts_us <= newest_ts_ - kReorderHorizonUs)) {
      std::pop_heap(buffer_.begin(), buffer_.end(), Later{});
      PacketRecord p = std::move(buffer_.back().packet);
      buffer_.pop_back();
      released_ts_ = p.ts_us;
      ++summary_.decoded;
      return p;
    }
    if (eof_) {
      if (pending_error_) {
        std::string msg = *pending_error_;
        pending_error_.reset();
        fail(ErrorCode::TruncatedHeader, msg);
      }
      return std::nullopt;
    }
    fill();
  }
}

std::vector<PacketRecord> read_capture(const std::filesystem::path& path,
                                       CaptureSummary* summary) {
  CaptureReader reader(path);
  std::vector<PacketRecord> out;
  while (auto p = reader.next()) out.push_back(std::move(*p));
  if (summary) *summary = reader.summary();
  return out;
}

void replay_capture(const std::filesystem::path& path, double speed,
                    const std::function<void(const PacketRecord&)>& sink) {
  CaptureReader reader(path);
  const auto wall_start = std::chrono::steady_clock::now();
  std::optional<std::int64_t> first_ts;
  while (auto p = reader.next()) {
    if (speed > 0) {
      if (!first_ts) first_ts = p->ts_us;
      const auto offset = std::chrono::microseconds(
          static_cast<std::int64_t>(static_cast<double>(p->ts_us - *first_ts) / speed));
      std::this_thread::sleep_until(wall_start + offset);
    }
    sink(*p);
  }
}

// --- PcapWriter ---------------------------------------------------------------

PcapWriter::PcapWriter(const std::filesystem::path& path, std::uint32_t snaplen)
    : out_(path, std::ios::binary | std::ios::trunc), snaplen_(snaplen) {
  if (!out_) fail(ErrorCode::IOError, "cannot create '" + path.string() + "'");
  const std::uint32_t header[6] = {kMagicMicros, 0x00040002u, 0, 0, snaplen_, 1};
  // Version is two u16 fields (major 2, minor 4) packed little-endian.
  out_.write(reinterpret_cast<const char*>(header), sizeof(header));
  if (!out_) fail(ErrorCode::IOError, "write failed on '" + path.string() + "'");
}

void PcapWriter::write_raw(std::int64_t ts_us, std::span<const std::uint8_t> frame,
                           std::uint32_t wire_len) {
  const auto incl = static_cast<std::uint32_t>(std::min<std::size_t>(frame.size(), snaplen_));
  const std::uint32_t rec[4] = {static_cast<std::uint32_t>(ts_us / 1'000'000),
                                static_cast<std::uint32_t>(ts_us % 1'000'000), incl,
                                std::max(wire_len, incl)};
  out_.write(reinterpret_cast<const char*>(rec), sizeof(rec));
  out_.write(reinterpret_cast<const char*>(frame.data()), incl);
  if (!out_) fail(ErrorCode::IOError, "PCAP write failed");
}

void PcapWriter::write(const PacketRecord& p) {
  const auto frame = encode_frame(p);
  write_raw(p.ts_us, frame, p.total_len);
}

void PcapWriter::close() {
  out_.close();
  if (out_.fail()) fail(ErrorCode::IOError, "PCAP close failed");
}

void write_pcap(const std::filesystem::path& path, std::span<const PacketRecord> packets) {
  PcapWriter w(path);
  for (const auto& p : packets) w.write(p);
  w.close();
}

}  // namespace botwatch
