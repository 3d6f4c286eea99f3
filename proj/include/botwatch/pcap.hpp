#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "botwatch/packet.hpp"

namespace botwatch {

/// Result of decoding one frame: a record for IP packets that carry an L4
/// header (fragment offset 0), or a continuation note for later fragments.
struct FragmentContinuation {
  IpAddress src_ip;
  IpAddress dst_ip;
  std::uint8_t protocol = 0;
  std::uint32_t ip_id = 0;
  std::uint32_t bytes = 0;
};

struct DecodedFrame {
  std::optional<PacketRecord> packet;
  std::optional<FragmentContinuation> continuation;
};

/// Decodes Ethernet (one 802.1Q level) or raw-IP frames. `wire_len` is the
/// original frame length; 0 means raw.size(). Reads at most raw.size() bytes.
/// Throws Error(NonIP) for non-IP frames and Error(MalformedHeader) when
/// length fields disagree with the captured bytes.
DecodedFrame decode_frame(std::span<const std::uint8_t> raw, LinkType link,
                          std::uint32_t wire_len = 0, std::int64_t ts_us = 0);

/// Serializes the headers described by `p` into an Ethernet II frame with
/// zero-filled payload. Inverse of decode_frame for records it can express.
std::vector<std::uint8_t> encode_frame(const PacketRecord& p);

struct CaptureSummary {
  std::uint64_t frames_read = 0;
  std::uint64_t decoded = 0;
  std::uint64_t skipped_non_ip = 0;
  std::uint64_t malformed = 0;
  std::uint64_t fragment_continuations = 0;
  std::uint64_t orphan_fragment_bytes = 0;
  std::uint64_t reordered = 0;
  std::uint64_t dropped_clock_skew = 0;
};

struct RawRecord {
  std::int64_t ts_us = 0;
  std::uint32_t wire_len = 0;
  std::vector<std::uint8_t> bytes;
};

/// Low-level PCAP record reader: validates the global header and yields raw
/// frames in file order. Nanosecond captures are truncated to microseconds.
class PcapFileReader {
 public:
  explicit PcapFileReader(const std::filesystem::path& path);
  explicit PcapFileReader(std::unique_ptr<std::istream> in);

  LinkType link_type() const noexcept { return link_; }
  /// Returns false at clean end of file. Throws Error(TruncatedHeader).
  bool next(RawRecord& out);

 private:
  void read_global_header();

  std::unique_ptr<std::istream> in_;
  bool swapped_ = false;
  bool nanos_ = false;
  LinkType link_ = LinkType::Ethernet;
  std::uint32_t snaplen_ = 0;
};

/// Streaming PacketRecord source over one PCAP file. Records leave in
/// timestamp order via a bounded reorder buffer; packets older than the
/// horizon are dropped and counted.
class CaptureReader {
 public:
  static constexpr std::int64_t kReorderHorizonUs = 1'000'000;

  explicit CaptureReader(const std::filesystem::path& path);
  explicit CaptureReader(std::unique_ptr<std::istream> in);

  /// Next record, or nullopt at end. A truncated file first yields everything
  /// decoded before the truncation, then throws Error(TruncatedHeader).
  std::optional<PacketRecord> next();

  const CaptureSummary& summary() const noexcept { return summary_; }
  LinkType link_type() const noexcept { return file_.link_type(); }

 private:
  struct Pending {
    PacketRecord packet;
    std::uint64_t seq;
  };
  struct Later {
    bool operator()(const Pending& a, const Pending& b) const {
      return a.packet.ts_us != b.packet.ts_us ? a.packet.ts_us > b.packet.ts_us
                                              : a.seq > b.seq;
    }
  };

  void fill();
  void attach_fragment(const FragmentContinuation& frag);

  PcapFileReader file_;
  CaptureSummary summary_;
  std::vector<Pending> buffer_;  // heap ordered by Later
  std::uint64_t seq_ = 0;
  std::int64_t newest_ts_ = INT64_MIN;
  std::int64_t released_ts_ = INT64_MIN;
  bool eof_ = false;
  std::optional<std::string> pending_error_;
};

/// Reads a whole capture. Throws on truncation like CaptureReader::next.
std::vector<PacketRecord> read_capture(const std::filesystem::path& path,
                                       CaptureSummary* summary = nullptr);

/// Replays a capture through a callback, sleeping to honor inter-arrival
/// gaps scaled by 1/speed. speed <= 0 replays as fast as possible.
void replay_capture(const std::filesystem::path& path, double speed,
                    const std::function<void(const PacketRecord&)>& sink);

/// Writes microsecond-resolution Ethernet PCAP files.
class PcapWriter {
 public:
  explicit PcapWriter(const std::filesystem::path& path,
                      std::uint32_t snaplen = 65535);
  void write(const PacketRecord& p);
  void write_raw(std::int64_t ts_us, std::span<const std::uint8_t> frame,
                 std::uint32_t wire_len);
  void close();

 private:
  std::ofstream out_;
  std::uint32_t snaplen_;
};

/// Writes `packets` (timestamp-ordered) to a new PCAP file.
void write_pcap(const std::filesystem::path& path,
                std::span<const PacketRecord> packets);

}  // namespace botwatch
