#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "botwatch/packet.hpp"

namespace botwatch {

enum class DirectionMode { Unidirectional, Bidirectional };

struct FlowKey {
  IpAddress src_ip;
  IpAddress dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t protocol = 0;
  DirectionMode mode = DirectionMode::Unidirectional;

  /// Same key with endpoints swapped.
  FlowKey reversed() const;

  /// Bidirectional keys compare direction-insensitively.
  friend bool operator==(const FlowKey& a, const FlowKey& b);
};

struct FlowKeyHash {
  std::size_t operator()(const FlowKey& k) const noexcept;
};

/// Pure key derivation. Bidirectional keys order endpoints by (ip, port) so
/// that a packet and its reply map to the same key.
FlowKey flow_key_of(const PacketRecord& p, DirectionMode mode);

enum class Termination { TcpFin, TcpRst, IdleTimeout, WindowClose, CaptureEnd };
std::string to_string(Termination t);

/// Running min/max/sum/sum-of-squares.
struct RunningStats {
  std::uint64_t n = 0;
  double min = 0.0;
  double max = 0.0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double v) noexcept;
  double mean() const noexcept { return n ? sum / static_cast<double>(n) : 0.0; }
  /// Population standard deviation; 0 when n < 2.
  double stddev() const noexcept;
};

/// Per-direction accumulators.
struct DirectionStats {
  std::uint64_t pkt_count = 0;
  std::uint64_t byte_count = 0;
  std::uint64_t header_bytes = 0;
  std::uint64_t payload_bytes = 0;
  std::uint64_t zero_payload_pkts = 0;
  std::uint64_t fragment_bytes = 0;
  std::uint64_t fragment_count = 0;
  RunningStats pkt_len;
  RunningStats payload_len;
  RunningStats iat;  ///< seconds between consecutive packets of this direction
  RunningStats ttl;
  RunningStats ip_header_len;
  RunningStats l4_header_len;
  RunningStats tcp_window;
  std::uint64_t short_iats = 0;  ///< IAT < 10 ms
  std::uint64_t long_iats = 0;   ///< IAT > 1 s
  double first_iat = 0.0;
  std::array<std::uint32_t, 8> flag_counts{};  ///< FIN,SYN,RST,PSH,ACK,URG,ECE,CWR
  std::optional<std::uint16_t> init_window;
  std::uint32_t first_pkt_len = 0;
  std::uint32_t last_pkt_len = 0;
  std::int64_t first_ts_us = 0;
  std::int64_t last_ts_us = 0;
  bool fin_seen = false;

  void add(const PacketRecord& p);
};

/// Gap between packets above which a flow is considered idle for the
/// active/idle period aggregates.
inline constexpr double kActivityGapSeconds = 1.0;

struct FlowRecord {
  FlowKey key;  ///< oriented: src is the endpoint that sent the first packet
  double window_start = 0.0;
  double window_end = 0.0;
  double duration = 0.0;
  DirectionStats fwd;
  DirectionStats bwd;  ///< empty in unidirectional mode
  RunningStats flow_iat;
  RunningStats active;  ///< durations of activity periods (s)
  RunningStats idle;    ///< gaps longer than kActivityGapSeconds (s)
  Termination termination = Termination::CaptureEnd;
  std::uint64_t sequence = 0;  ///< creation order within one meter

  std::uint64_t pkt_count() const noexcept { return fwd.pkt_count + bwd.pkt_count; }
};

struct MeterConfig {
  DirectionMode mode = DirectionMode::Unidirectional;
  /// Tumbling window length in seconds; nullopt is the exporter "default"
  /// mode where only idle timeout, TCP termination and end-of-stream cut.
  std::optional<double> tw_seconds;
  double idle_timeout = 15.0;
  std::size_t shards = 16;
};

struct MeterStats {
  std::uint64_t packets = 0;
  std::uint64_t dropped_clock_skew = 0;
  std::uint64_t flows_emitted = 0;
  std::size_t peak_live_flows = 0;
};

/// Streaming flow meter. Packets must arrive in non-decreasing time order;
/// older packets are dropped and counted as clock skew. Memory is
/// proportional to live flows.
class FlowMeter {
 public:
  using Sink = std::function<void(FlowRecord&&)>;

  FlowMeter(MeterConfig cfg, Sink sink);

  void push(const PacketRecord& p);
  /// Emits every live flow with Termination::CaptureEnd.
  void flush();

  const MeterStats& stats() const noexcept { return stats_; }
  std::size_t live_flows() const noexcept;

 private:
  struct LiveFlow {
    FlowRecord rec;
    double active_start = 0.0;
  };
  using Shard = std::unordered_map<FlowKey, LiveFlow, FlowKeyHash>;

  void emit(LiveFlow&& f, Termination why);
  void expire(double now);
  bool expired(const LiveFlow& f, double now, Termination& why) const;
  LiveFlow start_flow(const PacketRecord& p);
  static void accumulate(LiveFlow& f, const PacketRecord& p, bool forward);

  MeterConfig cfg_;
  Sink sink_;
  std::vector<Shard> shards_;
  MeterStats stats_;
  std::int64_t last_ts_us_ = INT64_MIN;
  double next_scan_ = 0.0;
  std::uint64_t next_sequence_ = 0;
};

/// Meters a whole packet sequence and returns flows in creation order.
std::vector<FlowRecord> meter_all(const std::vector<PacketRecord>& packets,
                                  const MeterConfig& cfg,
                                  MeterStats* stats = nullptr);

}  // namespace botwatch
