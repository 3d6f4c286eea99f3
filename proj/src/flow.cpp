#include "botwatch/flow.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace botwatch {

namespace {

bool endpoint_less(const IpAddress& ip_a, std::uint16_t port_a, const IpAddress& ip_b,
                   std::uint16_t port_b) {
  return std::tie(ip_a, port_a) < std::tie(ip_b, port_b);
}

FlowKey canonical(const FlowKey& k) {
  if (k.mode == DirectionMode::Bidirectional &&
      endpoint_less(k.dst_ip, k.dst_port, k.src_ip, k.src_port)) {
    return k.reversed();
  }
  return k;
}

std::size_t mix(std::size_t h, std::size_t v) noexcept {
  return h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
}

std::size_t hash_ip(const IpAddress& ip) noexcept {
  std::size_t h = ip.is_v6() ? 6 : 4;
  for (auto b : ip.bytes()) h = h * 131 + b;
  return h;
}

double us_to_s(std::int64_t us) { return static_cast<double>(us) * 1e-6; }

}  // namespace

FlowKey FlowKey::reversed() const {
  return FlowKey{dst_ip, src_ip, dst_port, src_port, protocol, mode};
}

bool operator==(const FlowKey& a, const FlowKey& b) {
  if (a.mode != b.mode || a.protocol != b.protocol) return false;
  const bool same = a.src_ip == b.src_ip && a.dst_ip == b.dst_ip &&
                    a.src_port == b.src_port && a.dst_port == b.dst_port;
  if (same || a.mode == DirectionMode::Unidirectional) return same;
  return a.src_ip == b.dst_ip && a.dst_ip == b.src_ip && a.src_port == b.dst_port &&
         a.dst_port == b.src_port;
}

std::size_t FlowKeyHash::operator()(const FlowKey& key) const noexcept {
  const FlowKey k = canonical(key);
  std::size_t h = static_cast<std::size_t>(k.mode);
  h = mix(h, hash_ip(k.src_ip));
  h = mix(h, hash_ip(k.dst_ip));
  h = mix(h, k.src_port);
  h = mix(h, k.dst_port);
  return mix(h, k.protocol);
}

FlowKey flow_key_of(const PacketRecord& p, DirectionMode mode) {
  return canonical(FlowKey{p.src_ip, p.dst_ip, p.src_port, p.dst_port, p.protocol, mode});
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::TcpFin: return "tcp_fin";
    case Termination::TcpRst: return "tcp_rst";
    case Termination::IdleTimeout: return "idle_timeout";
    case Termination::WindowClose: return "window_close";
    case Termination::CaptureEnd: return "capture_end";
  }
  return "unknown";
}

void RunningStats::add(double v) noexcept {
  if (n == 0) {
    min = max = v;
  } else {
    min = std::min(min, v);
    max = std::max(max, v);
  }
  ++n;
  sum += v;
  sum_sq += v * v;
}

double RunningStats::stddev() const noexcept {
  if (n < 2) return 0.0;
  const double m = mean();
  const double var = sum_sq / static_cast<double>(n) - m * m;
  return var > 0.0 ? std::sqrt(var) : 0.0;
}

void DirectionStats::add(const PacketRecord& p) {
  if (pkt_count > 0) {
    const double gap = us_to_s(p.ts_us - last_ts_us);
    iat.add(gap);
    if (iat.n == 1) first_iat = gap;
    if (gap < 0.010) ++short_iats;
    if (gap > 1.0) ++long_iats;
  } else {
    first_ts_us = p.ts_us;
    first_pkt_len = p.total_len;
  }
  last_ts_us = p.ts_us;
  last_pkt_len = p.total_len;
  ++pkt_count;
  byte_count += p.total_len;
  const std::uint32_t header = p.link_header_len + p.ip_header_len + p.l4_header_len;
  header_bytes += header;
  payload_bytes += p.payload_len;
  if (p.payload_len == 0) ++zero_payload_pkts;
  fragment_bytes += p.fragment_bytes;
  fragment_count += p.fragment_count;
  pkt_len.add(p.total_len);
  payload_len.add(p.payload_len);
  ttl.add(p.ttl);
  ip_header_len.add(p.ip_header_len);
  l4_header_len.add(p.l4_header_len);
  if (p.tcp_flags) {
    for (int bit = 0; bit < 8; ++bit) {
      if (*p.tcp_flags & (1u << bit)) ++flag_counts[static_cast<std::size_t>(bit)];
    }
    if (*p.tcp_flags & tcp_flag::FIN) fin_seen = true;
  }
  if (p.tcp_window) {
    tcp_window.add(*p.tcp_window);
    if (!init_window) init_window = p.tcp_window;
  }
}

FlowMeter::FlowMeter(MeterConfig cfg, Sink sink)
    : cfg_(cfg), sink_(std::move(sink)), shards_(std::max<std::size_t>(cfg.shards, 1)) {}

std::size_t FlowMeter::live_flows() const noexcept {
  std::size_t n = 0;
  for (const auto& s : shards_) n += s.size();
  return n;
}

FlowMeter::LiveFlow FlowMeter::start_flow(const PacketRecord& p) {
  LiveFlow f;
  f.rec.key = FlowKey{p.src_ip, p.dst_ip, p.src_port, p.dst_port, p.protocol, cfg_.mode};
  f.rec.window_start = us_to_s(p.ts_us);
  f.rec.sequence = next_sequence_++;
  f.active_start = f.rec.window_start;
  return f;
}

void FlowMeter::accumulate(LiveFlow& f, const PacketRecord& p, bool forward) {
  FlowRecord& r = f.rec;
  if (r.pkt_count() > 0) {
    const std::int64_t last_us = std::max(r.fwd.last_ts_us, r.bwd.pkt_count ? r.bwd.last_ts_us : INT64_MIN);
    const double gap = us_to_s(p.ts_us - last_us);
    r.flow_iat.add(gap);
    if (gap > kActivityGapSeconds) {
      r.active.add(us_to_s(last_us) - f.active_start);
      r.idle.add(gap);
      f.active_start = us_to_s(p.ts_us);
    }
  }
  (forward ? r.fwd : r.bwd).add(p);
}

bool FlowMeter::expired(const LiveFlow& f, double now, Termination& why) const {
  const std::int64_t last_us =
      std::max(f.rec.fwd.last_ts_us, f.rec.bwd.pkt_count ? f.rec.bwd.last_ts_us : INT64_MIN);
  const double idle_at = us_to_s(last_us) + cfg_.idle_timeout;
  const double window_at =
      cfg_.tw_seconds ? f.rec.window_start + *cfg_.tw_seconds : INFINITY;
  if (now >= window_at && window_at <= idle_at) {
    why = Termination::WindowClose;
    return true;
  }
  if (now > idle_at) {
    why = Termination::IdleTimeout;
    return true;
  }
  return false;
}

void FlowMeter::emit(LiveFlow&& f, Termination why) {
  FlowRecord& r = f.rec;
  const std::int64_t first_us = r.fwd.first_ts_us;
  const std::int64_t last_us = std::max(r.fwd.last_ts_us, r.bwd.pkt_count ? r.bwd.last_ts_us : INT64_MIN);
  r.duration = us_to_s(last_us - first_us);
  r.active.add(us_to_s(last_us) - f.active_start);
  r.termination = why;
  r.window_end = why == Termination::WindowClose ? r.window_start + *cfg_.tw_seconds
                                                 : us_to_s(last_us);
  ++stats_.flows_emitted;
  sink_(std::move(r));
}

void FlowMeter::expire(double now) {
  for (auto& shard : shards_) {
    for (auto it = shard.begin(); it != shard.end();) {
      Termination why{};
      if (expired(it->second, now, why)) {
        LiveFlow f = std::move(it->second);
        it = shard.erase(it);
        emit(std::move(f), why);
      } else {
        ++it;
      }
    }
  }
}

void FlowMeter::push(const PacketRecord& p) {
  if (p.ts_us < last_ts_us_) {
    ++stats_.dropped_clock_skew;
    return;
  }
  last_ts_us_ = p.ts_us;
  ++stats_.packets;
  const double now = us_to_s(p.ts_us);
  if (now >= next_scan_) {
    expire(now);
    double interval = std::min(1.0, cfg_.idle_timeout);
    if (cfg_.tw_seconds) interval = std::min(interval, *cfg_.tw_seconds);
    next_scan_ = now + interval;
  }

  const FlowKey key = flow_key_of(p, cfg_.mode);
  Shard& shard = shards_[FlowKeyHash{}(key) % shards_.size()];
  auto it = shard.find(key);
  if (it != shard.end()) {
    Termination why{};
    if (expired(it->second, now, why)) {
      LiveFlow f = std::move(it->second);
      shard.erase(it);
      emit(std::move(f), why);
      it = shard.end();
    }
  }
  if (it == shard.end()) {
    it = shard.emplace(key, start_flow(p)).first;
    stats_.peak_live_flows = std::max(stats_.peak_live_flows, live_flows());
  }

  LiveFlow& f = it->second;
  const bool forward = cfg_.mode == DirectionMode::Unidirectional ||
                       (p.src_ip == f.rec.key.src_ip && p.src_port == f.rec.key.src_port);
  accumulate(f, p, forward);

  if (p.is_tcp()) {
    std::optional<Termination> cut;
    if (p.has_flag(tcp_flag::RST)) {
      cut = Termination::TcpRst;
    } else if (p.has_flag(tcp_flag::FIN)) {
      const bool done = cfg_.mode == DirectionMode::Unidirectional ||
                        (f.rec.fwd.fin_seen && f.rec.bwd.fin_seen);
      if (done) cut = Termination::TcpFin;
    }
    if (cut) {
      LiveFlow done = std::move(f);
      shard.erase(it);
      emit(std::move(done), *cut);
    }
  }
}

void FlowMeter::flush() {
  for (auto& shard : shards_) {
    std::vector<LiveFlow> flows;
    flows.reserve(shard.size());
    for (auto& [k, f] : shard) flows.push_back(std::move(f));
    shard.clear();
    std::sort(flows.begin(), flows.end(), [](const LiveFlow& a, const LiveFlow& b) {
      return a.rec.sequence < b.rec.sequence;
    });
    for (auto& f : flows) emit(std::move(f), Termination::CaptureEnd);
  }
}

std::vector<FlowRecord> meter_all(const std::vector<PacketRecord>& packets,
                                  const MeterConfig& cfg, MeterStats* stats) {
  std::vector<FlowRecord> out;
  FlowMeter meter(cfg, [&](FlowRecord&& r) { out.push_back(std::move(r)); });
  for (const auto& p : packets) meter.push(p);
  meter.flush();
  std::sort(out.begin(), out.end(), [](const FlowRecord& a, const FlowRecord& b) {
    return a.sequence < b.sequence;
  });
  if (stats) *stats = meter.stats();
  return out;
}

}  // namespace botwatch
