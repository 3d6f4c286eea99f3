#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "botwatch/error.hpp"
#include "botwatch/flow.hpp"
#include "botwatch/pcap.hpp"
#include "botwatch/synth.hpp"

namespace botwatch {

namespace {

[[noreturn]] void invalid(const std::string& what) { fail(ErrorCode::InvalidSpec, what); }

void require(bool ok, const std::string& what) {
  if (!ok) invalid(what);
}

}  // namespace

void ScenarioSpec::validate() const {
  require(std::isfinite(duration_s) && duration_s > 0.0, "duration_s must be positive");
  require(devices >= 1 && devices <= 200, "devices must be in [1, 200]");
  require(infected <= devices, "infected exceeds devices");
  const bool any_attack = scan.enabled || download.enabled || c2_beacon.enabled || heartbeat.enabled || ddos.enabled;
  require(!any_attack || infected >= 1, "malicious stages need at least one infected device");
  require(telemetry.interval_s > 0.0, "telemetry.interval_s must be positive");
  if (media.enabled) {
    require(media.cameras <= devices, "media.cameras exceeds devices");
    require(media.rate_pps > 0.0 && media.burst_s > 0.0 && media.gap_s >= 0.0, "media rates must be positive");
  }
  auto start_ok = [&](double s) { return std::isfinite(s) && s >= 0.0 && s < duration_s; };
  if (scan.enabled) {
    require(start_ok(scan.start_s), "scan.start_s outside the capture");
    require(scan.targets >= 1 && scan.rate_pps > 0.0, "scan needs targets and a positive rate");
  }
  if (download.enabled) {
    require(start_ok(download.start_s), "download.start_s outside the capture");
    require(download.bytes >= 1, "download.bytes must be positive");
  }
  if (c2_beacon.enabled) {
    require(start_ok(c2_beacon.start_s), "c2_beacon.start_s outside the capture");
    require(c2_beacon.interval_s > 0.0 && c2_beacon.jitter >= 0.0 && c2_beacon.jitter < 1.0,
            "c2_beacon interval must be positive and jitter in [0, 1)");
  }
  if (heartbeat.enabled) {
    require(start_ok(heartbeat.start_s), "heartbeat.start_s outside the capture");
    require(heartbeat.interval_s > 0.0, "heartbeat.interval_s must be positive");
    require(heartbeat.payload >= 1 && heartbeat.payload <= 8, "heartbeat.payload must be 1..8 bytes");
  }
  if (ddos.enabled) {
    require(start_ok(ddos.start_s), "ddos.start_s outside the capture");
    require(ddos.duration_s > 0.0 && ddos.rate_pps > 0.0, "ddos needs a positive duration and rate");
    require(ddos.payload >= 1 && ddos.payload <= 1472, "ddos.payload must be 1..1472 bytes");
  }
}

ScenarioSpec benign_scenario(double duration_s, std::uint64_t seed) {
  ScenarioSpec s;
  s.duration_s = duration_s;
  s.seed = seed;
  s.infected = 0;
  return s;
}

ScenarioSpec mixed_scenario(double duration_s, std::uint64_t seed) {
  ScenarioSpec s;
  s.duration_s = duration_s;
  s.seed = seed;
  s.scan.enabled = s.download.enabled = s.c2_beacon.enabled = s.heartbeat.enabled = s.ddos.enabled = true;
  s.ddos.start_s = std::min(s.ddos.start_s, duration_s / 2);
  return s;
}

#define BW_FIELDS_TELEMETRY(X) X(enabled) X(interval_s)
#define BW_FIELDS_MEDIA(X) X(enabled) X(cameras) X(rate_pps) X(burst_s) X(gap_s)
#define BW_FIELDS_SCAN(X) X(enabled) X(start_s) X(targets) X(rate_pps)
#define BW_FIELDS_DOWNLOAD(X) X(enabled) X(start_s) X(bytes)
#define BW_FIELDS_BEACON(X) X(enabled) X(start_s) X(interval_s) X(jitter)
#define BW_FIELDS_HEARTBEAT(X) X(enabled) X(start_s) X(interval_s) X(payload)
#define BW_FIELDS_DDOS(X) X(enabled) X(start_s) X(duration_s) X(rate_pps) X(payload)

nlohmann::json scenario_to_json(const ScenarioSpec& s) {
  nlohmann::json j = {{"duration_s", s.duration_s}, {"devices", s.devices}, {"infected", s.infected}, {"seed", s.seed}};
#define BW_PUT(f) sub[#f] = st.f;
#define BW_STAGE(name, FIELDS)  \
  {                             \
    const auto& st = s.name;    \
    nlohmann::json sub;         \
    FIELDS(BW_PUT)              \
    j[#name] = sub;             \
  }
  BW_STAGE(telemetry, BW_FIELDS_TELEMETRY)
  BW_STAGE(media, BW_FIELDS_MEDIA)
  BW_STAGE(scan, BW_FIELDS_SCAN)
  BW_STAGE(download, BW_FIELDS_DOWNLOAD)
  BW_STAGE(c2_beacon, BW_FIELDS_BEACON)
  BW_STAGE(heartbeat, BW_FIELDS_HEARTBEAT)
  BW_STAGE(ddos, BW_FIELDS_DDOS)
#undef BW_STAGE
#undef BW_PUT
  return j;
}

ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  if (!j.is_object()) invalid("scenario must be a JSON object");
  ScenarioSpec s;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "duration_s") {
        s.duration_s = value.get<double>();
      } else if (key == "devices") {
        s.devices = value.get<std::size_t>();
      } else if (key == "infected") {
        s.infected = value.get<std::size_t>();
      } else if (key == "seed") {
        s.seed = value.get<std::uint64_t>();
      }
#define BW_GET(f)                                                   \
  else if (k2 == #f) {                                              \
    st.f = v2.get<decltype(st.f)>();                                \
  }
#define BW_STAGE(name, FIELDS)                                      \
  else if (key == #name) {                                          \
    auto& st = s.name;                                              \
    for (const auto& [k2, v2] : value.items()) {                    \
      if (false) {                                                  \
      }                                                             \
      FIELDS(BW_GET)                                                \
      else invalid("unknown field '" #name "." + k2 + "'");        \
    }                                                               \
  }
      BW_STAGE(telemetry, BW_FIELDS_TELEMETRY)
      BW_STAGE(media, BW_FIELDS_MEDIA)
      BW_STAGE(scan, BW_FIELDS_SCAN)
      BW_STAGE(download, BW_FIELDS_DOWNLOAD)
      BW_STAGE(c2_beacon, BW_FIELDS_BEACON)
      BW_STAGE(heartbeat, BW_FIELDS_HEARTBEAT)
      BW_STAGE(ddos, BW_FIELDS_DDOS)
#undef BW_STAGE
#undef BW_GET
      else invalid("unknown scenario field '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    invalid(std::string("scenario field has the wrong type: ") + e.what());
  }
  s.validate();
  return s;
}

namespace {

constexpr std::int64_t kEpochUs = 1'600'000'000'000'000;
constexpr std::uint16_t kMss = 1460;

IpAddress device_ip(std::size_t i) { return IpAddress::v4(0xC0000200u + 10u + static_cast<std::uint32_t>(i)); }
IpAddress benign_ip(std::uint32_t host) { return IpAddress::v4(0xC6336400u + host); }
IpAddress attack_ip(std::uint32_t host) { return IpAddress::v4(0xCB007100u + host); }

/// Stack fingerprint of one endpoint.
struct Stack {
  std::uint16_t window;
  std::uint8_t ttl;
  bool timestamps;
};

constexpr Stack kDeviceStack{64240, 64, true};
constexpr Stack kCloudStack{65160, 54, true};
// Statically linked bot client on an old embedded kernel; attacker servers
// sit further away on a different OS.
constexpr Stack kBotStack{5840, 64, false};
constexpr Stack kC2Stack{29200, 47, false};
constexpr Stack kLoaderStack{29200, 49, false};

class Builder {
 public:
  explicit Builder(const ScenarioSpec& s) : spec_(s), rng_(s.seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  std::size_t pick(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  double jittered(double v, double rel) { return v * uniform(1.0 - rel, 1.0 + rel); }

  std::uint16_t ephemeral(const IpAddress& host) {
    auto it = ports_.find(host);
    if (it == ports_.end()) it = ports_.emplace(host, static_cast<std::uint16_t>(32768 + pick(0, 8000))).first;
    const std::uint16_t p = it->second;
    it->second = it->second >= 60999 ? 32768 : static_cast<std::uint16_t>(it->second + 1);
    return p;
  }

  PacketRecord tcp(double t, const IpAddress& src, const IpAddress& dst, std::uint16_t sport,
                   std::uint16_t dport, std::uint8_t flags, const Stack& st, std::size_t payload) {
    PacketRecord p = base(t, src, dst, sport, dport, ip_proto::TCP, st.ttl);
    const bool syn = flags & tcp_flag::SYN;
    p.l4_header_len = syn ? (st.timestamps ? 40 : 24) : (st.timestamps ? 32 : 20);
    p.tcp_flags = flags;
    p.tcp_window = st.window;
    finish(p, payload);
    return p;
  }

  PacketRecord udp(double t, const IpAddress& src, const IpAddress& dst, std::uint16_t sport,
                   std::uint16_t dport, std::uint8_t ttl, std::size_t payload) {
    PacketRecord p = base(t, src, dst, sport, dport, ip_proto::UDP, ttl);
    p.l4_header_len = 8;
    finish(p, payload);
    return p;
  }

  void emit(PacketRecord p, Label label) {
    if (p.ts_us >= end_us()) return;
    const FlowKey key = flow_key_of(p, DirectionMode::Bidirectional);
    if (!conversations_.count(key)) {
      conversations_.emplace(key, label);
      LabelRow row;
      row.src_ip = p.src_ip;
      row.dst_ip = p.dst_ip;
      row.src_port = p.src_port;
      row.dst_port = p.dst_port;
      row.protocol = p.protocol;
      row.window_start = p.ts_seconds();
      row.label = label;
      rows_.push_back(row);
    } else if (conversations_.at(key) != label) {
      fail(ErrorCode::InvalidSpec, "generator reused a 5-tuple across labels");
    }
    packets_.push_back({std::move(p), label, seq_++});
  }

  /// Handshake, request/response messages, teardown. `messages` alternate
  /// by the bool: true means client to server.
  void tcp_session(double t, const IpAddress& cli, const IpAddress& srv, std::uint16_t dport,
                   const Stack& cs, const Stack& ss, const std::vector<std::pair<bool, std::size_t>>& messages,
                   double rtt, Label label, bool server_closes = false) {
    using namespace tcp_flag;
    const std::uint16_t sport = ephemeral(cli);
    auto c = [&](std::uint8_t f, std::size_t n) { emit(tcp(t, cli, srv, sport, dport, f, cs, n), label); };
    auto s = [&](std::uint8_t f, std::size_t n) { emit(tcp(t, srv, cli, dport, sport, f, ss, n), label); };
    c(SYN, 0);
    t += rtt;
    s(SYN | ACK, 0);
    t += 0.0002;
    c(ACK, 0);
    for (const auto& [from_client, bytes] : messages) {
      t += from_client ? 0.001 : rtt * 0.6;
      std::size_t left = bytes;
      std::size_t segments = 0;
      while (left > 0) {
        const std::size_t n = std::min<std::size_t>(left, kMss);
        left -= n;
        from_client ? c(PSH | ACK, n) : s(PSH | ACK, n);
        if (++segments % 2 == 0 || left == 0) {
          t += 0.0003;
          from_client ? s(ACK, 0) : c(ACK, 0);
        }
        t += 0.0001;
      }
    }
    t += 0.01;
    if (server_closes) {
      s(FIN | ACK, 0);
      t += rtt;
      c(FIN | ACK, 0);
      t += 0.0002;
      s(ACK, 0);
    } else {
      c(FIN | ACK, 0);
      t += rtt;
      s(FIN | ACK, 0);
      t += 0.0002;
      c(ACK, 0);
    }
  }

  Corpus finish_corpus() {
    std::stable_sort(packets_.begin(), packets_.end(), [](const Pending& a, const Pending& b) {
      return a.packet.ts_us != b.packet.ts_us ? a.packet.ts_us < b.packet.ts_us : a.seq < b.seq;
    });
    Corpus c;
    for (auto& p : packets_) {
      ++c.packet_counts[p.label];
      c.packets.push_back(std::move(p.packet));
    }
    std::stable_sort(rows_.begin(), rows_.end(),
                     [](const LabelRow& a, const LabelRow& b) { return a.window_start < b.window_start; });
    c.labels = std::move(rows_);
    return c;
  }

  const ScenarioSpec& spec() const { return spec_; }

 private:
  struct Pending {
    PacketRecord packet;
    Label label;
    std::uint64_t seq;
  };

  std::int64_t end_us() const { return kEpochUs + static_cast<std::int64_t>(std::llround(spec_.duration_s * 1e6)); }

  PacketRecord base(double t, const IpAddress& src, const IpAddress& dst, std::uint16_t sport,
                    std::uint16_t dport, std::uint8_t proto, std::uint8_t ttl) {
    PacketRecord p;
    p.ts_us = kEpochUs + static_cast<std::int64_t>(std::llround(t * 1e6));
    p.src_ip = src;
    p.dst_ip = dst;
    p.src_port = sport;
    p.dst_port = dport;
    p.protocol = proto;
    p.link_header_len = 14;
    p.ip_header_len = 20;
    p.ttl = ttl;
    p.ip_id = ip_ids_[src]++;
    return p;
  }

  static void finish(PacketRecord& p, std::size_t payload) {
    p.payload_len = static_cast<std::uint32_t>(payload);
    p.total_len = p.link_header_len + p.ip_header_len + p.l4_header_len + p.payload_len;
  }

  const ScenarioSpec& spec_;
  std::mt19937_64 rng_;
  std::vector<Pending> packets_;
  std::vector<LabelRow> rows_;
  std::unordered_map<FlowKey, Label, FlowKeyHash> conversations_;
  std::map<IpAddress, std::uint16_t> ports_;
  std::map<IpAddress, std::uint16_t> ip_ids_;
  std::uint64_t seq_ = 0;
};

void telemetry(Builder& b, std::size_t d) {
  const auto& s = b.spec();
  const double T = s.duration_s;
  const double iv = s.telemetry.interval_s;
  const IpAddress dev = device_ip(d);
  using namespace tcp_flag;

  // Persistent MQTT session opened before the capture.
  {
    const IpAddress broker = benign_ip(10);
    const std::uint16_t sport = b.ephemeral(dev);
    for (double t = b.uniform(0.0, iv); t < T; t += b.jittered(iv, 0.1)) {
      const std::size_t n = b.pick(60, 200);
      b.emit(b.tcp(t, dev, broker, sport, 1883, PSH | ACK, kDeviceStack, n), Label::Normal);
      b.emit(b.tcp(t + b.uniform(0.02, 0.06), broker, dev, 1883, sport, ACK, kCloudStack, 0), Label::Normal);
    }
  }
  // CoAP polling over one UDP association.
  {
    const IpAddress server = benign_ip(20);
    const std::uint16_t sport = b.ephemeral(dev);
    const double every = 3.0 * iv;
    for (double t = b.uniform(0.0, every); t < T; t += b.jittered(every, 0.1)) {
      b.emit(b.udp(t, dev, server, sport, 5683, 64, b.pick(20, 40)), Label::Normal);
      b.emit(b.udp(t + b.uniform(0.02, 0.08), server, dev, 5683, sport, 52, b.pick(40, 100)), Label::Normal);
    }
  }
  // DNS lookups, fresh source port each time.
  {
    const IpAddress resolver = benign_ip(53);
    const double every = 12.0 * iv;
    for (double t = b.uniform(0.0, every); t < T; t += b.jittered(every, 0.2)) {
      const std::uint16_t sport = b.ephemeral(dev);
      b.emit(b.udp(t, dev, resolver, sport, 53, 64, b.pick(30, 50)), Label::Normal);
      b.emit(b.udp(t + b.uniform(0.005, 0.03), resolver, dev, 53, sport, 57, b.pick(60, 120)), Label::Normal);
    }
  }
  // NTP.
  {
    const IpAddress ntp = benign_ip(123);
    const double every = 60.0 * iv;
    const std::uint16_t sport = b.ephemeral(dev);
    for (double t = b.uniform(0.0, every); t < T; t += b.jittered(every, 0.05)) {
      b.emit(b.udp(t, dev, ntp, sport, 123, 64, 48), Label::Normal);
      b.emit(b.udp(t + b.uniform(0.01, 0.04), ntp, dev, 123, sport, 50, 48), Label::Normal);
    }
  }
  // HTTPS update check.
  {
    const IpAddress cloud = benign_ip(44);
    const double every = 30.0 * iv;
    for (double t = b.uniform(0.0, every); t < T; t += b.jittered(every, 0.1)) {
      b.tcp_session(t, dev, cloud, 443, kDeviceStack, kCloudStack,
                    {{true, b.pick(480, 560)}, {false, b.pick(2600, 4200)}, {true, b.pick(100, 140)},
                     {false, 51}, {true, b.pick(250, 400)}, {false, b.pick(300, 1500)}},
                    b.uniform(0.02, 0.05), Label::Normal);
    }
  }
}

void media(Builder& b, std::size_t d) {
  const auto& m = b.spec().media;
  const double T = b.spec().duration_s;
  const IpAddress dev = device_ip(d);
  const IpAddress server = benign_ip(80);
  for (double start = b.uniform(0.0, m.gap_s + m.burst_s); start < T; start += m.burst_s + b.jittered(m.gap_s, 0.2)) {
    const std::uint16_t sport = b.ephemeral(dev);
    double next_report = start + 1.0;
    for (double t = start; t < start + m.burst_s && t < T; t += 1.0 / m.rate_pps) {
      b.emit(b.udp(t + b.uniform(0.0, 0.002), dev, server, sport, 5004, 64, b.pick(1100, 1200)), Label::Normal);
      if (t >= next_report) {
        b.emit(b.udp(t + 0.01, server, dev, 5004, sport, 55, b.pick(52, 80)), Label::Normal);
        next_report += 1.0;
      }
    }
  }
}

void scan(Builder& b, std::size_t d) {
  const auto& s = b.spec().scan;
  const IpAddress dev = device_ip(d);
  for (std::size_t i = 0; i < s.targets; ++i) {
    const double t = s.start_s + static_cast<double>(i) / s.rate_pps + b.uniform(0.0, 0.2 / s.rate_pps);
    const IpAddress target = attack_ip(static_cast<std::uint32_t>(b.pick(1, 199)));
    const std::uint16_t port = b.uniform(0.0, 1.0) < 0.9 ? 23 : 2323;
    const Stack raw{static_cast<std::uint16_t>(b.pick(1024, 65535)), 64, false};
    b.emit(b.tcp(t, dev, target, b.ephemeral(dev), port, tcp_flag::SYN, raw, 0), Label::Scan);
  }
}

void download(Builder& b, std::size_t d) {
  const auto& s = b.spec().download;
  b.tcp_session(s.start_s, device_ip(d), attack_ip(201), 80, kBotStack, kLoaderStack,
                {{true, b.pick(90, 130)}, {false, s.bytes}}, b.uniform(0.06, 0.1), Label::Download, true);
}

void beacons(Builder& b, std::size_t d) {
  const auto& s = b.spec().c2_beacon;
  for (double t = s.start_s + b.uniform(0.0, s.interval_s * s.jitter); t < b.spec().duration_s;
       t += b.jittered(s.interval_s, s.jitter)) {
    b.tcp_session(t, device_ip(d), attack_ip(200), 48101, kBotStack, kC2Stack,
                  {{true, b.pick(20, 40)}, {false, b.pick(8, 48)}}, b.uniform(0.06, 0.1), Label::CnC, true);
  }
}

void heartbeat(Builder& b, std::size_t d) {
  const auto& s = b.spec().heartbeat;
  using namespace tcp_flag;
  const IpAddress dev = device_ip(d), c2 = attack_ip(200);
  const std::uint16_t sport = b.ephemeral(dev);
  double t = s.start_s;
  b.emit(b.tcp(t, dev, c2, sport, 23, SYN, kBotStack, 0), Label::HeartBeat);
  b.emit(b.tcp(t + 0.08, c2, dev, 23, sport, SYN | ACK, kC2Stack, 0), Label::HeartBeat);
  b.emit(b.tcp(t + 0.0802, dev, c2, sport, 23, ACK, kBotStack, 0), Label::HeartBeat);
  for (t += b.jittered(s.interval_s, 0.02); t < b.spec().duration_s; t += b.jittered(s.interval_s, 0.02)) {
    const double rtt = b.uniform(0.06, 0.1);
    b.emit(b.tcp(t, dev, c2, sport, 23, PSH | ACK, kBotStack, s.payload), Label::HeartBeat);
    b.emit(b.tcp(t + rtt, c2, dev, 23, sport, PSH | ACK, kC2Stack, s.payload), Label::HeartBeat);
    b.emit(b.tcp(t + rtt + 0.0002, dev, c2, sport, 23, ACK, kBotStack, 0), Label::HeartBeat);
  }
}

void ddos(Builder& b, std::size_t d, std::size_t bots) {
  const auto& s = b.spec().ddos;
  const IpAddress dev = device_ip(d), victim = attack_ip(250);
  const std::uint16_t sport = b.ephemeral(dev);
  const double step = static_cast<double>(bots) / s.rate_pps;
  for (double t = s.start_s + b.uniform(0.0, step); t < s.start_s + s.duration_s; t += step) {
    b.emit(b.udp(t, dev, victim, sport, 80, 64, s.payload), Label::DDoS);
  }
}

}  // namespace

Corpus generate(const ScenarioSpec& spec) {
  spec.validate();
  Builder b(spec);
  // Cameras are the last devices so infection starts from the first.
  const std::size_t first_camera = spec.devices - (spec.media.enabled ? spec.media.cameras : 0);
  for (std::size_t d = 0; d < spec.devices; ++d) {
    if (spec.telemetry.enabled) telemetry(b, d);
    if (spec.media.enabled && d >= first_camera) media(b, d);
  }
  for (std::size_t d = 0; d < spec.infected; ++d) {
    if (spec.heartbeat.enabled) heartbeat(b, d);
    if (spec.c2_beacon.enabled) beacons(b, d);
    if (spec.scan.enabled) scan(b, d);
    if (spec.download.enabled) download(b, d);
    if (spec.ddos.enabled) ddos(b, d, spec.infected);
  }
  return b.finish_corpus();
}

void write_corpus(const Corpus& c, const std::filesystem::path& pcap, const std::filesystem::path& labels) {
  write_pcap(pcap, c.packets);
  write_label_file(labels, c.labels);
}

}  // namespace botwatch
