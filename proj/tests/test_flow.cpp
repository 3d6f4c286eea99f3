#include <doctest.h>

#include <random>

#include "botwatch/flow.hpp"
#include "botwatch/pcap.hpp"
#include "fixtures.hpp"
#include "packets.hpp"

using namespace botwatch;
using fixtures::kHostA;
using fixtures::kHostB;
using fixtures::pkt;

namespace {

MeterConfig cfg(DirectionMode m, std::optional<double> tw = std::nullopt, double idle = 15.0) {
  MeterConfig c;
  c.mode = m;
  c.tw_seconds = tw;
  c.idle_timeout = idle;
  return c;
}

std::vector<PacketRecord> three_and_two() {
  return {pkt(0.0, kHostA, 5000, kHostB, 80), pkt(0.1, kHostA, 5000, kHostB, 80),
          pkt(0.2, kHostB, 80, kHostA, 5000), pkt(0.3, kHostA, 5000, kHostB, 80),
          pkt(0.4, kHostB, 80, kHostA, 5000)};
}

std::uint64_t total_packets(const std::vector<FlowRecord>& flows) {
  std::uint64_t n = 0;
  for (const auto& f : flows) n += f.pkt_count();
  return n;
}

}  // namespace

TEST_SUITE("flow") {

TEST_CASE("unidirectional keying splits directions") {
  const auto flows = meter_all(three_and_two(), cfg(DirectionMode::Unidirectional));
  REQUIRE(flows.size() == 2);
  CHECK(flows[0].fwd.pkt_count == 3);
  CHECK(flows[1].fwd.pkt_count == 2);
  CHECK(flows[0].bwd.pkt_count == 0);
}

TEST_CASE("bidirectional keying merges directions") {
  const auto flows = meter_all(three_and_two(), cfg(DirectionMode::Bidirectional));
  REQUIRE(flows.size() == 1);
  CHECK(flows[0].fwd.pkt_count == 3);
  CHECK(flows[0].bwd.pkt_count == 2);
  CHECK(flows[0].key.src_ip == IpAddress::v4(kHostA));
}

TEST_CASE("tumbling window anchored at the first packet") {
  const std::vector<PacketRecord> pkts = {pkt(0.0, kHostA, 1, kHostB, 2), pkt(0.5, kHostA, 1, kHostB, 2),
                                          pkt(1.2, kHostA, 1, kHostB, 2)};
  const auto flows = meter_all(pkts, cfg(DirectionMode::Unidirectional, 1.0));
  REQUIRE(flows.size() == 2);
  CHECK(flows[0].pkt_count() == 2);
  CHECK(flows[0].window_start == doctest::Approx(0.0));
  CHECK(flows[0].window_end == doctest::Approx(1.0));
  CHECK(flows[0].termination == Termination::WindowClose);
  CHECK(flows[1].pkt_count() == 1);
  CHECK(flows[1].window_start == doctest::Approx(1.2));
}

TEST_CASE("flow keys") {
  const auto a = pkt(0, kHostA, 5000, kHostB, 80, ip_proto::TCP);
  const auto b = pkt(0, kHostB, 80, kHostA, 5000, ip_proto::TCP);
  CHECK(flow_key_of(a, DirectionMode::Bidirectional) == flow_key_of(b, DirectionMode::Bidirectional));
  CHECK(FlowKeyHash{}(flow_key_of(a, DirectionMode::Bidirectional)) ==
        FlowKeyHash{}(flow_key_of(b, DirectionMode::Bidirectional)));
  CHECK_FALSE(flow_key_of(a, DirectionMode::Unidirectional) == flow_key_of(b, DirectionMode::Unidirectional));

  auto icmp = pkt(0, kHostA, 0, kHostB, 0, ip_proto::ICMP);
  const auto k = flow_key_of(icmp, DirectionMode::Unidirectional);
  CHECK(k.src_port == 0);
  CHECK(k.dst_port == 0);
  CHECK(k.protocol == 1);
}

TEST_CASE("idle timeout cuts and starts a new flow") {
  const std::vector<PacketRecord> pkts = {pkt(0, kHostA, 1, kHostB, 2), pkt(20, kHostA, 1, kHostB, 2)};
  const auto flows = meter_all(pkts, cfg(DirectionMode::Unidirectional));
  REQUIRE(flows.size() == 2);
  CHECK(flows[0].termination == Termination::IdleTimeout);
  CHECK(flows[1].termination == Termination::CaptureEnd);
}

TEST_CASE("TCP termination rules") {
  using namespace tcp_flag;
  const std::vector<PacketRecord> pkts = {
      pkt(0.0, kHostA, 5000, kHostB, 80, ip_proto::TCP, 0, SYN),
      pkt(0.1, kHostB, 80, kHostA, 5000, ip_proto::TCP, 0, SYN | ACK),
      pkt(0.2, kHostA, 5000, kHostB, 80, ip_proto::TCP, 0, FIN | ACK),
      pkt(0.3, kHostB, 80, kHostA, 5000, ip_proto::TCP, 0, FIN | ACK),
      pkt(0.4, kHostA, 5000, kHostB, 80, ip_proto::TCP, 0, ACK),
  };
  SUBCASE("bidirectional needs a FIN each way") {
    const auto flows = meter_all(pkts, cfg(DirectionMode::Bidirectional));
    REQUIRE(flows.size() == 2);
    CHECK(flows[0].termination == Termination::TcpFin);
    CHECK(flows[0].pkt_count() == 4);
    CHECK(flows[1].pkt_count() == 1);
  }
  SUBCASE("unidirectional cuts on one FIN") {
    const auto flows = meter_all(pkts, cfg(DirectionMode::Unidirectional));
    REQUIRE(flows.size() == 3);
    CHECK(flows[0].termination == Termination::TcpFin);
    CHECK(flows[0].pkt_count() == 2);
    CHECK(flows[1].termination == Termination::TcpFin);
    CHECK(flows[2].pkt_count() == 1);
  }
  SUBCASE("RST cuts immediately") {
    std::vector<PacketRecord> r = {pkt(0.0, kHostA, 5000, kHostB, 80, ip_proto::TCP, 0, SYN),
                                   pkt(0.1, kHostB, 80, kHostA, 5000, ip_proto::TCP, 0, RST | ACK),
                                   pkt(0.2, kHostA, 5000, kHostB, 80, ip_proto::TCP, 0, SYN)};
    const auto flows = meter_all(r, cfg(DirectionMode::Bidirectional));
    REQUIRE(flows.size() == 2);
    CHECK(flows[0].termination == Termination::TcpRst);
  }
}

TEST_CASE("clock skew is dropped and counted") {
  std::vector<PacketRecord> pkts = {pkt(1.0, kHostA, 1, kHostB, 2), pkt(0.5, kHostA, 1, kHostB, 2)};
  MeterStats st;
  const auto flows = meter_all(pkts, cfg(DirectionMode::Unidirectional), &st);
  CHECK(st.dropped_clock_skew == 1);
  CHECK(total_packets(flows) == 1);
}

TEST_CASE("conservation and window invariants on fuzzed streams") {
  std::mt19937_64 rng(99);
  for (int round = 0; round < 100; ++round) {
    std::vector<PacketRecord> pkts;
    double t = 0;
    const int n = 1 + static_cast<int>(rng() % 300);
    std::uniform_real_distribution<double> gap(0, 2.0);
    for (int i = 0; i < n; ++i) {
      t += gap(rng) * (rng() % 4 == 0 ? 5 : 0.1);
      const bool rev = rng() % 2;
      const std::uint32_t a = kHostA + static_cast<std::uint32_t>(rng() % 3);
      const std::uint16_t port = static_cast<std::uint16_t>(1000 + rng() % 3);
      const std::uint8_t proto = rng() % 2 ? ip_proto::TCP : ip_proto::UDP;
      const std::uint8_t flags = static_cast<std::uint8_t>(rng() % 8 == 0 ? rng() : tcp_flag::ACK);
      pkts.push_back(rev ? pkt(t, kHostB, 80, a, port, proto, 10, flags) : pkt(t, a, port, kHostB, 80, proto, 10, flags));
    }
    const std::optional<double> tws[] = {std::nullopt, 1.0, 10.0};
    for (auto tw : tws) {
      for (auto mode : {DirectionMode::Unidirectional, DirectionMode::Bidirectional}) {
        const auto flows = meter_all(pkts, cfg(mode, tw, 3.0));
        REQUIRE(total_packets(flows) == pkts.size());
        std::unordered_map<FlowKey, double, FlowKeyHash> last_end;
        for (const auto& f : flows) {
          REQUIRE(f.pkt_count() >= 1);
          CHECK(f.window_end >= f.window_start);
          CHECK(f.duration >= 0);
          if (tw) CHECK(f.duration <= *tw + 1e-9);
          auto it = last_end.find(f.key);
          if (it != last_end.end()) CHECK(f.window_start >= it->second);
          last_end[f.key] = f.window_end;
        }
      }
    }
    // bidirectional fwd+bwd per 5-tuple equals the two unidirectional sums
    const auto uni = meter_all(pkts, cfg(DirectionMode::Unidirectional, 1.0, 3.0));
    const auto bi = meter_all(pkts, cfg(DirectionMode::Bidirectional, 1.0, 3.0));
    std::unordered_map<FlowKey, std::uint64_t, FlowKeyHash> u, b;
    for (const auto& f : uni) {
      FlowKey k = f.key;
      k.mode = DirectionMode::Bidirectional;
      u[k] += f.pkt_count();
    }
    for (const auto& f : bi) b[f.key] += f.pkt_count();
    CHECK(u.size() == b.size());
    for (const auto& [k, v] : b) CHECK(u[k] == v);
  }
}

TEST_CASE("golden pcap conservation") {
  auto file = fixtures::global_header();
  fixtures::record(file, 1, 0, fixtures::tcp_frame(0x02));
  fixtures::record(file, 1, 10, fixtures::tcp_frame(0x12, 80, 5000, fixtures::kHostB, fixtures::kHostA));
  fixtures::record(file, 1, 20, fixtures::udp_frame());
  fixtures::record(file, 1, 30, fixtures::tcp_frame(0x11));
  const auto path = fixtures::temp_path("golden_flows.pcap");
  fixtures::write_file(path, file);
  CaptureSummary s;
  const auto pkts = read_capture(path, &s);
  for (auto mode : {DirectionMode::Unidirectional, DirectionMode::Bidirectional}) {
    const auto flows = meter_all(pkts, cfg(mode, 1.0));
    CHECK(total_packets(flows) == s.decoded);
  }
}

TEST_CASE("streaming memory follows live flows") {
  std::vector<PacketRecord> pkts;
  for (int i = 0; i < 5000; ++i)
    pkts.push_back(pkt(i * 0.01, kHostA, static_cast<std::uint16_t>(i), kHostB, 53));
  MeterStats st;
  meter_all(pkts, cfg(DirectionMode::Unidirectional, std::nullopt, 1.0), &st);
  CHECK(st.peak_live_flows < 300);
}

}  // TEST_SUITE
