#include <doctest.h>

#include <filesystem>
#include <set>
#include <tuple>

#include "botwatch/error.hpp"
#include "botwatch/flow.hpp"
#include "botwatch/pcap.hpp"
#include "botwatch/synth.hpp"
#include "fixtures.hpp"

using namespace botwatch;

namespace {

bool in_documentation_range(const IpAddress& a) {
  const auto b = a.bytes();
  const bool net1 = b[0] == 192 && b[1] == 0 && b[2] == 2;
  const bool net2 = b[0] == 198 && b[1] == 51 && b[2] == 100;
  const bool net3 = b[0] == 203 && b[1] == 0 && b[2] == 113;
  return !a.is_v6() && (net1 || net2 || net3);
}

std::size_t covering_rows(const std::vector<LabelRow>& rows, const PacketRecord& p) {
  std::size_t n = 0;
  for (const auto& r : rows) {
    const bool fwd = r.src_ip == p.src_ip && r.dst_ip == p.dst_ip && r.src_port == p.src_port && r.dst_port == p.dst_port;
    const bool rev = r.src_ip == p.dst_ip && r.dst_ip == p.src_ip && r.src_port == p.dst_port && r.dst_port == p.src_port;
    n += r.protocol == p.protocol && (fwd || rev);
  }
  return n;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("benign-only scenario is labeled Normal throughout") {
  auto s = benign_scenario(300, 1);
  const auto c = generate(s);
  REQUIRE_FALSE(c.labels.empty());
  for (const auto& r : c.labels) CHECK(r.label == Label::Normal);
  CHECK(c.packet_counts.size() == 1);
  CHECK(c.packet_counts.at(Label::Normal) == c.packets.size());
}

TEST_CASE("scan probes form many tiny unidirectional flows") {
  ScenarioSpec s;
  s.duration_s = 60;
  s.telemetry.enabled = false;
  s.media.enabled = false;
  s.scan.enabled = true;
  s.scan.start_s = 1;
  s.scan.targets = 100;
  const auto c = generate(s);
  MeterConfig mc;
  const auto flows = meter_all(c.packets, mc);
  std::size_t small = 0;
  for (const auto& f : flows) small += f.pkt_count() <= 2;
  CHECK(small >= 100);
  CHECK(c.packet_counts.at(Label::Scan) >= 100);
}

TEST_CASE("heartbeat messages carry a few bytes") {
  ScenarioSpec s;
  s.duration_s = 400;
  s.telemetry.enabled = false;
  s.media.enabled = false;
  s.heartbeat.enabled = true;
  const auto c = generate(s);
  const LabelIndex idx(c.labels);
  std::size_t hb = 0;
  for (const auto& p : c.packets) {
    if (idx.lookup(flow_key_of(p, DirectionMode::Unidirectional), p.ts_seconds()) != Label::HeartBeat) continue;
    ++hb;
    CHECK(p.payload_len <= 8);
  }
  CHECK(hb > 0);
  CHECK(hb == c.packet_counts.at(Label::HeartBeat));
}

TEST_CASE("pcap writer sizes") {
  const auto empty = fixtures::temp_path("synth_empty.pcap");
  write_pcap(empty, {});
  CHECK(std::filesystem::file_size(empty) == 24);
  CHECK(read_capture(empty).empty());

  const auto c = generate(benign_scenario(30, 2));
  REQUIRE_FALSE(c.packets.empty());
  const auto one = fixtures::temp_path("synth_one.pcap");
  write_pcap(one, std::span(c.packets.data(), 1));
  CHECK(std::filesystem::file_size(one) == 24 + 16 + encode_frame(c.packets[0]).size());
}

TEST_CASE("mixed corpus round trips, is fully labeled and stays in documentation ranges") {
  const auto c = generate(mixed_scenario(400, 3));
  const auto pcap = fixtures::temp_path("mixed.pcap");
  const auto labels = fixtures::temp_path("mixed.labels.csv");
  write_corpus(c, pcap, labels);
  CHECK(read_capture(pcap) == c.packets);
  const auto rows = read_label_file(labels);
  CHECK(rows.size() == c.labels.size());
  std::size_t sampled = 0;
  for (std::size_t i = 0; i < c.packets.size(); i += 97) {
    CHECK(covering_rows(rows, c.packets[i]) >= 1);
    ++sampled;
  }
  CHECK(sampled > 10);
  for (const auto& p : c.packets) {
    REQUIRE(in_documentation_range(p.src_ip));
    REQUIRE(in_documentation_range(p.dst_ip));
  }
  for (std::size_t i = 1; i < c.packets.size(); ++i) REQUIRE(c.packets[i - 1].ts_us <= c.packets[i].ts_us);
  std::set<Label> seen;
  for (const auto& r : rows) seen.insert(r.label);
  for (auto l : {Label::Normal, Label::Scan, Label::Download, Label::CnC, Label::HeartBeat, Label::DDoS}) CHECK(seen.count(l));
}

TEST_CASE("each packet maps to exactly one label row") {
  const auto c = generate(mixed_scenario(400, 4));
  std::set<std::tuple<std::vector<std::uint8_t>, std::vector<std::uint8_t>, int, int, int>> keys;
  for (const auto& r : c.labels) {
    auto a = std::vector<std::uint8_t>(r.src_ip.bytes().begin(), r.src_ip.bytes().end());
    auto b = std::vector<std::uint8_t>(r.dst_ip.bytes().begin(), r.dst_ip.bytes().end());
    int sp = r.src_port, dp = r.dst_port;
    if (std::tie(b, dp) < std::tie(a, sp)) {
      std::swap(a, b);
      std::swap(sp, dp);
    }
    CHECK(keys.emplace(a, b, sp, dp, r.protocol).second);
  }
  std::size_t total = 0;
  for (const auto& [l, n] : c.packet_counts) total += n;
  CHECK(total == c.packets.size());
}

TEST_CASE("determinism under seed") {
  const auto a = generate(mixed_scenario(200, 5));
  const auto b = generate(mixed_scenario(200, 5));
  const auto d = generate(mixed_scenario(200, 6));
  CHECK(a.packets == b.packets);
  CHECK(a.packets != d.packets);
}

TEST_CASE("ddos rate dwarfs the beacon rate") {
  const ScenarioSpec s = mixed_scenario(600, 7);
  CHECK(s.ddos.rate_pps >= 100.0 / s.c2_beacon.interval_s);
  const auto c = generate(s);
  const double ddos_rate = static_cast<double>(c.packet_counts.at(Label::DDoS)) / s.ddos.duration_s;
  const double c2_rate = static_cast<double>(c.packet_counts.at(Label::CnC)) / (s.duration_s - s.c2_beacon.start_s);
  CHECK(ddos_rate >= 100 * c2_rate);
}

TEST_CASE("scenario validation and JSON") {
  ScenarioSpec s = mixed_scenario(100, 8);
  s.infected = 99;
  CHECK_THROWS_AS(s.validate(), Error);
  ScenarioSpec neg;
  neg.duration_s = -1;
  CHECK_THROWS_AS(generate(neg), Error);
  const auto j = scenario_to_json(mixed_scenario(321, 9));
  const auto back = scenario_from_json(j);
  CHECK(scenario_to_json(back) == j);
  auto bad = j;
  bad["bogus"] = 1;
  try {
    scenario_from_json(bad);
    FAIL("expected InvalidSpec");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidSpec);
  }
}

}  // TEST_SUITE
