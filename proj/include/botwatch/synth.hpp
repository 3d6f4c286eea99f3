#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include <json.hpp>

#include "botwatch/labels.hpp"
#include "botwatch/packet.hpp"

namespace botwatch {

/// Labeled traffic scenario. Devices live in 192.0.2.0/24, benign servers in
/// 198.51.100.0/24, attacker infrastructure and targets in 203.0.113.0/24.
/// Malicious stages run on the first `infected` devices.
struct ScenarioSpec {
  double duration_s = 600.0;
  std::size_t devices = 10;
  std::size_t infected = 1;
  std::uint64_t seed = 1;

  /// MQTT publishes, CoAP polls, DNS, NTP and periodic HTTPS checks.
  struct Telemetry {
    bool enabled = true;
    double interval_s = 10.0;
  } telemetry;
  /// Camera devices streaming UDP media in bursts.
  struct Media {
    bool enabled = true;
    std::size_t cameras = 2;
    double rate_pps = 30.0;
    double burst_s = 20.0;
    double gap_s = 100.0;
  } media;
  struct Scan {
    bool enabled = false;
    double start_s = 60.0;
    std::size_t targets = 500;
    double rate_pps = 50.0;
  } scan;
  struct Download {
    bool enabled = false;
    double start_s = 120.0;
    std::size_t bytes = 500'000;
  } download;
  struct Beacon {
    bool enabled = false;
    double start_s = 30.0;
    double interval_s = 30.0;
    double jitter = 0.1;  ///< relative
  } c2_beacon;
  struct Heartbeat {
    bool enabled = false;
    double start_s = 45.0;
    double interval_s = 60.0;
    std::size_t payload = 4;
  } heartbeat;
  struct Ddos {
    bool enabled = false;
    double start_s = 300.0;
    double duration_s = 2.0;
    double rate_pps = 5000.0;
    std::size_t payload = 512;
  } ddos;

  /// Throws Error(InvalidSpec).
  void validate() const;
};

/// Benign-only scenario for training captures.
ScenarioSpec benign_scenario(double duration_s, std::uint64_t seed);
/// Benign background plus every malicious stage.
ScenarioSpec mixed_scenario(double duration_s, std::uint64_t seed);

nlohmann::json scenario_to_json(const ScenarioSpec& s);
/// Missing keys keep defaults; unknown keys throw Error(InvalidSpec).
ScenarioSpec scenario_from_json(const nlohmann::json& j);

struct Corpus {
  std::vector<PacketRecord> packets;  ///< timestamp-ordered
  std::vector<LabelRow> labels;       ///< one row per conversation
  std::map<Label, std::size_t> packet_counts;
};

Corpus generate(const ScenarioSpec& spec);
void write_corpus(const Corpus& c, const std::filesystem::path& pcap, const std::filesystem::path& labels);

}  // namespace botwatch
