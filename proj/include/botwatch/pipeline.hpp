#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "botwatch/features.hpp"
#include "botwatch/flow.hpp"
#include "botwatch/labels.hpp"
#include "botwatch/pcap.hpp"

namespace botwatch {

struct ExtractOptions {
  TrafficMode mode = TrafficMode::UniFlow;
  std::optional<double> tw_seconds;
  double idle_timeout = 15.0;
  /// Columns to compute; defaults to the full catalog of `mode`.
  std::optional<FeatureManifest> manifest;
};

/// Where a row came from: the flow key (or the packet's unidirectional key)
/// and the window start or packet time.
struct InstanceInfo {
  FlowKey key;
  double ts = 0.0;
};

struct Extraction {
  FeatureMatrix features;
  std::vector<InstanceInfo> info;  ///< one per row
  std::vector<FlowRecord> flows;   ///< flow modes only
  CaptureSummary capture;
  MeterStats meter;
  std::uint64_t label_misses = 0;
};

/// Turns packets into feature rows. With `labels`, each row gets the label in
/// effect for its key at its start time.
Extraction extract_packets(const std::vector<PacketRecord>& packets, const ExtractOptions& opt,
                           const LabelIndex* labels = nullptr);
Extraction extract_capture(const std::filesystem::path& pcap, const ExtractOptions& opt,
                           const LabelIndex* labels = nullptr);

/// Flow records as CSV (key, window, termination, counts) for inspection.
void write_flows_csv(const std::filesystem::path& path, const std::vector<FlowRecord>& flows);

}  // namespace botwatch
