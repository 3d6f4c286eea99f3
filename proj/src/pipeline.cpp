#include <cstdio>
#include <fstream>

#include "botwatch/error.hpp"
#include "botwatch/pipeline.hpp"

namespace botwatch {

Extraction extract_packets(const std::vector<PacketRecord>& packets, const ExtractOptions& opt,
                           const LabelIndex* labels) {
  Extraction ex;
  const FeatureManifest manifest = opt.manifest ? *opt.manifest : catalog(opt.mode);
  if (manifest.mode() != opt.mode) {
    fail(ErrorCode::ManifestMismatch, "manifest mode " + to_string(manifest.mode()) +
                                          " does not match extraction mode " + to_string(opt.mode));
  }
  ex.features.manifest = manifest;
  ex.features.values = Matrix(0, manifest.size());

  auto add_row = [&](std::span<const double> row, const FlowKey& key, double ts) {
    ex.features.values.append_row(row);
    ex.info.push_back({key, ts});
    if (labels) ex.features.labels.push_back(labels->lookup(key, ts));
  };

  if (opt.mode == TrafficMode::Packet) {
    PacketContext ctx(opt.idle_timeout);
    std::int64_t last = INT64_MIN;
    for (const auto& p : packets) {
      if (p.ts_us < last) {
        ++ex.meter.dropped_clock_skew;
        continue;
      }
      last = p.ts_us;
      ++ex.meter.packets;
      const auto row = packet_features(p, ctx, manifest);
      add_row(row, flow_key_of(p, DirectionMode::Unidirectional), p.ts_seconds());
    }
  } else {
    MeterConfig cfg;
    cfg.mode = direction_of(opt.mode);
    cfg.tw_seconds = opt.tw_seconds;
    cfg.idle_timeout = opt.idle_timeout;
    ex.flows = meter_all(packets, cfg, &ex.meter);
    for (const auto& f : ex.flows) add_row(flow_features(f, manifest), f.key, f.window_start);
  }
  if (labels) ex.label_misses = labels->misses();
  return ex;
}

Extraction extract_capture(const std::filesystem::path& pcap, const ExtractOptions& opt,
                           const LabelIndex* labels) {
  CaptureSummary summary;
  const auto packets = read_capture(pcap, &summary);
  const std::uint64_t misses_before = labels ? labels->misses() : 0;
  Extraction ex = extract_packets(packets, opt, labels);
  ex.capture = summary;
  if (labels) ex.label_misses = labels->misses() - misses_before;
  return ex;
}

void write_flows_csv(const std::filesystem::path& path, const std::vector<FlowRecord>& flows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IOError, "cannot create '" + path.string() + "'");
  out << "src_ip,dst_ip,src_port,dst_port,protocol,window_start,window_end,duration,fwd_pkts,bwd_pkts,"
         "fwd_bytes,bwd_bytes,termination\n";
  char buf[64];
  for (const auto& f : flows) {
    out << f.key.src_ip.to_string() << ',' << f.key.dst_ip.to_string() << ',' << f.key.src_port << ','
        << f.key.dst_port << ',' << unsigned(f.key.protocol);
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f", f.window_start, f.window_end, f.duration);
    out << buf << ',' << f.fwd.pkt_count << ',' << f.bwd.pkt_count << ',' << f.fwd.byte_count << ','
        << f.bwd.byte_count << ',' << to_string(f.termination) << '\n';
  }
  if (!out) fail(ErrorCode::IOError, "write failed on '" + path.string() + "'");
}

}  // namespace botwatch
