#include "botwatch/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "botwatch/csv.hpp"
#include "botwatch/error.hpp"

namespace botwatch {

namespace {

constexpr double kMinRateDuration = 1e-3;
constexpr char kZeroImputed[] = "0 when undefined";

// What flow features may see: per-direction aggregates and relative times.
// Addresses, ports and absolute timestamps are deliberately absent.
struct DirView {
  double pkt_count = 0, byte_count = 0, header_bytes = 0, payload_bytes = 0;
  double zero_payload_pkts = 0, fragment_bytes = 0, fragment_count = 0;
  RunningStats pkt_len, payload_len, iat, ttl, ip_header_len, l4_header_len, tcp_window;
  double short_iats = 0, long_iats = 0, first_iat = 0;
  std::array<double, 8> flags{};
  double init_window = 0;
  double first_pkt_len = 0, last_pkt_len = 0;

  static DirView from(const DirectionStats& d) {
    DirView v;
    v.pkt_count = static_cast<double>(d.pkt_count);
    v.byte_count = static_cast<double>(d.byte_count);
    v.header_bytes = static_cast<double>(d.header_bytes);
    v.payload_bytes = static_cast<double>(d.payload_bytes);
    v.zero_payload_pkts = static_cast<double>(d.zero_payload_pkts);
    v.fragment_bytes = static_cast<double>(d.fragment_bytes);
    v.fragment_count = static_cast<double>(d.fragment_count);
    v.pkt_len = d.pkt_len;
    v.payload_len = d.payload_len;
    v.iat = d.iat;
    v.ttl = d.ttl;
    v.ip_header_len = d.ip_header_len;
    v.l4_header_len = d.l4_header_len;
    v.tcp_window = d.tcp_window;
    v.short_iats = static_cast<double>(d.short_iats);
    v.long_iats = static_cast<double>(d.long_iats);
    v.first_iat = d.first_iat;
    for (std::size_t i = 0; i < 8; ++i) v.flags[i] = d.flag_counts[i];
    v.init_window = d.init_window ? *d.init_window : 0.0;
    v.first_pkt_len = d.first_pkt_len;
    v.last_pkt_len = d.last_pkt_len;
    return v;
  }
};

struct FlowView {
  DirView fwd, bwd;
  double duration = 0;
  RunningStats flow_iat, active, idle;
  std::uint8_t protocol = 0;
  bool ipv6 = false;

  static FlowView from(const FlowRecord& f) {
    FlowView v;
    v.fwd = DirView::from(f.fwd);
    v.bwd = DirView::from(f.bwd);
    v.duration = f.duration;
    v.flow_iat = f.flow_iat;
    v.active = f.active;
    v.idle = f.idle;
    v.protocol = f.key.protocol;
    v.ipv6 = f.key.src_ip.is_v6();
    return v;
  }
};

double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }
double rate_duration(double d) { return std::max(d, kMinRateDuration); }
double var_of(const RunningStats& s) {
  const double sd = s.stddev();
  return sd * sd;
}
double range_of(const RunningStats& s) { return s.n ? s.max - s.min : 0.0; }
double min_of(const RunningStats& s) { return s.n ? s.min : 0.0; }
double max_of(const RunningStats& s) { return s.n ? s.max : 0.0; }

using FlowFn = std::function<double(const FlowView&)>;

struct FlowDef {
  FeatureSpec spec;
  FlowFn fn;
};

using DirMember = DirView FlowView::*;

// Direction block: per-direction features named with an optional prefix.
void add_direction_block(std::vector<FlowDef>& out, const std::string& prefix, DirMember dir,
                         Category only) {
  auto add = [&](const char* name, Category cat, std::function<double(const DirView&, double)> f,
                 const char* imputation = "") {
    if (cat != only) return;
    out.push_back({{prefix + name, cat, imputation},
                   [dir, f](const FlowView& v) { return f(v.*dir, v.duration); }});
  };
  using C = Category;
  // packet-based
  add("pkt_count", C::PacketBased, [](const DirView& d, double) { return d.pkt_count; });
  add("pkt_rate", C::PacketBased,
      [](const DirView& d, double dur) { return d.pkt_count / rate_duration(dur); },
      "duration floored at 1 ms");
  add("pkt_len_min", C::PacketBased, [](const DirView& d, double) { return min_of(d.pkt_len); }, kZeroImputed);
  add("pkt_len_max", C::PacketBased, [](const DirView& d, double) { return max_of(d.pkt_len); }, kZeroImputed);
  add("pkt_len_mean", C::PacketBased, [](const DirView& d, double) { return d.pkt_len.mean(); }, kZeroImputed);
  add("pkt_len_std", C::PacketBased, [](const DirView& d, double) { return d.pkt_len.stddev(); }, kZeroImputed);
  add("pkt_len_var", C::PacketBased, [](const DirView& d, double) { return var_of(d.pkt_len); }, kZeroImputed);
  add("pkt_len_range", C::PacketBased, [](const DirView& d, double) { return range_of(d.pkt_len); }, kZeroImputed);
  add("pkt_len_cv", C::PacketBased,
      [](const DirView& d, double) { return ratio(d.pkt_len.stddev(), d.pkt_len.mean()); }, kZeroImputed);
  add("zero_payload_count", C::PacketBased, [](const DirView& d, double) { return d.zero_payload_pkts; });
  add("zero_payload_ratio", C::PacketBased,
      [](const DirView& d, double) { return ratio(d.zero_payload_pkts, d.pkt_count); }, kZeroImputed);
  add("frag_count", C::PacketBased, [](const DirView& d, double) { return d.fragment_count; });
  // byte-based
  add("byte_count", C::ByteBased, [](const DirView& d, double) { return d.byte_count; });
  add("byte_rate", C::ByteBased,
      [](const DirView& d, double dur) { return d.byte_count / rate_duration(dur); },
      "duration floored at 1 ms");
  add("header_bytes", C::ByteBased, [](const DirView& d, double) { return d.header_bytes; });
  add("payload_bytes", C::ByteBased, [](const DirView& d, double) { return d.payload_bytes; });
  add("payload_ratio", C::ByteBased,
      [](const DirView& d, double) { return ratio(d.payload_bytes, d.byte_count); }, kZeroImputed);
  add("header_ratio", C::ByteBased,
      [](const DirView& d, double) { return ratio(d.header_bytes, d.byte_count); }, kZeroImputed);
  add("payload_len_min", C::ByteBased, [](const DirView& d, double) { return min_of(d.payload_len); }, kZeroImputed);
  add("payload_len_max", C::ByteBased, [](const DirView& d, double) { return max_of(d.payload_len); }, kZeroImputed);
  add("payload_len_mean", C::ByteBased, [](const DirView& d, double) { return d.payload_len.mean(); }, kZeroImputed);
  add("payload_len_std", C::ByteBased, [](const DirView& d, double) { return d.payload_len.stddev(); }, kZeroImputed);
  add("header_len_mean", C::ByteBased,
      [](const DirView& d, double) { return ratio(d.header_bytes, d.pkt_count); }, kZeroImputed);
  add("fragment_bytes", C::ByteBased, [](const DirView& d, double) { return d.fragment_bytes; });
  add("payload_rate", C::ByteBased,
      [](const DirView& d, double dur) { return d.payload_bytes / rate_duration(dur); },
      "duration floored at 1 ms");
  add("first_pkt_len", C::ByteBased, [](const DirView& d, double) { return d.first_pkt_len; }, kZeroImputed);
  add("last_pkt_len", C::ByteBased, [](const DirView& d, double) { return d.last_pkt_len; }, kZeroImputed);
  // time-based
  add("iat_min", C::TimeBased, [](const DirView& d, double) { return min_of(d.iat); }, kZeroImputed);
  add("iat_max", C::TimeBased, [](const DirView& d, double) { return max_of(d.iat); }, kZeroImputed);
  add("iat_mean", C::TimeBased, [](const DirView& d, double) { return d.iat.mean(); }, kZeroImputed);
  add("iat_std", C::TimeBased, [](const DirView& d, double) { return d.iat.stddev(); }, kZeroImputed);
  add("iat_cv", C::TimeBased,
      [](const DirView& d, double) { return ratio(d.iat.stddev(), d.iat.mean()); }, kZeroImputed);
  add("iat_range", C::TimeBased, [](const DirView& d, double) { return range_of(d.iat); }, kZeroImputed);
  add("first_iat", C::TimeBased, [](const DirView& d, double) { return d.first_iat; }, kZeroImputed);
  add("short_iat_ratio", C::TimeBased,
      [](const DirView& d, double) { return ratio(d.short_iats, static_cast<double>(d.iat.n)); }, kZeroImputed);
  add("long_iat_ratio", C::TimeBased,
      [](const DirView& d, double) { return ratio(d.long_iats, static_cast<double>(d.iat.n)); }, kZeroImputed);
  // protocol-based
  for (std::size_t bit = 0; bit < 8; ++bit) {
    const std::string n = std::string(kTcpFlagNames[bit]) + "_count";
    add(n.c_str(), C::ProtocolBased, [bit](const DirView& d, double) { return d.flags[bit]; });
  }
  for (std::size_t bit = 0; bit < 8; ++bit) {
    const std::string n = std::string(kTcpFlagNames[bit]) + "_per_pkt";
    add(n.c_str(), C::ProtocolBased,
        [bit](const DirView& d, double) { return ratio(d.flags[bit], d.pkt_count); }, kZeroImputed);
  }
  add("ttl_min", C::ProtocolBased, [](const DirView& d, double) { return min_of(d.ttl); }, kZeroImputed);
  add("ttl_max", C::ProtocolBased, [](const DirView& d, double) { return max_of(d.ttl); }, kZeroImputed);
  add("ttl_mean", C::ProtocolBased, [](const DirView& d, double) { return d.ttl.mean(); }, kZeroImputed);
  add("init_window", C::ProtocolBased, [](const DirView& d, double) { return d.init_window; },
      "0 for non-TCP");
  add("ip_header_len_mean", C::ProtocolBased,
      [](const DirView& d, double) { return d.ip_header_len.mean(); }, kZeroImputed);
  add("l4_header_len_mean", C::ProtocolBased,
      [](const DirView& d, double) { return d.l4_header_len.mean(); }, kZeroImputed);
  add("l4_header_len_max", C::ProtocolBased,
      [](const DirView& d, double) { return max_of(d.l4_header_len); }, kZeroImputed);
  add("tcp_win_min", C::ProtocolBased, [](const DirView& d, double) { return min_of(d.tcp_window); },
      "0 for non-TCP");
  add("tcp_win_max", C::ProtocolBased, [](const DirView& d, double) { return max_of(d.tcp_window); },
      "0 for non-TCP");
  add("tcp_win_mean", C::ProtocolBased, [](const DirView& d, double) { return d.tcp_window.mean(); },
      "0 for non-TCP");
}

void add_flow_block(std::vector<FlowDef>& out, Category only) {
  auto add = [&](const char* name, Category cat, FlowFn f, const char* imputation = "") {
    if (cat == only) out.push_back({{name, cat, imputation}, std::move(f)});
  };
  using C = Category;
  add("duration", C::TimeBased, [](const FlowView& v) { return v.duration; });
  add("active_count", C::TimeBased, [](const FlowView& v) { return static_cast<double>(v.active.n); });
  add("active_min", C::TimeBased, [](const FlowView& v) { return min_of(v.active); });
  add("active_max", C::TimeBased, [](const FlowView& v) { return max_of(v.active); });
  add("active_mean", C::TimeBased, [](const FlowView& v) { return v.active.mean(); });
  add("active_std", C::TimeBased, [](const FlowView& v) { return v.active.stddev(); }, kZeroImputed);
  add("idle_count", C::TimeBased, [](const FlowView& v) { return static_cast<double>(v.idle.n); });
  add("idle_min", C::TimeBased, [](const FlowView& v) { return min_of(v.idle); }, kZeroImputed);
  add("idle_max", C::TimeBased, [](const FlowView& v) { return max_of(v.idle); }, kZeroImputed);
  add("idle_mean", C::TimeBased, [](const FlowView& v) { return v.idle.mean(); }, kZeroImputed);
  add("idle_std", C::TimeBased, [](const FlowView& v) { return v.idle.stddev(); }, kZeroImputed);
  add("pkts_per_active", C::TimeBased, [](const FlowView& v) {
    return ratio(v.fwd.pkt_count + v.bwd.pkt_count, static_cast<double>(v.active.n));
  });
  add("is_tcp", C::ProtocolBased, [](const FlowView& v) { return v.protocol == ip_proto::TCP ? 1.0 : 0.0; });
  add("is_udp", C::ProtocolBased, [](const FlowView& v) { return v.protocol == ip_proto::UDP ? 1.0 : 0.0; });
  add("is_icmp", C::ProtocolBased, [](const FlowView& v) {
    return v.protocol == ip_proto::ICMP || v.protocol == ip_proto::ICMPV6 ? 1.0 : 0.0;
  });
  add("is_other", C::ProtocolBased, [](const FlowView& v) {
    const auto p = v.protocol;
    return p == ip_proto::TCP || p == ip_proto::UDP || p == ip_proto::ICMP || p == ip_proto::ICMPV6 ? 0.0 : 1.0;
  });
  add("is_ipv6", C::ProtocolBased, [](const FlowView& v) { return v.ipv6 ? 1.0 : 0.0; });
}

void add_bidirectional_extras(std::vector<FlowDef>& out, Category only) {
  auto add = [&](const char* name, Category cat, FlowFn f, const char* imputation = "") {
    if (cat == only) out.push_back({{name, cat, imputation}, std::move(f)});
  };
  using C = Category;
  add("bwd_fwd_pkt_ratio", C::PacketBased,
      [](const FlowView& v) { return ratio(v.bwd.pkt_count, v.fwd.pkt_count); });
  add("bwd_fwd_byte_ratio", C::ByteBased,
      [](const FlowView& v) { return ratio(v.bwd.byte_count, v.fwd.byte_count); });
  add("bwd_fwd_payload_ratio", C::ByteBased,
      [](const FlowView& v) { return ratio(v.bwd.payload_bytes, v.fwd.payload_bytes); }, kZeroImputed);
  add("flow_iat_min", C::TimeBased, [](const FlowView& v) { return min_of(v.flow_iat); }, kZeroImputed);
  add("flow_iat_max", C::TimeBased, [](const FlowView& v) { return max_of(v.flow_iat); }, kZeroImputed);
  add("flow_iat_mean", C::TimeBased, [](const FlowView& v) { return v.flow_iat.mean(); }, kZeroImputed);
  add("flow_iat_std", C::TimeBased, [](const FlowView& v) { return v.flow_iat.stddev(); }, kZeroImputed);
}

std::vector<FlowDef> build_flow_defs(TrafficMode mode) {
  std::vector<FlowDef> defs;
  for (Category cat : {Category::PacketBased, Category::ByteBased, Category::TimeBased,
                       Category::ProtocolBased}) {
    if (mode == TrafficMode::UniFlow) {
      add_direction_block(defs, "", &FlowView::fwd, cat);
    } else {
      add_direction_block(defs, "fwd_", &FlowView::fwd, cat);
      add_direction_block(defs, "bwd_", &FlowView::bwd, cat);
      add_bidirectional_extras(defs, cat);
    }
    add_flow_block(defs, cat);
  }
  return defs;
}

struct PacketView {
  const PacketRecord& p;
  const PacketContext::Entry& ctx;
  double iat_prev;
};

struct PacketDef {
  FeatureSpec spec;
  double (*fn)(const PacketView&);
};

template <std::uint8_t Flag>
double flag_bit(const PacketView& v) {
  return v.p.has_flag(Flag) ? 1.0 : 0.0;
}

std::vector<PacketDef> build_packet_defs() {
  using C = Category;
  std::vector<PacketDef> d = {
      {{"pkt_index", C::PacketBased, ""},
       [](const PacketView& v) { return static_cast<double>(v.ctx.pkt_count); }},
      {{"total_len", C::ByteBased, ""},
       [](const PacketView& v) { return static_cast<double>(v.p.total_len); }},
      {{"payload_len", C::ByteBased, ""},
       [](const PacketView& v) { return static_cast<double>(v.p.payload_len); }},
      {{"flow_bytes_so_far", C::ByteBased, ""},
       [](const PacketView& v) { return static_cast<double>(v.ctx.byte_count); }},
      {{"flow_mean_len_so_far", C::ByteBased, ""},
       [](const PacketView& v) {
         return static_cast<double>(v.ctx.byte_count) / static_cast<double>(v.ctx.pkt_count);
       }},
      {{"iat_prev", C::TimeBased, "0 for the first packet of a flow"},
       [](const PacketView& v) { return v.iat_prev; }},
      {{"iat_mean_so_far", C::TimeBased, "0 for the first packet of a flow"},
       [](const PacketView& v) {
         return v.ctx.pkt_count > 1 ? v.ctx.iat_sum / static_cast<double>(v.ctx.pkt_count - 1) : 0.0;
       }},
      {{"flow_elapsed", C::TimeBased, ""},
       [](const PacketView& v) {
         return static_cast<double>(v.ctx.last_ts_us - v.ctx.first_ts_us) * 1e-6;
       }},
      {{"ip_header_len", C::ProtocolBased, ""},
       [](const PacketView& v) { return static_cast<double>(v.p.ip_header_len); }},
      {{"l4_header_len", C::ProtocolBased, ""},
       [](const PacketView& v) { return static_cast<double>(v.p.l4_header_len); }},
      {{"ttl", C::ProtocolBased, ""}, [](const PacketView& v) { return static_cast<double>(v.p.ttl); }},
      {{"tcp_window", C::ProtocolBased, "0 for non-TCP"},
       [](const PacketView& v) { return static_cast<double>(v.p.tcp_window.value_or(0)); }},
      {{"is_tcp", C::ProtocolBased, ""},
       [](const PacketView& v) { return v.p.protocol == ip_proto::TCP ? 1.0 : 0.0; }},
      {{"is_udp", C::ProtocolBased, ""},
       [](const PacketView& v) { return v.p.protocol == ip_proto::UDP ? 1.0 : 0.0; }},
      {{"is_icmp", C::ProtocolBased, ""},
       [](const PacketView& v) {
         return v.p.protocol == ip_proto::ICMP || v.p.protocol == ip_proto::ICMPV6 ? 1.0 : 0.0;
       }},
      {{"is_other", C::ProtocolBased, ""},
       [](const PacketView& v) {
         const auto p = v.p.protocol;
         return p == ip_proto::TCP || p == ip_proto::UDP || p == ip_proto::ICMP ||
                        p == ip_proto::ICMPV6
                    ? 0.0
                    : 1.0;
       }},
      {{"fin", C::ProtocolBased, ""}, &flag_bit<tcp_flag::FIN>},
      {{"syn", C::ProtocolBased, ""}, &flag_bit<tcp_flag::SYN>},
      {{"rst", C::ProtocolBased, ""}, &flag_bit<tcp_flag::RST>},
      {{"psh", C::ProtocolBased, ""}, &flag_bit<tcp_flag::PSH>},
      {{"ack", C::ProtocolBased, ""}, &flag_bit<tcp_flag::ACK>},
      {{"urg", C::ProtocolBased, ""}, &flag_bit<tcp_flag::URG>},
      {{"ece", C::ProtocolBased, ""}, &flag_bit<tcp_flag::ECE>},
      {{"cwr", C::ProtocolBased, ""}, &flag_bit<tcp_flag::CWR>},
  };
  return d;
}

const std::vector<FlowDef>& flow_defs(TrafficMode mode) {
  static const std::vector<FlowDef> uni = build_flow_defs(TrafficMode::UniFlow);
  static const std::vector<FlowDef> bi = build_flow_defs(TrafficMode::BiFlow);
  return mode == TrafficMode::UniFlow ? uni : bi;
}

const std::vector<PacketDef>& packet_defs() {
  static const std::vector<PacketDef> defs = build_packet_defs();
  return defs;
}

template <typename Defs>
FeatureManifest manifest_of(TrafficMode mode, const Defs& defs) {
  std::vector<FeatureSpec> specs;
  specs.reserve(defs.size());
  for (const auto& d : defs) specs.push_back(d.spec);
  return FeatureManifest(mode, std::move(specs));
}

// Maps manifest positions to catalog positions. The last resolution is
// cached per thread since callers featurize many rows with one manifest.
const std::vector<std::size_t>& resolve(const FeatureManifest& manifest) {
  thread_local std::string cached_hash;
  thread_local std::vector<std::size_t> cached;
  const std::string h = manifest.hash();
  if (h == cached_hash) return cached;
  const FeatureManifest& full = catalog(manifest.mode());
  std::vector<std::size_t> idx;
  idx.reserve(manifest.size());
  for (const auto& spec : manifest.features()) {
    auto at = full.index_of(spec.name);
    if (!at) {
      fail(ErrorCode::ManifestMismatch,
           "feature '" + spec.name + "' is not in the " + to_string(manifest.mode()) + " catalog");
    }
    idx.push_back(*at);
  }
  cached = std::move(idx);
  cached_hash = h;
  return cached;
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::string to_string(Category c) {
  switch (c) {
    case Category::PacketBased: return "packet_based";
    case Category::ByteBased: return "byte_based";
    case Category::TimeBased: return "time_based";
    case Category::ProtocolBased: return "protocol_based";
    case Category::Unspecified: return "unspecified";
  }
  return "unspecified";
}

std::string to_string(TrafficMode m) {
  switch (m) {
    case TrafficMode::UniFlow: return "uni_flow";
    case TrafficMode::BiFlow: return "bi_flow";
    case TrafficMode::Packet: return "packet";
  }
  return "uni_flow";
}

TrafficMode parse_traffic_mode(std::string_view text) {
  if (text == "uni_flow" || text == "uni") return TrafficMode::UniFlow;
  if (text == "bi_flow" || text == "bi") return TrafficMode::BiFlow;
  if (text == "packet") return TrafficMode::Packet;
  fail(ErrorCode::ConfigInvalid, "unknown traffic mode '" + std::string(text) + "'");
}

DirectionMode direction_of(TrafficMode m) {
  return m == TrafficMode::BiFlow ? DirectionMode::Bidirectional : DirectionMode::Unidirectional;
}

FeatureManifest::FeatureManifest(TrafficMode mode, std::vector<FeatureSpec> features)
    : mode_(mode), features_(std::move(features)) {}

std::vector<std::string> FeatureManifest::names() const {
  std::vector<std::string> out;
  out.reserve(features_.size());
  for (const auto& f : features_) out.push_back(f.name);
  return out;
}

std::optional<std::size_t> FeatureManifest::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  return std::nullopt;
}

std::string FeatureManifest::hash() const {
  std::uint64_t h = fnv1a(to_string(mode_));
  for (const auto& f : features_) {
    h = fnv1a("\x1f", h);
    h = fnv1a(f.name, h);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

FeatureManifest FeatureManifest::subset(const std::vector<std::string>& keep) const {
  for (const auto& name : keep) {
    if (!index_of(name)) fail(ErrorCode::ManifestMismatch, "unknown feature '" + name + "'");
  }
  std::vector<FeatureSpec> out;
  for (const auto& f : features_) {
    if (std::find(keep.begin(), keep.end(), f.name) != keep.end()) out.push_back(f);
  }
  return FeatureManifest(mode_, std::move(out));
}

const FeatureManifest& catalog(TrafficMode mode) {
  static const FeatureManifest uni = manifest_of(TrafficMode::UniFlow, flow_defs(TrafficMode::UniFlow));
  static const FeatureManifest bi = manifest_of(TrafficMode::BiFlow, flow_defs(TrafficMode::BiFlow));
  static const FeatureManifest pkt = manifest_of(TrafficMode::Packet, packet_defs());
  switch (mode) {
    case TrafficMode::UniFlow: return uni;
    case TrafficMode::BiFlow: return bi;
    case TrafficMode::Packet: return pkt;
  }
  return uni;
}

FeatureManifest manifest_from_names(TrafficMode mode, const std::vector<std::string>& names) {
  const FeatureManifest& full = catalog(mode);
  std::vector<FeatureSpec> specs;
  for (const auto& n : names) {
    auto at = full.index_of(n);
    specs.push_back(at ? full[*at] : FeatureSpec{n, Category::Unspecified, ""});
  }
  return FeatureManifest(mode, std::move(specs));
}

std::vector<double> flow_features(const FlowRecord& flow, const FeatureManifest& manifest) {
  if (manifest.mode() == TrafficMode::Packet) {
    fail(ErrorCode::ManifestMismatch, "packet manifest used for flow features");
  }
  if (direction_of(manifest.mode()) != flow.key.mode) {
    fail(ErrorCode::ManifestMismatch, "flow direction mode does not match manifest mode " +
                                          to_string(manifest.mode()));
  }
  const auto& defs = flow_defs(manifest.mode());
  const auto& idx = resolve(manifest);
  const FlowView view = FlowView::from(flow);
  std::vector<double> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = defs[idx[i]].fn(view);
  return out;
}

std::pair<PacketContext::Entry, double> PacketContext::observe(const PacketRecord& p) {
  prune(p.ts_us);
  const FlowKey key = flow_key_of(p, DirectionMode::Unidirectional);
  auto [it, fresh] = entries_.try_emplace(key);
  Entry& e = it->second;
  const auto idle_us = static_cast<std::int64_t>(idle_timeout_ * 1e6);
  double gap = 0.0;
  if (!fresh && p.ts_us - e.last_ts_us > idle_us) {
    e = Entry{};
    fresh = true;
  }
  if (fresh || e.pkt_count == 0) {
    e.first_ts_us = p.ts_us;
  } else {
    gap = static_cast<double>(p.ts_us - e.last_ts_us) * 1e-6;
    e.iat_sum += gap;
  }
  e.last_ts_us = p.ts_us;
  ++e.pkt_count;
  e.byte_count += p.total_len;
  return {e, gap};
}

void PacketContext::prune(std::int64_t now_us) {
  if (now_us < next_prune_us_) return;
  const auto idle_us = static_cast<std::int64_t>(idle_timeout_ * 1e6);
  std::erase_if(entries_, [&](const auto& kv) { return now_us - kv.second.last_ts_us > idle_us; });
  next_prune_us_ = now_us + std::max<std::int64_t>(idle_us, 1'000'000);
}

std::vector<double> packet_features(const PacketRecord& p, PacketContext& ctx,
                                    const FeatureManifest& manifest) {
  if (manifest.mode() != TrafficMode::Packet) {
    fail(ErrorCode::ManifestMismatch, "flow manifest used for packet features");
  }
  const auto& defs = packet_defs();
  const auto& idx = resolve(manifest);
  const auto [entry, gap] = ctx.observe(p);
  const PacketView view{p, entry, gap};
  std::vector<double> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = defs[idx[i]].fn(view);
  return out;
}

FeatureMatrix FeatureMatrix::project(const FeatureManifest& target) const {
  std::vector<std::size_t> cols;
  cols.reserve(target.size());
  for (const auto& f : target.features()) {
    auto at = manifest.index_of(f.name);
    if (!at) fail(ErrorCode::ManifestMismatch, "matrix has no column '" + f.name + "'");
    cols.push_back(*at);
  }
  return FeatureMatrix{target, values.select_cols(cols), labels};
}

namespace {

FeatureMatrix read_csv_impl(const std::filesystem::path& path, bool keep_labels) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IOError, "cannot open feature CSV '" + path.string() + "'");
  std::string line;
  std::optional<TrafficMode> mode;
  std::optional<std::string> declared_hash;
  while (std::getline(in, line) && !line.empty() && line[0] == '#') {
    std::istringstream meta(line.substr(1));
    std::string tok;
    while (meta >> tok) {
      if (tok.rfind("mode=", 0) == 0) mode = parse_traffic_mode(tok.substr(5));
      if (tok.rfind("manifest=", 0) == 0) declared_hash = tok.substr(9);
    }
  }
  if (line.empty()) fail(ErrorCode::IOError, "feature CSV '" + path.string() + "' has no header");
  auto names = csv::split(line);
  const bool has_label = !names.empty() && names.back() == "label";
  if (has_label) names.pop_back();

  FeatureMatrix m;
  m.manifest = manifest_from_names(mode.value_or(TrafficMode::UniFlow), names);
  if (declared_hash && *declared_hash != m.manifest.hash()) {
    fail(ErrorCode::ManifestMismatch, "feature CSV '" + path.string() +
                                          "' header does not match its manifest hash");
  }
  m.values = Matrix(0, names.size());
  std::vector<double> row(names.size());
  std::size_t line_no = 0;
  const std::string file = path.filename().string();
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = csv::split(line);
    if (fields.size() != names.size() + (has_label ? 1 : 0)) {
      fail(ErrorCode::ManifestMismatch, file + ": row " + std::to_string(line_no) +
                                            " has " + std::to_string(fields.size()) + " fields");
    }
    for (std::size_t c = 0; c < names.size(); ++c) {
      row[c] = csv::to_double(fields[c], file);
    }
    m.values.append_row(row);
    if (has_label && keep_labels) m.labels.push_back(parse_label(fields.back()));
  }
  return m;
}

}  // namespace

void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IOError, "cannot create '" + path.string() + "'");
  out << "# botwatch manifest=" << m.manifest.hash() << " mode=" << to_string(m.manifest.mode())
      << '\n';
  const auto names = m.manifest.names();
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  if (m.has_labels()) out << ",label";
  out << '\n';
  for (std::size_t r = 0; r < m.values.rows(); ++r) {
    const auto row = m.values.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << csv::format_double(row[c]);
    if (m.has_labels()) out << ',' << to_string(m.labels[r]);
    out << '\n';
  }
  if (!out) fail(ErrorCode::IOError, "write failed on '" + path.string() + "'");
}

FeatureMatrix read_feature_csv(const std::filesystem::path& path) {
  return read_csv_impl(path, true);
}

FeatureMatrix read_feature_csv_unlabeled(const std::filesystem::path& path) {
  return read_csv_impl(path, false);
}

void write_manifest_file(const std::filesystem::path& path, const FeatureManifest& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IOError, "cannot create '" + path.string() + "'");
  out << "# mode=" << to_string(m.mode()) << " manifest=" << m.hash() << '\n';
  for (const auto& f : m.features()) out << f.name << '\n';
}

FeatureManifest read_manifest_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IOError, "cannot open manifest '" + path.string() + "'");
  std::string line;
  TrafficMode mode = TrafficMode::UniFlow;
  std::vector<std::string> names;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto at = line.find("mode=");
      if (at != std::string::npos) {
        auto end = line.find(' ', at);
        mode = parse_traffic_mode(line.substr(at + 5, end == std::string::npos ? end : end - at - 5));
      }
      continue;
    }
    names.push_back(line);
  }
  return manifest_from_names(mode, names);
}

}  // namespace botwatch
