#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "botwatch/flow.hpp"
#include "botwatch/labels.hpp"
#include "botwatch/matrix.hpp"

namespace botwatch {

enum class Category { PacketBased, ByteBased, TimeBased, ProtocolBased, Unspecified };
enum class TrafficMode { UniFlow, BiFlow, Packet };

std::string to_string(Category c);
std::string to_string(TrafficMode m);
TrafficMode parse_traffic_mode(std::string_view text);
DirectionMode direction_of(TrafficMode m);

struct FeatureSpec {
  std::string name;
  Category category = Category::Unspecified;
  /// How undefined statistics are imputed, when that can happen.
  std::string imputation;
};

/// Ordered names of the columns of a FeatureMatrix.
class FeatureManifest {
 public:
  FeatureManifest() = default;
  FeatureManifest(TrafficMode mode, std::vector<FeatureSpec> features);

  TrafficMode mode() const noexcept { return mode_; }
  std::size_t size() const noexcept { return features_.size(); }
  const std::vector<FeatureSpec>& features() const noexcept { return features_; }
  const FeatureSpec& operator[](std::size_t i) const { return features_[i]; }
  std::vector<std::string> names() const;
  std::optional<std::size_t> index_of(const std::string& name) const;

  /// Stable 64-bit FNV-1a hash of mode and names, printed as 16 hex digits.
  std::string hash() const;

  /// Columns named in `keep`, in this manifest's order. Throws
  /// Error(ManifestMismatch) on unknown names.
  FeatureManifest subset(const std::vector<std::string>& keep) const;

  friend bool operator==(const FeatureManifest& a, const FeatureManifest& b) {
    return a.mode_ == b.mode_ && a.names() == b.names();
  }

 private:
  TrafficMode mode_ = TrafficMode::UniFlow;
  std::vector<FeatureSpec> features_;
};

/// The full catalog for a traffic mode.
const FeatureManifest& catalog(TrafficMode mode);

/// Builds a manifest from column names, taking category metadata from the
/// catalog where a name matches.
FeatureManifest manifest_from_names(TrafficMode mode, const std::vector<std::string>& names);

/// Computes a flow's feature vector for `manifest` (which must be the catalog
/// of the flow's mode or a subset of it). Throws Error(ManifestMismatch).
std::vector<double> flow_features(const FlowRecord& flow, const FeatureManifest& manifest);

/// Per-flow running state for packet-mode features. Entries idle longer than
/// the timeout are forgotten, so the next packet starts a fresh flow.
class PacketContext {
 public:
  explicit PacketContext(double idle_timeout = 15.0) : idle_timeout_(idle_timeout) {}

  struct Entry {
    std::int64_t first_ts_us = 0;
    std::int64_t last_ts_us = 0;
    std::uint64_t pkt_count = 0;
    std::uint64_t byte_count = 0;
    double iat_sum = 0.0;
  };

  /// Updates state with `p` and returns the entry after the update along
  /// with the gap to the previous packet (0 for the first).
  std::pair<Entry, double> observe(const PacketRecord& p);
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  void prune(std::int64_t now_us);

  double idle_timeout_;
  std::unordered_map<FlowKey, Entry, FlowKeyHash> entries_;
  std::int64_t next_prune_us_ = INT64_MIN;
};

/// Packet-mode feature vector for `manifest` (packet catalog or a subset).
std::vector<double> packet_features(const PacketRecord& p, PacketContext& ctx,
                                    const FeatureManifest& manifest);

/// Row-per-instance numeric table with its manifest and optional labels.
struct FeatureMatrix {
  FeatureManifest manifest;
  Matrix values;
  std::vector<Label> labels;  ///< empty, or one per row

  bool has_labels() const noexcept { return !labels.empty(); }
  /// Keeps only the named columns.
  FeatureMatrix project(const FeatureManifest& target) const;
};

/// CSV interchange: optional `# botwatch manifest=<hash> mode=<mode>` line,
/// header row of feature names, optional trailing `label` column.
void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_feature_csv(const std::filesystem::path& path);
/// Same as read_feature_csv but the label column, if any, is discarded
/// unread. Training code uses this path.
FeatureMatrix read_feature_csv_unlabeled(const std::filesystem::path& path);

/// Reduced manifest file: one feature name per line, preceded by a
/// `# mode=<mode>` line.
void write_manifest_file(const std::filesystem::path& path, const FeatureManifest& m);
FeatureManifest read_manifest_file(const std::filesystem::path& path);

}  // namespace botwatch
