#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "botwatch/flow.hpp"

namespace botwatch {

enum class Label : std::uint8_t { Normal, DDoS, Scan, Attack, CnC, Download, HeartBeat };

inline constexpr std::array<Label, 7> kAllLabels = {
    Label::Normal, Label::DDoS,     Label::Scan,     Label::Attack,
    Label::CnC,    Label::Download, Label::HeartBeat};

std::string_view to_string(Label l) noexcept;
/// Case-insensitive; accepts "C&C", "CnC" and "C2" for the control class.
/// Throws Error(LabelVocabularyMismatch).
Label parse_label(std::string_view text);
inline bool is_anomaly(Label l) noexcept { return l != Label::Normal; }

/// One row of a label file: annotates a 5-tuple from window_start onward.
struct LabelRow {
  IpAddress src_ip;
  IpAddress dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t protocol = 0;
  double window_start = 0.0;
  Label label = Label::Normal;
};

/// Label CSV: header `src_ip,dst_ip,src_port,dst_port,protocol,window_start,label`.
std::vector<LabelRow> read_label_file(const std::filesystem::path& path);
void write_label_file(const std::filesystem::path& path, const std::vector<LabelRow>& rows);

/// Direction-insensitive lookup: a row covers its 5-tuple (either direction)
/// from window_start until the next row for the same 5-tuple.
class LabelIndex {
 public:
  explicit LabelIndex(const std::vector<LabelRow>& rows);

  /// Label in effect for `key` at time `ts`; Normal when nothing matches.
  Label lookup(const FlowKey& key, double ts) const;
  std::uint64_t misses() const noexcept { return misses_; }

 private:
  std::unordered_map<FlowKey, std::vector<std::pair<double, Label>>, FlowKeyHash> rows_;
  mutable std::uint64_t misses_ = 0;
};

}  // namespace botwatch
