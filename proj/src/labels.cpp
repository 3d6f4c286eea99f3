#include "botwatch/labels.hpp"

#include <algorithm>
#include <cstdio>
#include <cctype>
#include <fstream>

#include "botwatch/csv.hpp"
#include "botwatch/error.hpp"

namespace botwatch {

std::string_view to_string(Label l) noexcept {
  switch (l) {
    case Label::Normal: return "Normal";
    case Label::DDoS: return "DDoS";
    case Label::Scan: return "Scan";
    case Label::Attack: return "Attack";
    case Label::CnC: return "C&C";
    case Label::Download: return "Download";
    case Label::HeartBeat: return "HeartBeat";
  }
  return "?";
}

Label parse_label(std::string_view text) {
  std::string lower;
  for (char c : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "normal" || lower == "benign") return Label::Normal;
  if (lower == "ddos") return Label::DDoS;
  if (lower == "scan") return Label::Scan;
  if (lower == "attack") return Label::Attack;
  if (lower == "c&c" || lower == "cnc" || lower == "c2") return Label::CnC;
  if (lower == "download") return Label::Download;
  if (lower == "heartbeat") return Label::HeartBeat;
  fail(ErrorCode::LabelVocabularyMismatch, "unknown label '" + std::string(text) + "'");
}

std::vector<LabelRow> read_label_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IOError, "cannot open label file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::IOError, "empty label file '" + path.string() + "'");
  const auto header = csv::split(line);
  const std::vector<std::string> expected = {"src_ip",   "dst_ip",       "src_port", "dst_port",
                                             "protocol", "window_start", "label"};
  if (header != expected) {
    fail(ErrorCode::ConfigInvalid, "label file header must be " +
                                       std::string("src_ip,dst_ip,src_port,dst_port,protocol,window_start,label"));
  }
  std::vector<LabelRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = csv::split(line);
    const std::string ctx = path.filename().string() + ":" + std::to_string(line_no);
    if (f.size() != 7) fail(ErrorCode::ConfigInvalid, "expected 7 fields at " + ctx);
    LabelRow r;
    r.src_ip = IpAddress::parse(f[0]);
    r.dst_ip = IpAddress::parse(f[1]);
    r.src_port = static_cast<std::uint16_t>(csv::to_double(f[2], ctx));
    r.dst_port = static_cast<std::uint16_t>(csv::to_double(f[3], ctx));
    r.protocol = static_cast<std::uint8_t>(csv::to_double(f[4], ctx));
    r.window_start = csv::to_double(f[5], ctx);
    r.label = parse_label(f[6]);
    rows.push_back(r);
  }
  return rows;
}

void write_label_file(const std::filesystem::path& path, const std::vector<LabelRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IOError, "cannot create '" + path.string() + "'");
  out << "src_ip,dst_ip,src_port,dst_port,protocol,window_start,label\n";
  char ts[64];
  for (const auto& r : rows) {
    std::snprintf(ts, sizeof(ts), "%.6f", r.window_start);
    out << r.src_ip.to_string() << ',' << r.dst_ip.to_string() << ',' << r.src_port << ','
        << r.dst_port << ',' << int{r.protocol} << ',' << ts << ',' << to_string(r.label) << '\n';
  }
  if (!out) fail(ErrorCode::IOError, "write failed on '" + path.string() + "'");
}

LabelIndex::LabelIndex(const std::vector<LabelRow>& rows) {
  for (const auto& r : rows) {
    FlowKey k{r.src_ip, r.dst_ip, r.src_port, r.dst_port, r.protocol,
              DirectionMode::Bidirectional};
    rows_[k].emplace_back(r.window_start, r.label);
  }
  for (auto& [k, v] : rows_) {
    std::stable_sort(v.begin(), v.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
  }
}

Label LabelIndex::lookup(const FlowKey& key, double ts) const {
  FlowKey k = key;
  k.mode = DirectionMode::Bidirectional;
  auto it = rows_.find(k);
  if (it == rows_.end()) {
    ++misses_;
    return Label::Normal;
  }
  const auto& v = it->second;
  // Label files carry microsecond text; allow that much slack on the start.
  auto pos = std::upper_bound(v.begin(), v.end(), ts + 1e-6,
                              [](double t, const auto& row) { return t < row.first; });
  if (pos == v.begin()) {
    ++misses_;
    return Label::Normal;
  }
  return std::prev(pos)->second;
}

}  // namespace botwatch
