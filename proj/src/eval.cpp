#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "botwatch/csv.hpp"
#include "botwatch/error.hpp"
#include "botwatch/eval.hpp"
#include "botwatch/stats.hpp"
#include "botwatch/threshold.hpp"

namespace botwatch {

EvalReport evaluate_scores(std::span<const double> scores, const std::vector<Label>& labels,
                           double threshold) {
  if (scores.empty()) fail(ErrorCode::InvalidArgument, "nothing to evaluate");
  if (labels.size() != scores.size()) {
    fail(ErrorCode::LabelVocabularyMismatch, "evaluation needs one label per instance");
  }
  EvalReport r;
  r.threshold = threshold;
  std::vector<bool> positive(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool actual = is_anomaly(labels[i]);
    const bool predicted = flag(scores[i], threshold);
    positive[i] = actual;
    r.confusion.add(predicted, actual);
    if (actual) {
      auto& c = r.per_class[labels[i]];
      ++c.total;
      c.detected += predicted;
    }
  }
  r.metrics = binary_metrics(r.confusion);
  if (r.confusion.tp + r.confusion.fn > 0 && r.confusion.fp + r.confusion.tn > 0) {
    r.auc = auc(scores, positive);
    r.roc = roc_curve(scores, positive);
  }
  return r;
}

EvalReport evaluate(const DetectorModel& model, const FeatureMatrix& labeled) {
  if (!labeled.has_labels()) {
    fail(ErrorCode::LabelVocabularyMismatch, "evaluation rows carry no labels");
  }
  const auto scores = model.score_matrix(labeled);
  EvalReport r = evaluate_scores(scores, labeled.labels, model.threshold);
  r.manifest_hash = model.manifest().hash();
  return r;
}

namespace {

std::vector<Label> classes_in(const std::vector<ReportRow>& rows) {
  std::set<Label> seen;
  for (const auto& row : rows) {
    for (const auto& [l, c] : row.report.per_class) seen.insert(l);
  }
  return {seen.begin(), seen.end()};
}

std::string opt_csv(const std::optional<double>& v) { return v ? csv::format_double(*v) : ""; }

std::string opt_pct(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v * 100.0);
  return buf;
}

}  // namespace

void write_report_csv(const std::filesystem::path& path, const std::vector<ReportRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IOError, "cannot create '" + path.string() + "'");
  const auto classes = classes_in(rows);
  if (!rows.empty()) out << "# botwatch manifest=" << rows.front().report.manifest_hash << '\n';
  out << "name,tp,fp,tn,fn,threshold,precision,accuracy,recall,fpr,f1,auc";
  for (auto l : classes) out << ",recall_" << to_string(l);
  out << '\n';
  for (const auto& row : rows) {
    const auto& r = row.report;
    const auto& m = r.metrics;
    out << row.name << ',' << r.confusion.tp << ',' << r.confusion.fp << ',' << r.confusion.tn << ','
        << r.confusion.fn << ',' << csv::format_double(r.threshold) << ',' << opt_csv(m.precision) << ','
        << opt_csv(m.accuracy) << ',' << opt_csv(m.recall) << ',' << opt_csv(m.fpr) << ','
        << opt_csv(m.f1) << ',' << opt_csv(r.auc);
    for (auto l : classes) {
      auto it = r.per_class.find(l);
      out << ',' << (it == r.per_class.end() ? "" : opt_csv(it->second.recall()));
    }
    out << '\n';
  }
  if (!out) fail(ErrorCode::IOError, "write failed on '" + path.string() + "'");
}

std::string format_report_table(const std::vector<ReportRow>& rows) {
  const auto classes = classes_in(rows);
  std::vector<std::string> header{"", "Precision", "Accuracy", "Recall", "FPR", "F1", "AUC"};
  for (auto l : classes) header.push_back(std::string(to_string(l)));
  std::vector<std::vector<std::string>> cells{header};
  for (const auto& row : rows) {
    const auto& m = row.report.metrics;
    std::vector<std::string> line{row.name, opt_pct(m.precision), opt_pct(m.accuracy), opt_pct(m.recall),
                                  opt_pct(m.fpr), opt_pct(m.f1), opt_pct(row.report.auc)};
    for (auto l : classes) {
      auto it = row.report.per_class.find(l);
      line.push_back(it == row.report.per_class.end() ? "-" : opt_pct(it->second.recall()));
    }
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  }
  std::ostringstream os;
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c == 0) {
        os << line[c] << std::string(width[c] - line[c].size(), ' ');
      } else {
        os << "  " << std::string(width[c] - line[c].size(), ' ') << line[c];
      }
    }
    os << '\n';
  }
  return os.str();
}

void write_roc_csv(const std::filesystem::path& path, const std::vector<RocPoint>& roc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IOError, "cannot create '" + path.string() + "'");
  out << "threshold,fpr,tpr\n";
  for (const auto& p : roc) {
    out << (std::isinf(p.threshold) ? std::string("inf") : csv::format_double(p.threshold)) << ','
        << csv::format_double(p.fpr) << ',' << csv::format_double(p.tpr) << '\n';
  }
  if (!out) fail(ErrorCode::IOError, "write failed on '" + path.string() + "'");
}

std::string tw_label(const std::optional<double>& tw) {
  if (!tw) return "default";
  return csv::format_double(*tw);
}

std::vector<SweepRow> tw_sweep(const std::vector<PacketRecord>& train_packets,
                               const std::vector<PacketRecord>& test_packets, const LabelIndex& labels,
                               const SweepOptions& opt) {
  if (opt.tws.empty()) fail(ErrorCode::InvalidArgument, "empty time-window list");
  std::vector<SweepRow> rows;
  for (const auto& tw : opt.tws) {
    if (tw && !(*tw > 0.0)) fail(ErrorCode::InvalidArgument, "time windows must be positive");
    ExtractOptions eo{opt.mode, tw, opt.idle_timeout, opt.manifest};
    const Extraction train = extract_packets(train_packets, eo);
    const Extraction test = extract_packets(test_packets, eo, &labels);
    const ExtractionSettings settings{opt.mode, tw, opt.idle_timeout};
    const DetectorModel model = train_model(train.features, opt.kind, opt.params, opt.target_fpr, settings, opt.seed);
    SweepRow row;
    row.tw = tw;
    row.train_rows = train.features.values.rows();
    row.test_rows = test.features.values.rows();
    row.report = evaluate(model, test.features);
    rows.push_back(std::move(row));
  }
  return rows;
}

LatencyReport delay_benchmark(const std::filesystem::path& pcap, const DetectorModel& model) {
  using Clock = std::chrono::steady_clock;
  auto micros = [](Clock::duration d) { return std::chrono::duration<double, std::micro>(d).count(); };

  LatencyReport r;
  PcapFileReader reader(pcap);
  const LinkType link = reader.link_type();
  const FeatureManifest& manifest = model.manifest();
  const bool packet_mode = model.extraction.mode == TrafficMode::Packet;
  PacketContext ctx(model.extraction.idle_timeout);
  std::vector<double> per_packet, per_flow;
  std::vector<double> raw, norm(model.normalizer.retained_index.size());
  double sink = 0.0;

  auto score_flow = [&](FlowRecord&& f) {
    const auto t0 = Clock::now();
    raw = flow_features(f, manifest);
    model.normalizer.apply_row(raw, norm);
    sink += model.detector->score(norm);
    per_flow.push_back(micros(Clock::now() - t0));
  };
  RawRecord rec;
  std::vector<FlowRecord> closed;
  std::optional<FlowMeter> meter;
  if (!packet_mode) {
    MeterConfig cfg;
    cfg.mode = direction_of(model.extraction.mode);
    cfg.tw_seconds = model.extraction.tw_seconds;
    cfg.idle_timeout = model.extraction.idle_timeout;
    meter.emplace(cfg, [&](FlowRecord&& f) { closed.push_back(std::move(f)); });
  }
  const auto wall0 = Clock::now();
  while (reader.next(rec)) {
    const auto t0 = Clock::now();
    const DecodedFrame d = decode_frame(rec.bytes, link, rec.wire_len, rec.ts_us);
    if (!d.packet) continue;
    if (packet_mode) {
      raw = packet_features(*d.packet, ctx, manifest);
      model.normalizer.apply_row(raw, norm);
      sink += model.detector->score(norm);
    } else {
      meter->push(*d.packet);
    }
    per_packet.push_back(micros(Clock::now() - t0));
    for (auto& f : closed) score_flow(std::move(f));
    closed.clear();
  }
  if (meter) {
    meter->flush();
    for (auto& f : closed) score_flow(std::move(f));
  }
  r.wall_seconds = std::chrono::duration<double>(Clock::now() - wall0).count();
  (void)sink;

  r.packets = per_packet.size();
  if (!per_packet.empty()) {
    std::sort(per_packet.begin(), per_packet.end());
    r.p50_us = stats::quantile_sorted(per_packet, 0.50);
    r.p95_us = stats::quantile_sorted(per_packet, 0.95);
    r.p99_us = stats::quantile_sorted(per_packet, 0.99);
    r.max_us = per_packet.back();
    double total = 0.0;
    for (double v : per_packet) total += v;
    r.throughput_pps = total > 0.0 ? static_cast<double>(per_packet.size()) / (total * 1e-6) : 0.0;
  }
  if (!packet_mode) {
    r.flows = per_flow.size();
    r.flow_floor_seconds = model.extraction.tw_seconds.value_or(model.extraction.idle_timeout);
    if (!per_flow.empty()) r.flow_residual_p95_us = stats::quantile(per_flow, 0.95);
  }
  return r;
}

std::string format_latency(const LatencyReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "packets=%zu p50_us=%.3f p95_us=%.3f p99_us=%.3f max_us=%.3f throughput_pps=%.0f wall_s=%.3f",
                r.packets, r.p50_us, r.p95_us, r.p99_us, r.max_us, r.throughput_pps, r.wall_seconds);
  std::string s = buf;
  if (r.flow_floor_seconds) {
    std::snprintf(buf, sizeof buf, " flows=%zu flow_floor_s=%.3f flow_residual_p95_us=%.3f", r.flows,
                  *r.flow_floor_seconds, r.flow_residual_p95_us.value_or(0.0));
    s += buf;
  }
  return s;
}

}  // namespace botwatch
