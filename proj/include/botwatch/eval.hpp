#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "botwatch/labels.hpp"
#include "botwatch/metrics.hpp"
#include "botwatch/model.hpp"
#include "botwatch/pipeline.hpp"

namespace botwatch {

struct ClassRecall {
  std::uint64_t detected = 0;
  std::uint64_t total = 0;
  std::optional<double> recall() const {
    if (total == 0) return std::nullopt;
    return static_cast<double>(detected) / static_cast<double>(total);
  }
};

struct EvalReport {
  std::string manifest_hash;
  double threshold = 0.0;
  Confusion confusion;
  BinaryMetrics metrics;
  std::optional<double> auc;  ///< undefined with a single class
  std::map<Label, ClassRecall> per_class;  ///< non-Normal labels present
  std::vector<RocPoint> roc;
};

/// Binary metrics from score > threshold, AUC from raw scores.
EvalReport evaluate_scores(std::span<const double> scores, const std::vector<Label>& labels,
                           double threshold);
/// Scores a labeled matrix with `model`. Throws
/// Error(LabelVocabularyMismatch) when the rows carry no labels.
EvalReport evaluate(const DetectorModel& model, const FeatureMatrix& labeled);

/// One named row of a comparison table.
struct ReportRow {
  std::string name;
  EvalReport report;
};

/// CSV: name, counts, six metrics, then recall per class seen in any row.
void write_report_csv(const std::filesystem::path& path, const std::vector<ReportRow>& rows);
/// Aligned text table with metrics as percentages; "-" marks undefined.
std::string format_report_table(const std::vector<ReportRow>& rows);
void write_roc_csv(const std::filesystem::path& path, const std::vector<RocPoint>& roc);

struct SweepOptions {
  DetectorKind kind = DetectorKind::IsolationForest;
  ParamMap params;  ///< empty selects defaults
  TrafficMode mode = TrafficMode::UniFlow;
  double idle_timeout = 15.0;
  double target_fpr = 0.02;
  std::uint64_t seed = 1;
  std::optional<FeatureManifest> manifest;
  /// nullopt entries mean the exporter default (no window).
  std::vector<std::optional<double>> tws{std::nullopt, 300.0, 100.0, 10.0, 1.0};
};

struct SweepRow {
  std::optional<double> tw;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  EvalReport report;
};

std::string tw_label(const std::optional<double>& tw);

/// Re-extracts, re-trains and re-evaluates once per window length. The model
/// is fitted on the benign training capture only.
std::vector<SweepRow> tw_sweep(const std::vector<PacketRecord>& train_packets,
                               const std::vector<PacketRecord>& test_packets, const LabelIndex& labels,
                               const SweepOptions& opt);

struct LatencyReport {
  std::size_t packets = 0;
  double p50_us = 0.0;
  double p95_us = 0.0;
  double p99_us = 0.0;
  double max_us = 0.0;
  double throughput_pps = 0.0;  ///< packets over summed per-packet time
  double wall_seconds = 0.0;
  /// Flow models only: a record cannot exist before its window closes.
  std::optional<double> flow_floor_seconds;
  std::optional<double> flow_residual_p95_us;
  std::size_t flows = 0;
};

/// Per-packet decode + featurize + score latency, replaying as fast as
/// possible. For flow models the per-packet path is decode + meter update,
/// and per-flow featurize + score is reported as the residual.
LatencyReport delay_benchmark(const std::filesystem::path& pcap, const DetectorModel& model);
std::string format_latency(const LatencyReport& r);

}  // namespace botwatch
