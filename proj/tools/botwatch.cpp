#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "botwatch/csv.hpp"
#include "botwatch/error.hpp"
#include "botwatch/eval.hpp"
#include "botwatch/model.hpp"
#include "botwatch/normalizer.hpp"
#include "botwatch/pipeline.hpp"
#include "botwatch/search.hpp"
#include "botwatch/seed.hpp"
#include "botwatch/select.hpp"
#include "botwatch/synth.hpp"

namespace fs = std::filesystem;
using namespace botwatch;

namespace {

struct Options {
  // shared
  std::string mode = "uni_flow";
  std::optional<double> tw;
  double idle_timeout = 15.0;
  std::uint64_t seed = 1;
  std::string in, out, labels, manifest;
  // select
  double sigma = 1.0;
  std::string aggregate = "mean";
  std::optional<std::size_t> keep;
  std::string manifest_out;
  // train
  std::string detector = "if";
  double target_fpr = 0.02;
  std::size_t budget = 0;
  std::vector<std::string> params;
  std::string report;
  // score / evaluate / bench
  std::string model;
  std::string roc;
  // extract
  std::string flows_csv;
  // sweep
  std::string train;
  std::vector<std::string> tw_list;
  // synth
  std::string scenario = "mixed";
  std::string spec;
  double duration = 600.0;
  std::size_t devices = 10;
};

bool is_pcap(const std::string& path) {
  const auto ext = fs::path(path).extension().string();
  return ext == ".pcap" || ext == ".cap";
}

void require_file(const std::string& path, const std::string& flag) {
  if (path.empty()) fail(ErrorCode::ConfigInvalid, flag + " is required");
  if (!fs::exists(path)) fail(ErrorCode::IOError, "input '" + path + "' does not exist");
}

void require_out(const std::string& path, const std::string& flag) {
  if (path.empty()) fail(ErrorCode::ConfigInvalid, flag + " is required");
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    fail(ErrorCode::IOError, "output directory '" + parent.string() + "' does not exist");
  }
}

ExtractOptions extract_options(const Options& o) {
  ExtractOptions eo;
  eo.mode = parse_traffic_mode(o.mode);
  eo.tw_seconds = o.tw;
  eo.idle_timeout = o.idle_timeout;
  if (!o.manifest.empty()) {
    require_file(o.manifest, "--manifest");
    eo.manifest = read_manifest_file(o.manifest);
  }
  return eo;
}

ParamMap parse_params(const std::vector<std::string>& items) {
  ParamMap p;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) fail(ErrorCode::ConfigInvalid, "--param expects name=value, got '" + item + "'");
    p[item.substr(0, eq)] = csv::to_double(item.substr(eq + 1), "--param " + item.substr(0, eq));
  }
  return p;
}

int cmd_synth(const Options& o) {
  require_out(o.out, "--out");
  ScenarioSpec spec;
  if (!o.spec.empty()) {
    require_file(o.spec, "--spec");
    std::ifstream in(o.spec);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::InvalidSpec, std::string("scenario file is not valid JSON: ") + e.what());
    }
    spec = scenario_from_json(j);
  } else if (o.scenario == "benign") {
    spec = benign_scenario(o.duration, o.seed);
    spec.devices = o.devices;
  } else if (o.scenario == "mixed") {
    spec = mixed_scenario(o.duration, o.seed);
    spec.devices = o.devices;
  } else {
    fail(ErrorCode::ConfigInvalid, "--scenario must be benign or mixed");
  }
  const std::string labels = o.labels.empty() ? fs::path(o.out).replace_extension(".labels.csv").string() : o.labels;
  const Corpus c = generate(spec);
  write_corpus(c, o.out, labels);
  std::printf("packets=%zu conversations=%zu pcap=%s labels=%s\n", c.packets.size(), c.labels.size(),
              o.out.c_str(), labels.c_str());
  for (const auto& [label, n] : c.packet_counts) std::printf("  %s packets=%zu\n", std::string(to_string(label)).c_str(), n);
  return 0;
}

int cmd_extract(const Options& o) {
  require_file(o.in, "--in");
  require_out(o.out, "--out");
  const ExtractOptions eo = extract_options(o);
  std::optional<LabelIndex> index;
  if (!o.labels.empty()) {
    require_file(o.labels, "--labels");
    index.emplace(read_label_file(o.labels));
  }
  const Extraction ex = extract_capture(o.in, eo, index ? &*index : nullptr);
  write_feature_csv(o.out, ex.features);
  if (!o.flows_csv.empty()) write_flows_csv(o.flows_csv, ex.flows);
  const auto& s = ex.capture;
  std::printf(
      "rows=%zu columns=%zu manifest=%s frames=%llu decoded=%llu non_ip=%llu malformed=%llu "
      "clock_skew=%llu\n",
      ex.features.values.rows(), ex.features.values.cols(), ex.features.manifest.hash().c_str(),
      (unsigned long long)s.frames_read, (unsigned long long)s.decoded, (unsigned long long)s.skipped_non_ip,
      (unsigned long long)s.malformed, (unsigned long long)(s.dropped_clock_skew + ex.meter.dropped_clock_skew));
  if (index) std::printf("unlabeled_rows=%llu\n", (unsigned long long)ex.label_misses);
  return 0;
}

int cmd_select(const Options& o) {
  require_file(o.in, "--in");
  require_out(o.out, "--out");
  const FeatureMatrix raw = read_feature_csv_unlabeled(o.in);
  const NormalizationStats stats = fit_normalizer(raw);
  const FeatureMatrix norm = apply_normalizer(raw, stats);
  SelectionConfig cfg;
  cfg.sigma = o.sigma;
  cfg.aggregation = parse_aggregation(o.aggregate);
  cfg.keep = o.keep;
  cfg.seed = stage_seed(o.seed, "select");
  const RankedFeatureList ranking = select_features(norm, cfg);
  write_ranking_csv(o.out, ranking);
  const std::string manifest_out =
      o.manifest_out.empty() ? fs::path(o.out).replace_extension(".manifest").string() : o.manifest_out;
  const FeatureManifest reduced = norm.manifest.subset(ranking.selected);
  write_manifest_file(manifest_out, reduced);
  std::printf("input=%zu constant_dropped=%zu ranked=%zu selected=%zu manifest=%s path=%s\n", raw.manifest.size(),
              stats.dropped.size(), ranking.features.size(), reduced.size(), reduced.hash().c_str(),
              manifest_out.c_str());
  return 0;
}

int cmd_train(const Options& o) {
  require_file(o.in, "--in");
  require_out(o.out, "--out");
  // Training never sees labels: the label column is discarded unread.
  FeatureMatrix rows = read_feature_csv_unlabeled(o.in);
  if (!o.manifest.empty()) {
    require_file(o.manifest, "--manifest");
    rows = rows.project(read_manifest_file(o.manifest));
  }
  const DetectorKind kind = parse_detector_kind(o.detector);
  ParamMap params = parse_params(o.params);
  const std::uint64_t model_seed = stage_seed(o.seed, "train");
  if (!params.count("seed") && kind != DetectorKind::EllipticEnvelope) {
    params["seed"] = static_cast<double>(stage_seed(o.seed, "detector"));
  }

  if (o.budget > 0) {
    const NormalizationStats stats = fit_normalizer(rows);
    const FeatureMatrix norm = apply_normalizer(rows, stats);
    SearchSpace space = default_search_space(kind, norm.values.cols());
    for (const auto& [k, v] : params) {
      space.ranges.erase(k);
      space.fixed[k] = v;
    }
    SearchOptions so;
    so.budget = o.budget;
    so.target_fpr = o.target_fpr;
    so.seed = stage_seed(o.seed, "search");
    so.fold_seed = stage_seed(o.seed, "folds");
    const SearchResult sr = random_search(kind, space, norm.values, so);
    params = sr.best_candidate().params;
    if (!o.report.empty()) {
      std::ofstream rep(o.report, std::ios::trunc);
      if (!rep) fail(ErrorCode::IOError, "cannot create '" + o.report + "'");
      rep << "candidate,params,mean_fpr,fpr_variance,failure\n";
      for (std::size_t i = 0; i < sr.candidates.size(); ++i) {
        const auto& c = sr.candidates[i];
        std::string ps;
        for (const auto& [k, v] : c.params) ps += (ps.empty() ? "" : ";") + k + "=" + csv::format_double(v);
        rep << i << ',' << ps << ',' << csv::format_double(c.mean_fpr) << ','
            << csv::format_double(c.fpr_variance) << ',' << c.failure << '\n';
      }
    }
    std::printf("search budget=%zu best=%zu mean_fpr=%.6f\n", o.budget, sr.best, sr.best_candidate().mean_fpr);
  }

  const ExtractionSettings settings{rows.manifest.mode(), o.tw, o.idle_timeout};
  const DetectorModel model = train_model(rows, kind, params, o.target_fpr, settings, model_seed);
  save_model(o.out, model);
  std::printf("model=%s kind=%s rows=%zu features=%zu dropped=%zu threshold=%s manifest=%s\n", o.out.c_str(),
              to_string(kind).c_str(), rows.values.rows(), model.normalizer.retained.size(),
              model.normalizer.dropped.size(), csv::format_double(model.threshold).c_str(),
              model.manifest().hash().c_str());
  return 0;
}

struct ScoredInput {
  FeatureMatrix rows;
  std::vector<InstanceInfo> info;
};

ScoredInput load_rows(const Options& o, const DetectorModel& model, bool want_labels) {
  require_file(o.in, "--in");
  ScoredInput s;
  if (is_pcap(o.in)) {
    ExtractOptions eo{model.extraction.mode, model.extraction.tw_seconds, model.extraction.idle_timeout,
                      model.manifest()};
    std::optional<LabelIndex> index;
    if (want_labels) {
      require_file(o.labels, "--labels");
      index.emplace(read_label_file(o.labels));
    }
    Extraction ex = extract_capture(o.in, eo, index ? &*index : nullptr);
    s.rows = std::move(ex.features);
    s.info = std::move(ex.info);
  } else {
    s.rows = want_labels ? read_feature_csv(o.in) : read_feature_csv_unlabeled(o.in);
  }
  return s;
}

int cmd_score(const Options& o) {
  require_file(o.model, "--model");
  require_out(o.out, "--out");
  const DetectorModel model = load_model(o.model);
  const ScoredInput in = load_rows(o, model, false);
  const auto scores = model.score_matrix(in.rows);
  std::ofstream out(o.out, std::ios::trunc);
  if (!out) fail(ErrorCode::IOError, "cannot create '" + o.out + "'");
  out << "# botwatch manifest=" << model.manifest().hash() << " threshold=" << csv::format_double(model.threshold)
      << '\n';
  out << (in.info.empty() ? "row" : "src_ip,dst_ip,src_port,dst_port,protocol,ts") << ",score,flag\n";
  std::size_t flagged = 0;
  char ts[32];
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (in.info.empty()) {
      out << i;
    } else {
      const auto& k = in.info[i].key;
      std::snprintf(ts, sizeof ts, "%.6f", in.info[i].ts);
      out << k.src_ip.to_string() << ',' << k.dst_ip.to_string() << ',' << k.src_port << ',' << k.dst_port << ','
          << unsigned(k.protocol) << ',' << ts;
    }
    const bool f = scores[i] > model.threshold;
    flagged += f;
    out << ',' << csv::format_double(scores[i]) << ',' << (f ? 1 : 0) << '\n';
  }
  if (!out) fail(ErrorCode::IOError, "write failed on '" + o.out + "'");
  std::printf("rows=%zu flagged=%zu fraction=%.6f\n", scores.size(), flagged,
              scores.empty() ? 0.0 : double(flagged) / double(scores.size()));
  return 0;
}

int cmd_evaluate(const Options& o) {
  require_file(o.model, "--model");
  if (!o.out.empty()) require_out(o.out, "--out");
  const DetectorModel model = load_model(o.model);
  const ScoredInput in = load_rows(o, model, true);
  const EvalReport report = evaluate(model, in.rows);
  const std::vector<ReportRow> rows{{to_string(model.kind) + "-" + to_string(model.extraction.mode), report}};
  if (!o.out.empty()) write_report_csv(o.out, rows);
  if (!o.roc.empty()) write_roc_csv(o.roc, report.roc);
  std::printf("tp=%llu fp=%llu tn=%llu fn=%llu\n%s", (unsigned long long)report.confusion.tp,
              (unsigned long long)report.confusion.fp, (unsigned long long)report.confusion.tn,
              (unsigned long long)report.confusion.fn, format_report_table(rows).c_str());
  return 0;
}

int cmd_sweep(const Options& o) {
  require_file(o.train, "--train");
  require_file(o.in, "--in");
  require_file(o.labels, "--labels");
  if (!o.out.empty()) require_out(o.out, "--out");
  SweepOptions so;
  so.kind = parse_detector_kind(o.detector);
  so.params = parse_params(o.params);
  if (!so.params.count("seed") && so.kind != DetectorKind::EllipticEnvelope) {
    so.params["seed"] = static_cast<double>(stage_seed(o.seed, "detector"));
  }
  so.mode = parse_traffic_mode(o.mode);
  if (so.mode == TrafficMode::Packet) fail(ErrorCode::ConfigInvalid, "sweep needs a flow mode");
  so.idle_timeout = o.idle_timeout;
  so.target_fpr = o.target_fpr;
  so.seed = stage_seed(o.seed, "train");
  if (!o.manifest.empty()) {
    require_file(o.manifest, "--manifest");
    so.manifest = read_manifest_file(o.manifest);
  }
  if (!o.tw_list.empty()) {
    so.tws.clear();
    for (const auto& t : o.tw_list) {
      if (t == "default") {
        so.tws.push_back(std::nullopt);
      } else {
        so.tws.push_back(csv::to_double(t, "--tw-list"));
      }
    }
  }
  const auto train = read_capture(o.train);
  const auto test = read_capture(o.in);
  const LabelIndex index(read_label_file(o.labels));
  const auto sweep = tw_sweep(train, test, index, so);
  std::vector<ReportRow> rows;
  for (const auto& r : sweep) rows.push_back({"TW=" + tw_label(r.tw), r.report});
  if (!o.out.empty()) write_report_csv(o.out, rows);
  std::printf("%s", format_report_table(rows).c_str());
  return 0;
}

int cmd_bench(const Options& o) {
  require_file(o.model, "--model");
  require_file(o.in, "--in");
  const DetectorModel model = load_model(o.model);
  const LatencyReport r = delay_benchmark(o.in, model);
  std::printf("%s\n", format_latency(r).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IoT botwatch: flow metering, feature selection and one-class detection"};
  app.set_config("--config", "", "INI/TOML file whose keys mirror the flags");
  app.require_subcommand(1);
  Options o;

  auto mode_opt = [&](CLI::App* c) {
    c->add_option("--mode", o.mode, "uni_flow | bi_flow | packet");
    c->add_option("--tw", o.tw, "time window in seconds (omit for the exporter default)");
    c->add_option("--idle-timeout", o.idle_timeout, "flow idle timeout in seconds");
  };

  auto* synth = app.add_subcommand("synth", "generate a labeled PCAP corpus");
  synth->add_option("--scenario", o.scenario, "benign | mixed");
  synth->add_option("--spec", o.spec, "scenario JSON file (overrides --scenario)");
  synth->add_option("--duration", o.duration, "capture length in seconds");
  synth->add_option("--devices", o.devices, "number of IoT devices");
  synth->add_option("--seed", o.seed);
  synth->add_option("--out", o.out, "PCAP path");
  synth->add_option("--labels", o.labels, "label CSV path (default: <out> with extension .labels.csv)");

  auto* extract = app.add_subcommand("extract", "PCAP to feature CSV");
  mode_opt(extract);
  extract->add_option("--in", o.in, "PCAP file");
  extract->add_option("--labels", o.labels, "label CSV; adds a label column");
  extract->add_option("--manifest", o.manifest, "reduced manifest to compute");
  extract->add_option("--out", o.out, "feature CSV");
  extract->add_option("--flows-csv", o.flows_csv, "also dump flow records");

  auto* select = app.add_subcommand("select", "rank features and write a reduced manifest");
  select->add_option("--in", o.in, "benign feature CSV");
  select->add_option("--sigma", o.sigma, "RBF kernel width");
  select->add_option("--aggregate", o.aggregate, "mean | majority | borda");
  select->add_option("--keep", o.keep, "number of features to keep");
  select->add_option("--seed", o.seed);
  select->add_option("--out", o.out, "ranking CSV");
  select->add_option("--manifest-out", o.manifest_out, "reduced manifest (default: <out>.manifest)");

  auto* train = app.add_subcommand("train", "fit a one-class detector on benign rows");
  train->add_option("--in", o.in, "benign feature CSV");
  train->add_option("--manifest", o.manifest, "restrict to a reduced manifest");
  train->add_option("--detector", o.detector, "if | ee | lof | osvm | ae");
  train->add_option("--param", o.params, "hyperparameter name=value (repeatable)");
  train->add_option("--target-fpr", o.target_fpr, "benign exceedance rate for the threshold");
  train->add_option("--budget", o.budget, "random-search budget (0 = no search)");
  train->add_option("--seed", o.seed);
  train->add_option("--tw", o.tw, "window the rows were extracted with");
  train->add_option("--idle-timeout", o.idle_timeout, "idle timeout the rows were extracted with");
  train->add_option("--report", o.report, "search report CSV");
  train->add_option("--out", o.out, "model file");

  auto* score = app.add_subcommand("score", "score a feature CSV or PCAP");
  score->add_option("--model", o.model);
  score->add_option("--in", o.in, "feature CSV or PCAP");
  score->add_option("--out", o.out, "scores CSV");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "metrics on labeled rows");
  evaluate_cmd->add_option("--model", o.model);
  evaluate_cmd->add_option("--in", o.in, "labeled feature CSV or PCAP");
  evaluate_cmd->add_option("--labels", o.labels, "label CSV for PCAP input");
  evaluate_cmd->add_option("--out", o.out, "report CSV");
  evaluate_cmd->add_option("--roc", o.roc, "ROC points CSV");

  auto* sweep = app.add_subcommand("sweep", "time-window sweep");
  sweep->add_option("--train", o.train, "benign training PCAP");
  sweep->add_option("--in", o.in, "test PCAP");
  sweep->add_option("--labels", o.labels, "test label CSV");
  sweep->add_option("--mode", o.mode, "uni_flow | bi_flow");
  sweep->add_option("--idle-timeout", o.idle_timeout);
  sweep->add_option("--tw-list", o.tw_list, "windows, e.g. default 300 100 10 1");
  sweep->add_option("--detector", o.detector);
  sweep->add_option("--param", o.params);
  sweep->add_option("--manifest", o.manifest);
  sweep->add_option("--target-fpr", o.target_fpr);
  sweep->add_option("--seed", o.seed);
  sweep->add_option("--out", o.out, "report CSV");

  auto* bench = app.add_subcommand("bench", "detection-delay benchmark");
  bench->add_option("--model", o.model);
  bench->add_option("--in", o.in, "PCAP");

  std::string command;
  try {
    app.parse(argc, argv);
    command = app.get_subcommands().front()->get_name();
    if (command == "synth") return cmd_synth(o);
    if (command == "extract") return cmd_extract(o);
    if (command == "select") return cmd_select(o);
    if (command == "train") return cmd_train(o);
    if (command == "score") return cmd_score(o);
    if (command == "evaluate") return cmd_evaluate(o);
    if (command == "sweep") return cmd_sweep(o);
    if (command == "bench") return cmd_bench(o);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: code=ConfigInvalid command=%s message=\"%s\"\n",
                 command.empty() ? "-" : command.c_str(), e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: code=%s command=%s message=\"%s\"\n", std::string(to_string(e.code())).c_str(),
                 command.c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: code=Internal command=%s message=\"%s\"\n", command.c_str(), e.what());
    return 1;
  }
  return 0;
}
