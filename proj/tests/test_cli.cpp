#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/wait.h>

#include "botwatch/features.hpp"
#include "botwatch/model.hpp"
#include "botwatch/pcap.hpp"
#include "fixtures.hpp"

using namespace botwatch;

namespace {

struct Run {
  int status;
  std::string output;
};

Run run(const std::string& args) {
  const auto log = fixtures::temp_path("cli_output.txt");
  const std::string cmd = std::string(BOTWATCH_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, ss.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("extract on a two-flow golden capture") {
  auto file = fixtures::global_header();
  fixtures::record(file, 1, 0, fixtures::tcp_frame(0x02));
  fixtures::record(file, 1, 500, fixtures::udp_frame());
  fixtures::record(file, 1, 900, fixtures::tcp_frame(0x10));
  const auto pcap = fixtures::temp_path("two_flows.pcap");
  fixtures::write_file(pcap, file);
  const auto out = fixtures::temp_path("two_flows.csv");
  const auto r = run("extract --mode uni_flow --in " + q(pcap) + " --out " + q(out));
  REQUIRE_MESSAGE(r.status == 0, r.output);
  const auto lines = lines_of(out);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0].rfind("# botwatch manifest=" + catalog(TrafficMode::UniFlow).hash(), 0) == 0);
  CHECK(lines[1].rfind("pkt_count,", 0) == 0);
  const auto fm = read_feature_csv(out);
  CHECK(fm.values.rows() == 2);
  CHECK(fm.manifest == catalog(TrafficMode::UniFlow));
}

TEST_CASE("select keeps 51 of 79") {
  std::mt19937_64 rng(1);
  FeatureMatrix fm;
  fm.manifest = catalog(TrafficMode::UniFlow);
  REQUIRE(fm.manifest.size() == 79);
  fm.values = fixtures::gaussian(150, 79, rng, 2.0, 5.0);
  const auto in = fixtures::temp_path("select_in.csv");
  write_feature_csv(in, fm);
  const auto out = fixtures::temp_path("ranking.csv");
  const auto man = fixtures::temp_path("reduced.manifest");
  const auto r = run("select --in " + q(in) + " --keep 51 --aggregate mean --out " + q(out) + " --manifest-out " + q(man));
  REQUIRE_MESSAGE(r.status == 0, r.output);
  CHECK(read_manifest_file(man).size() == 51);
  CHECK(lines_of(out).size() >= 80);
}

TEST_CASE("train then score the training rows") {
  std::mt19937_64 rng(2);
  FeatureMatrix fm;
  fm.manifest = catalog(TrafficMode::Packet);
  fm.values = fixtures::gaussian(500, fm.manifest.size(), rng, 1.0, 3.0);
  // a label column the trainer must never look at
  fm.labels.assign(500, Label::Normal);
  const auto in = fixtures::temp_path("train_in.csv");
  write_feature_csv(in, fm);
  {
    auto text = slurp(in);
    for (std::size_t at; (at = text.find(",Normal\n")) != std::string::npos;) text.replace(at, 8, ",Bogus\n");
    std::ofstream(in, std::ios::trunc) << text;
  }
  const auto model = fixtures::temp_path("cli_model.json");
  auto r = run("train --in " + q(in) + " --detector ee --target-fpr 0.02 --seed 3 --out " + q(model));
  REQUIRE_MESSAGE(r.status == 0, r.output);
  const auto scores = fixtures::temp_path("cli_scores.csv");
  r = run("score --model " + q(model) + " --in " + q(in) + " --out " + q(scores));
  REQUIRE_MESSAGE(r.status == 0, r.output);
  const auto lines = lines_of(scores);
  REQUIRE(lines.size() == 502);
  CHECK(lines[0].rfind("# botwatch manifest=", 0) == 0);
  std::size_t flagged = 0;
  for (std::size_t i = 2; i < lines.size(); ++i) flagged += lines[i].back() == '1';
  CHECK(static_cast<double>(flagged) / 500.0 <= 0.02 + 1.0 / 500.0);

  const auto again = fixtures::temp_path("cli_model_again.json");
  r = run("train --in " + q(in) + " --detector ee --target-fpr 0.02 --seed 3 --out " + q(again));
  REQUIRE(r.status == 0);
  CHECK(slurp(again) == slurp(model));
}

TEST_CASE("config file mirrors flags") {
  const auto cfg = fixtures::temp_path("synth.ini");
  const auto pcap = fixtures::temp_path("cfg.pcap");
  std::ofstream(cfg) << "[synth]\nscenario=benign\nduration=20\nseed=4\nout=" << pcap.string() << "\n";
  const auto r = run("--config " + q(cfg) + " synth");
  REQUIRE_MESSAGE(r.status == 0, r.output);
  CHECK_FALSE(read_capture(pcap).empty());
  CHECK(std::filesystem::exists(fixtures::temp_path("cfg.labels.csv")));
}

TEST_CASE("errors produce a machine-readable line and nonzero exit") {
  auto r = run("extract --in /nonexistent/capture.pcap --out /tmp/x.csv");
  CHECK(r.status == 1);
  CHECK(r.output.find("error: code=IOError command=extract message=") != std::string::npos);
  r = run("train --no-such-flag");
  CHECK(r.status == 2);
  CHECK(r.output.find("error: code=ConfigInvalid") != std::string::npos);
  r = run("");
  CHECK(r.status == 2);
  auto junk = fixtures::temp_path("junk.pcap");
  std::ofstream(junk) << "definitely not a capture";
  r = run("extract --in " + q(junk) + " --out " + q(fixtures::temp_path("junk.csv")));
  CHECK(r.status == 1);
  CHECK(r.output.find("code=BadMagic") != std::string::npos);
}

}  // TEST_SUITE
