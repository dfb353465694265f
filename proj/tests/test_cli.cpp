#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include <fmt/format.h>

#include "fedledger/cli.hpp"
#include "fedledger/errors.hpp"
#include "fedledger/report.hpp"

using namespace fedledger;
using namespace fedledger::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("fedledger-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return Errc::NoData;
}

json minimal() {
  return json{{"name", "mini"},
              {"rounds", 2},
              {"n_trainers", 3},
              {"chain", {{"block_interval", 5}}},
              {"task", {{"samples_per_trainer", 50}, {"validation_samples", 60}}}};
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Scenario, ParsesDefaultsAndSweeps) {
  auto doc = minimal();
  doc["n_trainers"] = {3, 4};
  doc["network"] = {{"rtt", {0.05, 0.2}}};
  const auto f = parse_scenario(doc);
  const auto cfgs = expand(f);
  ASSERT_EQ(cfgs.size(), 4u);
  EXPECT_EQ(cfgs[0].id, "mini-n3-c-b5-rtt50");
  EXPECT_EQ(cfgs[3].id, "mini-n4-c-b5-rtt200");
  EXPECT_EQ(cfgs[0].chain.txs_per_block, 138u);
  EXPECT_EQ(cfgs[1].net.rtt, 0.2);
}

TEST(Scenario, RejectsBadDocuments) {
  auto doc = minimal();
  doc["colour"] = "blue";
  EXPECT_EQ(code_of([&] { parse_scenario(doc); }), Errc::ConfigError);
  doc = minimal();
  doc["chain"]["preset"] = "ethereum-l1";
  EXPECT_EQ(code_of([&] { parse_scenario(doc); }), Errc::ConfigError);
  doc = minimal();
  doc["rounds"] = -1;
  EXPECT_EQ(code_of([&] { parse_scenario(doc); }), Errc::ConfigError);
  doc = minimal();
  doc["mode"] = "d.x";
  EXPECT_EQ(code_of([&] { parse_scenario(doc); }), Errc::ConfigError);
  doc = minimal();
  doc["n_trainers"] = json::array();
  EXPECT_EQ(code_of([&] { parse_scenario(doc); }), Errc::ConfigError);
  doc = minimal();
  doc["network"] = {{"bandwidth", 0}};
  EXPECT_EQ(code_of([&] { parse_scenario(doc); }), Errc::ConfigError);
}

TEST(Scenario, Presets) {
  const auto fig4 = expand(preset("fig4"));
  ASSERT_EQ(fig4.size(), 64u);
  for (const auto& c : fig4) {
    EXPECT_EQ(c.net.bandwidth, 100e6);
    EXPECT_EQ(c.rounds, 5u);
  }
  EXPECT_EQ(fig4.front().id, "fig4-n10-c-b5-rtt50");
  const auto lan = expand(preset("table2-lan"));
  ASSERT_EQ(lan.size(), 1u);
  EXPECT_EQ(lan[0].chain.block_interval, 5.0);
  EXPECT_EQ(lan[0].net.rtt, 0.001);
  EXPECT_EQ(code_of([] { preset("fig5"); }), Errc::UnknownPreset);
}

TEST(Cli, RunWritesOutputs) {
  const auto dir = scratch("run");
  std::ofstream(dir / "cfg.json") << minimal().dump();
  RunOptions o;
  o.out = dir / "out";
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run(dir / "cfg.json", o, out, err), kExitOk) << err.str();
  const auto csv = slurp(o.out / "scenarios" / "mini-n3-c-b5-rtt50.csv");
  EXPECT_EQ(lines(csv), 3u);
  std::string header;
  for (std::size_t i = 0; i < report::kRoundColumns.size(); ++i)
    header += (i ? "," : "") + std::string(report::kRoundColumns[i]);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), header);
  EXPECT_EQ(header,
            "scenario,mode,k,n,block_interval,rtt,round,local_training,aggregation_evaluation,cryptography,"
            "transaction_execution,data_transmission,non_training,total,gas,tx_count,accuracy,loss,aborted");
  EXPECT_TRUE(fs::exists(o.out / "scenarios" / "mini-n3-c-b5-rtt50.json"));
  EXPECT_TRUE(fs::exists(o.out / "scenarios" / "mini-n3-c-b5-rtt50.events.jsonl"));
  EXPECT_TRUE(fs::exists(o.out / "scenarios" / "mini-n3-c-b5-rtt50.transfers.csv"));
  EXPECT_EQ(lines(slurp(o.out / "summary.csv")), 2u);
  const auto j = json::parse(slurp(o.out / "scenarios" / "mini-n3-c-b5-rtt50.json"));
  EXPECT_EQ(j["rounds"].size(), 2u);
}

TEST(Cli, SweepRunsEveryPointAndWorkersDoNotChangeBytes) {
  const auto dir = scratch("sweep");
  auto doc = minimal();
  doc["n_trainers"] = {3, 4};
  doc["mode"] = {"owner", "d.3"};
  std::ofstream(dir / "cfg.json") << doc.dump();
  RunOptions a, b;
  a.out = dir / "a";
  b.out = dir / "b";
  b.workers = 3;
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run(dir / "cfg.json", a, out, err), kExitOk);
  ASSERT_EQ(cmd_run(dir / "cfg.json", b, out, err), kExitOk);
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(a.out / "scenarios")) {
    if (e.path().extension() != ".csv" || e.path().string().find(".transfers.") != std::string::npos) continue;
    ++n;
    EXPECT_EQ(slurp(e.path()), slurp(b.out / "scenarios" / e.path().filename()));
  }
  EXPECT_EQ(n, 4u);
  EXPECT_EQ(slurp(a.out / "summary.csv"), slurp(b.out / "summary.csv"));
}

TEST(Cli, SeedOverride) {
  const auto dir = scratch("seed");
  std::ofstream(dir / "cfg.json") << minimal().dump();
  RunOptions a, b;
  a.out = dir / "a";
  b.out = dir / "b";
  b.seed = 99;
  std::ostringstream out, err;
  cmd_run(dir / "cfg.json", a, out, err);
  cmd_run(dir / "cfg.json", b, out, err);
  const auto f = fs::path("scenarios") / "mini-n3-c-b5-rtt50.csv";
  EXPECT_NE(slurp(a.out / f), slurp(b.out / f));
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("codes");
  std::ofstream(dir / "bad.json") << "{\"name\": \"x\", \"rounds\": \"many\"}";
  std::ofstream(dir / "broken.json") << "{ not json";
  RunOptions o;
  o.out = dir / "out";
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run(dir / "bad.json", o, out, err), kExitConfig);
  EXPECT_NE(err.str().find("rounds"), std::string::npos);
  EXPECT_EQ(cmd_run(dir / "broken.json", o, out, err), kExitConfig);
  EXPECT_EQ(cmd_run(dir / "missing.json", o, out, err), kExitConfig);
  EXPECT_EQ(cmd_preset("nope", o, out, err), kExitConfig);
  EXPECT_EQ(cmd_report(dir / "empty", out, err), kExitRuntime);
}

TEST(Cli, ReportGroupsAndIsIdempotent) {
  const auto dir = scratch("report");
  auto doc = minimal();
  doc["mode"] = {"d.3", "owner"};
  doc["network"] = {{"rtt", {0.2, 0.05}}};
  std::ofstream(dir / "cfg.json") << doc.dump();
  RunOptions o;
  o.out = dir / "out";
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run(dir / "cfg.json", o, out, err), kExitOk);
  const auto rows = report::aggregate(o.out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].rtt, 0.05);
  EXPECT_EQ(rows[0].mode, "c.");
  EXPECT_EQ(rows[1].mode, "d.3");
  EXPECT_EQ(rows[2].rtt, 0.2);
  EXPECT_EQ(rows[0].rounds, 2u);
  std::ostringstream r1, r2;
  ASSERT_EQ(cmd_report(o.out, r1, err), kExitOk);
  const auto plot1 = slurp(o.out / "plot_data.csv");
  ASSERT_EQ(cmd_report(o.out, r2, err), kExitOk);
  EXPECT_EQ(r1.str(), r2.str());
  EXPECT_EQ(plot1, slurp(o.out / "plot_data.csv"));
  EXPECT_EQ(lines(plot1), 5u);
}

TEST(Cli, BinaryEndToEnd) {
  const char* bin = std::getenv("FEDLEDGER_CLI");
  if (!bin) GTEST_SKIP() << "binary path not provided";
  const auto dir = scratch("bin");
  std::ofstream(dir / "cfg.json") << minimal().dump();
  const auto run = fmt::format("\"{}\" run \"{}\" --out \"{}\" > /dev/null", bin, (dir / "cfg.json").string(),
                               (dir / "out").string());
  EXPECT_EQ(WEXITSTATUS(std::system(run.c_str())), 0);
  EXPECT_EQ(WEXITSTATUS(std::system(fmt::format("\"{}\" preset nope 2> /dev/null", bin).c_str())), 2);
  EXPECT_EQ(WEXITSTATUS(std::system(
                fmt::format("\"{}\" report \"{}\" 2> /dev/null", bin, (dir / "nothing").string()).c_str())),
            3);
  const auto env = fmt::format("FEDLEDGER_OUT=\"{}\" \"{}\" run \"{}\" > /dev/null", (dir / "env").string(), bin,
                               (dir / "cfg.json").string());
  EXPECT_EQ(WEXITSTATUS(std::system(env.c_str())), 0);
  EXPECT_TRUE(fs::exists(dir / "env" / "summary.csv"));
}
