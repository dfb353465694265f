#include "fedledger/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "fedledger/errors.hpp"

namespace fedledger::report {

namespace {

std::string header() {
  std::string out;
  for (std::size_t i = 0; i < kRoundColumns.size(); ++i) {
    if (i) out += ',';
    out += kRoundColumns[i];
  }
  return out + '\n';
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, const std::filesystem::path& file) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(Errc::NoData, fmt::format("{}: bad number '{}'", file.string(), s));
  }
}

}  // namespace

std::string rounds_csv(const sim::ExperimentReport& r) {
  const auto& c = r.config;
  std::string out = header();
  for (const auto& rr : r.rounds) {
    const auto& p = rr.phases;
    using sim::Phase;
    out += fmt::format("{},{},{},{},{:g},{:g},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{},{},{:.6f},{:.6f},{}\n",
                       c.id, c.mode.label(), c.mode.k, c.n_trainers, c.chain.block_interval, c.net.rtt, rr.round,
                       p[Phase::LocalTraining], p[Phase::AggregationEvaluation], p[Phase::Cryptography],
                       p[Phase::TransactionExecution], p[Phase::DataTransmission], p.non_training(), p.total(),
                       rr.gas_total, rr.tx_count, rr.accuracy, rr.loss, rr.aborted ? 1 : 0);
  }
  return out;
}

nlohmann::ordered_json to_json(const sim::ExperimentReport& r) {
  using nlohmann::ordered_json;
  const auto& c = r.config;
  ordered_json cfg = {
      {"id", c.id},
      {"mode", c.mode.label()},
      {"k", c.mode.k},
      {"n_trainers", c.n_trainers},
      {"rounds", c.rounds},
      {"seed", c.seed},
      {"block_interval", c.chain.block_interval},
      {"txs_per_block", c.chain.txs_per_block},
      {"rtt", c.net.rtt},
      {"bandwidth", c.net.bandwidth},
      {"fallback_throughput", c.net.fallback_throughput},
      {"aggregator", c.aggregator},
      {"evaluator", std::string(valuation::to_string(c.evaluator))},
      {"payload_inflation", c.payload_inflation},
      {"timing", c.timing == sim::Timing::Modeled ? "modeled" : "wallclock"},
  };
  ordered_json rounds = ordered_json::array();
  for (const auto& rr : r.rounds) {
    ordered_json phases = ordered_json::object();
    for (auto p : sim::kAllPhases) phases[std::string(sim::to_string(p))] = rr.phases[p];
    ordered_json providers = ordered_json::array();
    for (auto a : rr.providers) providers.push_back(a.value);
    ordered_json scores = ordered_json::array();
    for (const auto& s : rr.scores) scores.push_back({{"trainer", s.trainer.value}, {"score", s.score}});
    ordered_json alloc = nullptr;
    if (rr.allocation) {
      ordered_json pay = ordered_json::object();
      for (const auto& [id, v] : rr.allocation->payouts) pay[std::to_string(id.value)] = v;
      alloc = {{"payouts", pay}, {"refund", rr.allocation->refund}};
    }
    rounds.push_back({{"round", rr.round},
                      {"start", rr.start},
                      {"end", rr.end},
                      {"phases", phases},
                      {"non_training", rr.non_training_time()},
                      {"gas", rr.gas_total},
                      {"tx_count", rr.tx_count},
                      {"accuracy", rr.accuracy},
                      {"loss", rr.loss},
                      {"aborted", rr.aborted},
                      {"providers", providers},
                      {"scores", scores},
                      {"allocation", alloc}});
  }
  const auto& s = r.summary;
  ordered_json summary = {{"mean_non_training", s.mean_non_training}, {"std_non_training", s.std_non_training},
                          {"mean_gas", s.mean_gas},                   {"std_gas", s.std_gas},
                          {"final_accuracy", s.final_accuracy},       {"final_loss", s.final_loss},
                          {"aborted", s.aborted}};
  return {{"config", cfg}, {"rounds", rounds}, {"summary", summary}, {"contract", r.contract_state}};
}

sim::PhaseTimes mean_phases(const sim::ExperimentReport& r) {
  sim::PhaseTimes acc;
  std::size_t n = 0;
  for (const auto& rr : r.rounds) {
    if (rr.aborted) continue;
    acc += rr.phases;
    ++n;
  }
  if (n)
    for (auto& v : acc.seconds) v /= static_cast<double>(n);
  return acc;
}

std::string phase_table_text(std::span<const sim::PhaseRow> rows) {
  std::string out = fmt::format("{:<26}{:>12}{:>10}\n", "Phase", "Time (s)", "Pct (%)");
  double total = 0;
  double pct = 0;
  for (const auto& r : rows) {
    out += fmt::format("{:<26}{:>12.2f}{:>10.1f}\n", sim::to_string(r.phase), r.seconds, r.percent);
    total += r.seconds;
    pct += r.percent;
  }
  out += fmt::format("{:<26}{:>12.2f}{:>10.1f}\n", "Total", total, pct);
  return out;
}

std::string phase_table_csv(std::span<const sim::PhaseRow> rows) {
  std::string out = "phase,seconds,percent\n";
  for (const auto& r : rows) out += fmt::format("{},{:.6f},{:.4f}\n", sim::to_string(r.phase), r.seconds, r.percent);
  return out;
}

std::string summary_csv(std::span<const sim::ExperimentReport> reports) {
  std::string out =
      "scenario,mode,k,n,block_interval,rtt,rounds,aborted,mean_non_training,std_non_training,mean_gas,std_gas,"
      "final_accuracy,final_loss\n";
  for (const auto& r : reports) {
    const auto& c = r.config;
    const auto& s = r.summary;
    out += fmt::format("{},{},{},{},{:g},{:g},{},{},{:.6f},{:.6f},{:.1f},{:.1f},{:.6f},{:.6f}\n", c.id, c.mode.label(),
                       c.mode.k, c.n_trainers, c.chain.block_interval, c.net.rtt, r.rounds.size(), s.aborted,
                       s.mean_non_training, s.std_non_training, s.mean_gas, s.std_gas, s.final_accuracy, s.final_loss);
  }
  return out;
}

std::vector<GroupRow> aggregate(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path sdir = dir / "scenarios";
  if (!fs::is_directory(sdir)) fail(Errc::NoData, "no scenarios directory under " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(sdir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && e.path().extension() == ".csv" && name.find(".transfers.") == std::string::npos)
      files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());

  // (interval, rtt, n, owner?0:1, k) -> samples
  using Key = std::tuple<double, double, std::uint32_t, int, std::uint32_t>;
  std::map<Key, std::pair<std::string, std::vector<double>>> groups;
  const std::string want = header();
  for (const auto& f : files) {
    std::ifstream in(f);
    std::string line;
    if (!std::getline(in, line) || line + '\n' != want) continue;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto cells = split(line);
      if (cells.size() != kRoundColumns.size()) fail(Errc::NoData, f.string() + ": malformed row");
      if (cells[18] == "1") continue;
      const auto& mode = cells[1];
      const auto k = static_cast<std::uint32_t>(to_double(cells[2], f));
      Key key{to_double(cells[4], f), to_double(cells[5], f), static_cast<std::uint32_t>(to_double(cells[3], f)),
              mode == "c." ? 0 : 1, k};
      auto& g = groups[key];
      g.first = mode;
      g.second.push_back(to_double(cells[12], f));
    }
  }
  if (groups.empty()) fail(Errc::NoData, "no round rows found under " + sdir.string());

  std::vector<GroupRow> rows;
  for (const auto& [key, g] : groups) {
    const auto& xs = g.second;
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0;
    for (double x : xs) var += (x - mean) * (x - mean);
    const double sd = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0;
    rows.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), g.first, std::get<4>(key),
                    static_cast<std::uint32_t>(xs.size()), mean, sd});
  }
  return rows;
}

std::string render_groups(std::span<const GroupRow> rows) {
  std::string out;
  bool first = true;
  double bi = -1;
  double rtt = -1;
  for (const auto& r : rows) {
    if (r.block_interval != bi || r.rtt != rtt) {
      bi = r.block_interval;
      rtt = r.rtt;
      if (!first) out += '\n';
      first = false;
      out += fmt::format("block interval {:g} s, rtt {:g} ms\n", bi, rtt * 1000.0);
      out += fmt::format("  {:>6}  {:<6}{:>8}{:>14}{:>12}\n", "n", "mode", "rounds", "mean (s)", "std (s)");
    }
    out += fmt::format("  {:>6}  {:<6}{:>8}{:>14.3f}{:>12.3f}\n", r.n, r.mode, r.rounds, r.mean, r.std);
  }
  return out;
}

std::string groups_csv(std::span<const GroupRow> rows) {
  std::string out = "block_interval,rtt,n,mode,k,rounds,mean_non_training,std_non_training\n";
  for (const auto& r : rows)
    out += fmt::format("{:g},{:g},{},{},{},{},{:.6f},{:.6f}\n", r.block_interval, r.rtt, r.n, r.mode, r.k, r.rounds,
                       r.mean, r.std);
  return out;
}

}  // namespace fedledger::report
