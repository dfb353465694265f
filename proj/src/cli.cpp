#include "fedledger/cli.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fedledger/errors.hpp"
#include "fedledger/report.hpp"

namespace fedledger::cli {

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) fail(Errc::Unavailable, "cannot write " + p.string());
  f << body;
  if (!f) fail(Errc::Unavailable, "write failed for " + p.string());
}

std::string transfers_csv(const std::vector<net::TransferReceipt>& trace) {
  std::string out = "route,from,to,bytes,start,end,attempts\n";
  for (const auto& r : trace)
    out += fmt::format("{},{},{},{},{:.9f},{:.9f},{}\n", net::to_string(r.route), r.from.value, r.to.value, r.bytes,
                       r.start, r.end, r.attempts);
  return out;
}

int execute(ScenarioFile file, const RunOptions& opts, std::ostream& out, std::ostream& err) {
  if (opts.seed) file.base.seed = *opts.seed;
  const auto result = run_sweep(file, opts);
  write_outputs(file, result, opts.out);

  std::vector<report::GroupRow> groups;
  try {
    groups = report::aggregate(opts.out);
  } catch (const Error&) {
  }
  if (!groups.empty()) out << report::render_groups(groups);
  if (file.phase_table)
    for (const auto& r : result.reports) {
      out << "\n" << r.config.id << "\n";
      out << report::phase_table_text(sim::phase_breakdown(report::mean_phases(r)));
    }
  for (const auto& f : result.failures) err << "error: " << f << "\n";
  out << fmt::format("{} of {} scenarios completed; outputs in {}\n", result.reports.size(),
                     result.reports.size() + result.failures.size(), opts.out.string());
  return result.failures.empty() ? kExitOk : kExitRuntime;
}

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == Errc::ConfigError || e.code() == Errc::UnknownPreset ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

fs::path default_out() {
  if (const char* env = std::getenv(kOutEnv); env && *env) return env;
  return "fedledger-out";
}

}  // namespace

SweepResult run_sweep(const ScenarioFile& file, const RunOptions& opts) {
  const auto configs = expand(file);
  std::vector<std::optional<sim::ExperimentReport>> slots(configs.size());
  std::vector<std::string> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        slots[i] = sim::run_scenario(configs[i]);
      } catch (const std::exception& e) {
        errors[i] = configs[i].id + ": " + e.what();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(opts.workers, static_cast<unsigned>(configs.size())));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < n; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  SweepResult res;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (slots[i])
      res.reports.push_back(std::move(*slots[i]));
    else
      res.failures.push_back(errors[i]);
  }
  return res;
}

void write_outputs(const ScenarioFile& file, const SweepResult& result, const fs::path& out) {
  const fs::path sdir = out / "scenarios";
  fs::create_directories(sdir);
  for (const auto& r : result.reports) {
    const auto& id = r.config.id;
    write_file(sdir / (id + ".csv"), report::rounds_csv(r));
    write_file(sdir / (id + ".json"), report::to_json(r).dump(2) + "\n");
    write_file(sdir / (id + ".events.jsonl"), r.events_jsonl);
    write_file(sdir / (id + ".transfers.csv"), transfers_csv(r.transfers));
  }
  write_file(out / "summary.csv", report::summary_csv(result.reports));
  if (file.phase_table && !result.reports.empty())
    write_file(out / "phase_table.csv",
               report::phase_table_csv(sim::phase_breakdown(report::mean_phases(result.reports.front()))));
}

int cmd_run(const fs::path& config, const RunOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] { return execute(load_scenario(config), opts, out, err); });
}

int cmd_preset(const std::string& name, const RunOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] { return execute(preset(name), opts, out, err); });
}

int cmd_report(const fs::path& dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto rows = report::aggregate(dir);
    out << report::render_groups(rows);
    write_file(dir / "plot_data.csv", report::groups_csv(rows));
    return kExitOk;
  });
}

int main(int argc, char** argv) {
  CLI::App app{"fedledger: incentive-aware federated learning on a simulated ledger"};
  app.require_subcommand(1);

  RunOptions opts;
  opts.out = default_out();
  opts.workers = std::max(1u, std::thread::hardware_concurrency());
  std::string out_dir = opts.out.string();
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "run every scenario of a config file");
  std::string config;
  run->add_option("config", config, "scenario file (JSON)")->required();
  run->add_option("--out", out_dir, fmt::format("output directory (default ${} or fedledger-out)", kOutEnv));
  auto* seed_opt = run->add_option("--seed", seed, "override the configured seed");
  run->add_option("--workers", opts.workers, "parallel scenarios")->check(CLI::PositiveNumber);

  auto* pre = app.add_subcommand("preset", "run a built-in experiment grid");
  std::string name;
  pre->add_option("name", name, "fig4 | table2-lan")->required();
  pre->add_option("--out", out_dir, "output directory");
  auto* pre_seed = pre->add_option("--seed", seed, "override the preset seed");
  pre->add_option("--workers", opts.workers, "parallel scenarios")->check(CLI::PositiveNumber);

  auto* rep = app.add_subcommand("report", "summarise the scenario CSVs of an output directory");
  std::string dir;
  rep->add_option("dir", dir, "output directory of a previous run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  opts.out = out_dir;
  if (run->parsed()) {
    if (seed_opt->count()) opts.seed = seed;
    return cmd_run(config, opts, std::cout, std::cerr);
  }
  if (pre->parsed()) {
    if (pre_seed->count()) opts.seed = seed;
    return cmd_preset(name, opts, std::cout, std::cerr);
  }
  return cmd_report(dir, std::cout, std::cerr);
}

}  // namespace fedledger::cli
