#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fedledger/orchestrator.hpp"
#include "fedledger/scenario.hpp"

namespace fedledger::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// Default output directory when --out is absent.
inline constexpr const char* kOutEnv = "FEDLEDGER_OUT";

struct RunOptions {
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;
};

struct SweepResult {
  std::vector<sim::ExperimentReport> reports;  // in expansion order
  std::vector<std::string> failures;           // "<id>: <message>"
};

/// Runs every scenario of the sweep on up to opts.workers threads.
SweepResult run_sweep(const ScenarioFile& file, const RunOptions& opts);

/// Writes scenarios/<id>.{csv,json,events.jsonl,transfers.csv}, summary.csv
/// and, when requested by the file, phase_table.csv.
void write_outputs(const ScenarioFile& file, const SweepResult& result, const std::filesystem::path& out);

int cmd_run(const std::filesystem::path& config, const RunOptions& opts, std::ostream& out, std::ostream& err);
int cmd_preset(const std::string& name, const RunOptions& opts, std::ostream& out, std::ostream& err);
int cmd_report(const std::filesystem::path& dir, std::ostream& out, std::ostream& err);

/// Argument parsing and dispatch; returns the process exit code.
int main(int argc, char** argv);

}  // namespace fedledger::cli
