#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fedledger/orchestrator.hpp"

namespace fedledger::report {

/// Column set of the per-round CSV, in order. Times are seconds.
inline constexpr std::array<std::string_view, 19> kRoundColumns = {
    "scenario",         "mode",
    "k",                "n",
    "block_interval",   "rtt",
    "round",            "local_training",
    "aggregation_evaluation", "cryptography",
    "transaction_execution",  "data_transmission",
    "non_training",     "total",
    "gas",              "tx_count",
    "accuracy",         "loss",
    "aborted"};

std::string rounds_csv(const sim::ExperimentReport& r);
nlohmann::ordered_json to_json(const sim::ExperimentReport& r);

/// Mean phase times over the completed rounds.
sim::PhaseTimes mean_phases(const sim::ExperimentReport& r);

std::string phase_table_text(std::span<const sim::PhaseRow> rows);
std::string phase_table_csv(std::span<const sim::PhaseRow> rows);

/// One line per scenario: configuration plus summary statistics.
std::string summary_csv(std::span<const sim::ExperimentReport> reports);

/// Mean and sample std of non-training overhead for one configuration.
struct GroupRow {
  double block_interval = 0;
  double rtt = 0;
  std::uint32_t n = 0;
  std::string mode;  // "c." or "d.<k>"
  std::uint32_t k = 0;
  std::uint32_t rounds = 0;
  double mean = 0;
  double std = 0;
};

/// Reads <dir>/scenarios/*.csv and groups rows by (block_interval, rtt),
/// then n, then mode (owner first, committees by size). Aborted rounds are
/// skipped. Throws NoData when nothing usable is found.
std::vector<GroupRow> aggregate(const std::filesystem::path& dir);

std::string render_groups(std::span<const GroupRow> rows);
std::string groups_csv(std::span<const GroupRow> rows);

}  // namespace fedledger::report
