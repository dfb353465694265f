#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedledger/orchestrator.hpp"

namespace fedledger::cli {

/// A scenario document: one base configuration plus sweep axes. The run set
/// is the cross product n_trainers x mode x block_interval x rtt.
///
/// Schema (JSON object; unknown keys are rejected). Keys marked * accept a
/// single value or a list (a sweep axis):
///   name            string                        default "scenario"
///   seed            integer                       default 1
///   rounds          integer >= 1                  default 5
///   n_trainers*     integer >= 1                  default 5
///   mode*           "owner" | "d.<k>" | "committee:<k>"
///   chain           { preset | block_interval* , tps | txs_per_block,
///                     gas_limit, base_tx_gas, per_byte_gas }
///   network         { rtt*, bandwidth, fallback_throughput | fallback_profile,
///                     direct_failure_prob, fallback_failure_prob,
///                     fallback_jitter, fallback_attempts, policy }
///   training        { lr, local_iters, batch_size, aggregator }
///   task            { samples_per_trainer, n_features, n_classes,
///                     validation_samples, separation, partition, skew }
///   evaluator       "loo" | "shapley"
///   metric          "neg_loss" | "accuracy"
///   payload_inflation  bytes
///   timing          "modeled" | "wallclock"
///   cost            { train_per_sample, crypto_per_byte, ecdh_op,
///                     aggregate_per_param, evaluate_per_sample_param }
///   rotate_keys, round_budget, fee, deadline_blocks
///   faults          { corrupt_aggregators: [positions] }
struct ScenarioFile {
  std::string name = "scenario";
  sim::ScenarioConfig base;
  std::vector<std::uint32_t> n_trainers;
  std::vector<sim::Mode> modes;
  std::vector<Seconds> block_intervals;
  std::vector<Seconds> rtts;
  // Chain capacity rule applied per block interval.
  std::optional<std::string> chain_preset;
  std::optional<double> tps;
  std::optional<std::uint32_t> txs_per_block;
  bool phase_table = false;  // emit the phase breakdown table
};

/// Throws ConfigError with the offending key in the message.
ScenarioFile parse_scenario(const nlohmann::json& doc);
ScenarioFile load_scenario(const std::filesystem::path& path);

/// Cross product of the sweep axes, in axis order (n, mode, interval, rtt).
std::vector<sim::ScenarioConfig> expand(const ScenarioFile& file);

/// "fig4" or "table2-lan"; throws UnknownPreset.
ScenarioFile preset(std::string_view name);

/// Stable file-name-safe scenario id, e.g. "fig4-n10-d5-b12-rtt50".
std::string scenario_id(const std::string& name, const sim::ScenarioConfig& cfg);

}  // namespace fedledger::cli
