#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fedledger/contract.hpp"
#include "fedledger/contribution.hpp"
#include "fedledger/crypto.hpp"
#include "fedledger/dataplane.hpp"
#include "fedledger/fl.hpp"
#include "fedledger/ledger.hpp"
#include "fedledger/sim.hpp"

namespace fedledger::sim {

enum class ExecMode { Owner, Committee };

struct Mode {
  ExecMode kind = ExecMode::Owner;
  std::uint32_t k = 0;  // committee size

  /// "c." for owner-executed, "d.<k>" for a committee of k.
  std::string label() const;
  static Mode owner() { return {}; }
  static Mode committee(std::uint32_t k) { return {ExecMode::Committee, k}; }
  /// Parses "owner", "c.", "committee:<k>" or "d.<k>"; throws ConfigError.
  static Mode parse(std::string_view s);
  bool operator==(const Mode&) const = default;
};

enum class Timing { Modeled, WallClock };

/// Modeled compute costs in seconds.
struct CostModel {
  double train_per_sample = 5e-4;    // per sample per local iteration
  double crypto_per_byte = 2e-9;     // AEAD seal or open
  double ecdh_op = 1e-4;             // one X25519 agreement
  double aggregate_per_param = 2e-9; // per update per parameter
  double evaluate_per_sample_param = 2e-9;
  bool operator==(const CostModel&) const = default;
};

struct FaultConfig {
  /// Committee members (0-based positions) that receive a corrupted copy of
  /// the first trainer's update and therefore aggregate without it.
  std::vector<std::uint32_t> corrupt_aggregators;
  bool operator==(const FaultConfig&) const = default;
};

struct ScenarioConfig {
  std::string id = "scenario";
  std::uint32_t n_trainers = 5;
  Mode mode;
  chain::ChainConfig chain;
  net::NetworkConfig net;
  net::Policy policy = net::Policy::DirectFirst;
  fl::TrainConfig train;
  fl::TaskSpec task;  // n_trainers, seed and first_trainer_id are overridden
  std::string aggregator = "fedavg";
  std::uint32_t rounds = 5;
  valuation::Method evaluator = valuation::Method::Loo;
  valuation::Metric metric = valuation::Metric::NegLoss;
  std::uint64_t payload_inflation = 0;  // minimum wire size of model payloads
  std::uint64_t seed = 1;
  CostModel cost;
  Timing timing = Timing::Modeled;
  bool rotate_keys = true;
  Tokens round_budget = 1000;
  Tokens fee = 10;
  std::uint32_t deadline_blocks = 10;
  FaultConfig faults;

  void validate() const;  // throws ConfigError
};

struct RoundReport {
  std::uint32_t round = 0;
  PhaseTimes phases;
  Gas gas_total = 0;
  std::uint32_t tx_count = 0;
  Seconds start = 0;
  Seconds end = 0;
  double accuracy = 0;
  double loss = 0;
  bool aborted = false;
  std::vector<AccountId> providers;
  std::vector<chain::EventRecord> events;
  std::vector<chain::TxId> txs;
  std::optional<valuation::RewardAllocation> allocation;
  std::vector<valuation::ContributionScore> scores;
  // Plaintext artefacts, kept for verification.
  fl::ModelParams base_model;
  fl::ModelParams global_model;  // as decrypted by the first trainer
  std::vector<fl::Update> updates;

  Seconds non_training_time() const { return phases.non_training(); }
};

struct Summary {
  double mean_non_training = 0;
  double std_non_training = 0;
  double mean_gas = 0;
  double std_gas = 0;
  double final_accuracy = 0;
  double final_loss = 0;
  std::uint32_t aborted = 0;
};

struct ExperimentReport {
  ScenarioConfig config;
  std::vector<RoundReport> rounds;
  Summary summary;
  std::vector<net::TransferReceipt> transfers;
  std::string events_jsonl;
  nlohmann::ordered_json contract_state;
};

/// One protocol instance: a chain, the project contract, the data plane and
/// all participants, driven by a single event queue.
class Simulation {
 public:
  explicit Simulation(ScenarioConfig cfg);
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  /// Funds accounts, creates the project and registers every key.
  void setup();
  /// Runs until round `next` is complete (published and settled, or voided).
  RoundReport run_round();
  ExperimentReport finish();

  const chain::Ledger& ledger() const;
  const contract::ProjectContract& contract() const;
  const net::DataPlane& dataplane() const;
  const fl::Task& task() const;
  contract::ProjectId project_id() const;
  AccountId customer() const;
  const std::vector<AccountId>& trainers() const;
  const std::vector<AccountId>& aggregators() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Setup plus cfg.rounds rounds.
ExperimentReport run_scenario(const ScenarioConfig& cfg);

Summary summarize(const std::vector<RoundReport>& rounds);

struct PhaseRow {
  Phase phase{};
  Seconds seconds = 0;
  double percent = 0;
};

/// One row per phase, in Table order; percent of the total (all zero when
/// the total is zero).
std::vector<PhaseRow> phase_breakdown(const PhaseTimes& times);
std::vector<PhaseRow> phase_breakdown(const RoundReport& report);

}  // namespace fedledger::sim
