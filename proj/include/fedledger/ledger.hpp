#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "fedledger/errors.hpp"
#include "fedledger/types.hpp"

namespace fedledger::chain {

/// Block production and gas parameters of the simulated chain.
struct ChainConfig {
  Seconds block_interval = 12.0;
  std::uint32_t txs_per_block = 330;
  Gas gas_limit_per_block = 30'000'000;
  Gas base_tx_gas = 21'000;
  Gas per_byte_gas = 16;

  /// Throws InvalidParameter when an invariant is broken.
  void validate() const;
  bool operator==(const ChainConfig&) const = default;
};

/// Known presets: "ethereum-l1", "bitcoin", "solana".
/// Block capacity of a preset is the mid-range TPS times the interval.
ChainConfig configure_chain(std::string_view preset);

/// Explicit parameters; validated.
ChainConfig configure_chain(Seconds block_interval, std::uint32_t txs_per_block,
                            Gas gas_limit_per_block = 30'000'000, Gas base_tx_gas = 21'000,
                            Gas per_byte_gas = 16);

/// Capacity derived from a throughput: round(tps * block_interval), at least 1.
ChainConfig chain_from_tps(Seconds block_interval, double tps, Gas gas_limit_per_block = 30'000'000);

/// base_tx_gas + per_byte_gas * payload_len.
Gas charge_gas(const ChainConfig& cfg, std::size_t payload_len) noexcept;

struct TxId {
  AccountId sender;
  std::uint64_t nonce = 0;
  auto operator<=>(const TxId&) const = default;
};

struct Transaction {
  AccountId sender;
  Bytes payload;
  Seconds submit_time = 0;
  Gas gas = 0;
  std::uint64_t nonce = 0;

  TxId id() const { return {sender, nonce}; }
  bool operator==(const Transaction&) const = default;
};

struct PendingReceipt {
  TxId id;
  Gas gas = 0;
  Seconds submit_time = 0;
  std::uint64_t predicted_height = 0;
  Seconds predicted_inclusion = 0;
};

struct Block {
  std::uint64_t height = 0;
  Seconds timestamp = 0;
  std::vector<Transaction> txs;
  Gas gas_used = 0;
  bool operator==(const Block&) const = default;
};

enum class EventKind { KeyRequest, KeyAchieved, GlobalModelUpdated, LocalTrainingFinished };

std::string_view to_string(EventKind kind) noexcept;

/// Event as produced by contract code, before the ledger stamps it.
struct EventDraft {
  EventKind kind{};
  std::uint64_t project = 0;
  std::uint32_t round = 0;
  AccountId emitter;
  std::map<std::string, std::string> data;
  bool operator==(const EventDraft&) const = default;
};

struct EventRecord {
  EventKind kind{};
  std::uint64_t project = 0;
  std::uint32_t round = 0;
  AccountId emitter;
  std::uint64_t block_height = 0;
  std::map<std::string, std::string> data;
  bool operator==(const EventRecord&) const = default;
};

std::string to_json_line(const EventRecord& ev);

struct BlockContext {
  std::uint64_t height = 0;
  Seconds timestamp = 0;
};

/// Execution hook driven by block production. execute() either returns the
/// events a transaction emitted or throws fedledger::Error, in which case the
/// transaction is recorded as failed and its events are discarded.
class BlockExecutor {
 public:
  virtual ~BlockExecutor() = default;
  virtual std::vector<EventDraft> execute(const Transaction& tx, const BlockContext& ctx) = 0;
  virtual std::vector<EventDraft> end_block(const BlockContext&) { return {}; }
};

struct TxOutcome {
  TxId id;
  std::uint64_t height = 0;
  Seconds timestamp = 0;
  Gas gas = 0;
  bool ok = false;
  std::optional<Errc> error;
  std::string message;
  std::vector<EventRecord> events;
  bool operator==(const TxOutcome&) const = default;
};

/// Timestamped mempool plus periodic block production. Blocks at height h
/// carry timestamp h * block_interval and include, FIFO by
/// (submit_time, sender, nonce), only transactions submitted strictly before
/// that timestamp. Empty blocks are produced on schedule.
class Ledger {
 public:
  explicit Ledger(ChainConfig cfg);

  const ChainConfig& config() const { return cfg_; }

  /// Builds a transaction with the sender's next nonce and its gas charge.
  /// Does not reserve the nonce; submit() does.
  Transaction make_tx(AccountId sender, Bytes payload) const;

  /// Queues a transaction. Throws ClockRegression (now in the past),
  /// NonceGap, or PayloadTooLarge.
  PendingReceipt submit(Transaction tx, Seconds now);

  /// Produces every block with timestamp <= time. exec may be null, in which
  /// case transactions are included without execution and emit nothing.
  std::vector<Block> advance_to(Seconds time, BlockExecutor* exec = nullptr);

  Seconds now() const { return now_; }
  std::uint64_t height() const { return blocks_.back().height; }
  Seconds next_block_time() const;
  const std::vector<Block>& blocks() const { return blocks_; }
  const std::vector<EventRecord>& events() const { return events_; }
  std::size_t mempool_size() const { return mempool_.size(); }
  std::uint64_t next_nonce(AccountId sender) const;
  const TxOutcome* outcome(TxId id) const;

  /// One JSON object per line, in emission order.
  std::string events_jsonl() const;

  bool operator==(const Ledger&) const = default;

 private:
  using MempoolKey = std::tuple<Seconds, std::uint32_t, std::uint64_t>;

  std::uint64_t predict_height(const MempoolKey& key) const;

  ChainConfig cfg_;
  Seconds now_ = 0;
  std::map<MempoolKey, Transaction> mempool_;
  std::map<AccountId, std::uint64_t> nonces_;
  std::vector<Block> blocks_;
  std::vector<EventRecord> events_;
  std::map<TxId, TxOutcome> outcomes_;
};

}  // namespace fedledger::chain
