#include "fedledger/ledger.hpp"

#include <cmath>
#include <json.hpp>

namespace fedledger::chain {

void ChainConfig::validate() const {
  if (!(block_interval > 0) || !std::isfinite(block_interval))
    fail(Errc::InvalidParameter, "block_interval must be positive");
  if (txs_per_block < 1) fail(Errc::InvalidParameter, "txs_per_block must be >= 1");
  if (gas_limit_per_block < base_tx_gas)
    fail(Errc::InvalidParameter, "gas_limit_per_block below base_tx_gas");
}

ChainConfig chain_from_tps(Seconds block_interval, double tps, Gas gas_limit_per_block) {
  if (!(tps > 0)) fail(Errc::InvalidParameter, "tps must be positive");
  ChainConfig cfg;
  cfg.block_interval = block_interval;
  cfg.gas_limit_per_block = gas_limit_per_block;
  const auto cap = std::llround(tps * block_interval);
  cfg.txs_per_block = static_cast<std::uint32_t>(std::max<long long>(1, cap));
  cfg.validate();
  return cfg;
}

ChainConfig configure_chain(std::string_view preset) {
  // Block time and mid-range TPS of the reference public chains.
  if (preset == "ethereum-l1") return chain_from_tps(12.0, 27.5, 30'000'000);
  if (preset == "bitcoin") return chain_from_tps(600.0, 5.0, 4'000'000'000ULL);
  if (preset == "solana") return chain_from_tps(0.4, 1400.0, 48'000'000);
  fail(Errc::UnknownPreset, std::string(preset));
}

ChainConfig configure_chain(Seconds block_interval, std::uint32_t txs_per_block,
                            Gas gas_limit_per_block, Gas base_tx_gas, Gas per_byte_gas) {
  ChainConfig cfg{block_interval, txs_per_block, gas_limit_per_block, base_tx_gas, per_byte_gas};
  cfg.validate();
  return cfg;
}

Gas charge_gas(const ChainConfig& cfg, std::size_t payload_len) noexcept {
  return cfg.base_tx_gas + cfg.per_byte_gas * static_cast<Gas>(payload_len);
}

std::string_view to_string(EventKind kind) noexcept {
  switch (kind) {
    case EventKind::KeyRequest: return "key_request";
    case EventKind::KeyAchieved: return "key_achieved";
    case EventKind::GlobalModelUpdated: return "global_model_updated";
    case EventKind::LocalTrainingFinished: return "local_training_finished";
  }
  return "unknown";
}

std::string to_json_line(const EventRecord& ev) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(ev.kind);
  j["project"] = ev.project;
  j["round"] = ev.round;
  j["emitter"] = ev.emitter.value;
  j["block_height"] = ev.block_height;
  j["data"] = ev.data;
  return j.dump();
}

Ledger::Ledger(ChainConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  blocks_.push_back(Block{0, 0.0, {}, 0});
}

Transaction Ledger::make_tx(AccountId sender, Bytes payload) const {
  Transaction tx;
  tx.sender = sender;
  tx.nonce = next_nonce(sender);
  tx.gas = charge_gas(cfg_, payload.size());
  tx.payload = std::move(payload);
  return tx;
}

std::uint64_t Ledger::next_nonce(AccountId sender) const {
  auto it = nonces_.find(sender);
  return it == nonces_.end() ? 0 : it->second;
}

Seconds Ledger::next_block_time() const {
  return static_cast<double>(height() + 1) * cfg_.block_interval;
}

PendingReceipt Ledger::submit(Transaction tx, Seconds now) {
  if (now < now_) fail(Errc::ClockRegression, "submit in the past");
  if (tx.nonce != next_nonce(tx.sender))
    fail(Errc::NonceGap, "sender " + to_string(tx.sender) + " expected nonce " +
                             std::to_string(next_nonce(tx.sender)));
  tx.gas = charge_gas(cfg_, tx.payload.size());
  if (tx.gas > cfg_.gas_limit_per_block) fail(Errc::PayloadTooLarge, "gas exceeds block limit");
  now_ = now;
  tx.submit_time = now;
  nonces_[tx.sender] = tx.nonce + 1;

  MempoolKey key{tx.submit_time, tx.sender.value, tx.nonce};
  PendingReceipt receipt;
  receipt.id = tx.id();
  receipt.gas = tx.gas;
  receipt.submit_time = now;
  mempool_.emplace(key, std::move(tx));
  receipt.predicted_height = predict_height(key);
  receipt.predicted_inclusion = static_cast<double>(receipt.predicted_height) * cfg_.block_interval;
  return receipt;
}

std::uint64_t Ledger::predict_height(const MempoolKey& key) const {
  auto it = mempool_.begin();
  for (std::uint64_t h = height() + 1;; ++h) {
    const Seconds ts = static_cast<double>(h) * cfg_.block_interval;
    std::uint32_t count = 0;
    Gas gas = 0;
    while (it != mempool_.end() && std::get<0>(it->first) < ts && count < cfg_.txs_per_block &&
           gas + it->second.gas <= cfg_.gas_limit_per_block) {
      if (it->first == key) return h;
      gas += it->second.gas;
      ++count;
      ++it;
    }
  }
}

std::vector<Block> Ledger::advance_to(Seconds time, BlockExecutor* exec) {
  if (time < now_) fail(Errc::ClockRegression, "advance into the past");
  now_ = time;
  std::vector<Block> produced;
  for (;;) {
    const std::uint64_t h = height() + 1;
    const Seconds ts = static_cast<double>(h) * cfg_.block_interval;
    if (ts > time) break;

    Block block{h, ts, {}, 0};
    const BlockContext ctx{h, ts};
    auto it = mempool_.begin();
    while (it != mempool_.end() && std::get<0>(it->first) < ts &&
           block.txs.size() < cfg_.txs_per_block &&
           block.gas_used + it->second.gas <= cfg_.gas_limit_per_block) {
      Transaction tx = std::move(it->second);
      it = mempool_.erase(it);

      TxOutcome out;
      out.id = tx.id();
      out.height = h;
      out.timestamp = ts;
      out.gas = tx.gas;
      std::vector<EventDraft> drafts;
      try {
        if (exec != nullptr) drafts = exec->execute(tx, ctx);
        out.ok = true;
      } catch (const Error& e) {
        out.ok = false;
        out.error = e.code();
        out.message = e.what();
        drafts.clear();
      }
      for (auto& d : drafts) {
        EventRecord rec{d.kind, d.project, d.round, d.emitter, h, std::move(d.data)};
        out.events.push_back(rec);
        events_.push_back(std::move(rec));
      }
      block.gas_used += tx.gas;
      outcomes_.emplace(out.id, std::move(out));
      block.txs.push_back(std::move(tx));
    }
    if (exec != nullptr) {
      for (auto& d : exec->end_block(ctx)) {
        events_.push_back(EventRecord{d.kind, d.project, d.round, d.emitter, h, std::move(d.data)});
      }
    }
    blocks_.push_back(block);
    produced.push_back(std::move(block));
  }
  return produced;
}

const TxOutcome* Ledger::outcome(TxId id) const {
  auto it = outcomes_.find(id);
  return it == outcomes_.end() ? nullptr : &it->second;
}

std::string Ledger::events_jsonl() const {
  std::string out;
  for (const auto& ev : events_) {
    out += to_json_line(ev);
    out += '\n';
  }
  return out;
}

}  // namespace fedledger::chain
