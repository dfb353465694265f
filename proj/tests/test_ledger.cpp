#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fedledger/ledger.hpp"
#include "fedledger/rng.hpp"

using namespace fedledger;
using namespace fedledger::chain;

namespace {

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return Errc::NoData;
}

}  // namespace

TEST(Chain, GasIsBasePlusPerByte) {
  ChainConfig cfg;
  EXPECT_EQ(charge_gas(cfg, 0), 21000u);
  EXPECT_EQ(charge_gas(cfg, 100), 21000u + 1600u);
  Ledger l(cfg);
  auto tx = l.make_tx(AccountId{3}, Bytes(40, 1));
  EXPECT_EQ(tx.gas, 21000u + 16u * 40u);
}

TEST(Chain, Presets) {
  const auto eth = configure_chain("ethereum-l1");
  EXPECT_DOUBLE_EQ(eth.block_interval, 12.0);
  EXPECT_EQ(eth.txs_per_block, 330u);
  EXPECT_NO_THROW(configure_chain("bitcoin"));
  EXPECT_NO_THROW(configure_chain("solana"));
  EXPECT_EQ(code_of([] { configure_chain("dogechain"); }), Errc::UnknownPreset);
}

TEST(Chain, CapacityFromTps) {
  EXPECT_EQ(chain_from_tps(5.0, 27.5).txs_per_block, static_cast<std::uint32_t>(std::round(27.5 * 5.0)));
  EXPECT_EQ(chain_from_tps(12.0, 27.5).txs_per_block, 330u);
  EXPECT_EQ(chain_from_tps(1.0, 0.01).txs_per_block, 1u);
}

TEST(Chain, InvalidParameters) {
  EXPECT_EQ(code_of([] { configure_chain(0.0, 10); }), Errc::InvalidParameter);
  EXPECT_EQ(code_of([] { configure_chain(5.0, 0); }), Errc::InvalidParameter);
  EXPECT_EQ(code_of([] { configure_chain(5.0, 10, 1000); }), Errc::InvalidParameter);
}

TEST(Chain, InclusionIsStrictlyAfterSubmission) {
  Ledger l(configure_chain(12.0, 10));
  l.submit(l.make_tx(AccountId{1}, {}), 0.0);
  l.advance_to(12.0);
  auto tx = l.make_tx(AccountId{1}, {});
  auto r = l.submit(tx, 12.0);
  EXPECT_EQ(r.predicted_height, 2u);
  EXPECT_DOUBLE_EQ(r.predicted_inclusion, 24.0);
  l.advance_to(24.0);
  ASSERT_NE(l.outcome(tx.id()), nullptr);
  EXPECT_EQ(l.outcome(tx.id())->height, 2u);
  EXPECT_EQ(l.outcome(TxId{AccountId{1}, 0})->height, 1u);
}

TEST(Chain, EmptyBlocksOnSchedule) {
  Ledger l(configure_chain(5.0, 10));
  l.advance_to(26.0);
  EXPECT_EQ(l.height(), 5u);
  for (const auto& b : l.blocks()) EXPECT_DOUBLE_EQ(b.timestamp, 5.0 * static_cast<double>(b.height));
  EXPECT_DOUBLE_EQ(l.next_block_time(), 30.0);
}

TEST(Chain, Errors) {
  Ledger l(configure_chain(5.0, 10, 100'000));
  l.advance_to(10.0);
  EXPECT_EQ(code_of([&] { l.submit(l.make_tx(AccountId{1}, {}), 4.0); }), Errc::ClockRegression);
  auto tx = l.make_tx(AccountId{1}, {});
  tx.nonce = 5;
  EXPECT_EQ(code_of([&] { l.submit(tx, 10.0); }), Errc::NonceGap);
  EXPECT_EQ(code_of([&] { l.submit(l.make_tx(AccountId{1}, Bytes(10'000)), 10.0); }), Errc::PayloadTooLarge);
}

// Independent oracle: replay the same submissions through a direct FIFO
// simulation and compare inclusion heights.
TEST(Chain, FifoReplayOracle) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const std::uint32_t cap = 1 + static_cast<std::uint32_t>(uniform_index(rng, 4));
    const Seconds interval = 2.0;
    Ledger l(configure_chain(interval, cap));
    struct Sub {
      Seconds t;
      std::uint32_t sender;
      std::uint64_t nonce;
    };
    std::vector<Sub> subs;
    Seconds now = 0;
    for (int i = 0; i < 60; ++i) {
      now += uniform01(rng) * 1.5;
      if (uniform01(rng) < 0.3) now = std::ceil(now / interval) * interval;  // land on a block boundary
      l.advance_to(now);
      const AccountId who{static_cast<std::uint32_t>(uniform_index(rng, 5))};
      auto tx = l.make_tx(who, Bytes(uniform_index(rng, 30)));
      subs.push_back({now, who.value, tx.nonce});
      l.submit(tx, now);
    }
    l.advance_to(now + 200 * interval);

    std::sort(subs.begin(), subs.end(), [](const Sub& a, const Sub& b) {
      return std::tie(a.t, a.sender, a.nonce) < std::tie(b.t, b.sender, b.nonce);
    });
    std::size_t next = 0;
    std::uint64_t h = 0;
    while (next < subs.size()) {
      ++h;
      const Seconds ts = static_cast<double>(h) * interval;
      std::uint32_t used = 0;
      while (next < subs.size() && used < cap && subs[next].t < ts) {
        const auto* o = l.outcome(TxId{AccountId{subs[next].sender}, subs[next].nonce});
        ASSERT_NE(o, nullptr);
        EXPECT_EQ(o->height, h) << "seed " << seed;
        ++next;
        ++used;
      }
    }
  }
}

TEST(Chain, PredictionMatchesInclusion) {
  Ledger l(configure_chain(3.0, 2));
  std::vector<PendingReceipt> rs;
  for (int i = 0; i < 9; ++i) rs.push_back(l.submit(l.make_tx(AccountId{static_cast<std::uint32_t>(i % 3)}, {}), 0.5 * i));
  l.advance_to(100.0);
  for (const auto& r : rs) {
    const auto* o = l.outcome(r.id);
    ASSERT_NE(o, nullptr);
    EXPECT_EQ(o->height, r.predicted_height);
    EXPECT_DOUBLE_EQ(o->timestamp, r.predicted_inclusion);
  }
}

TEST(Chain, BlockGasIsSumOfTxGas) {
  Ledger l(configure_chain(5.0, 50));
  for (int i = 0; i < 20; ++i) l.submit(l.make_tx(AccountId{9}, Bytes(i * 3)), 0.1 * i);
  l.advance_to(5.0);
  const auto& b = l.blocks().back();
  Gas sum = 0;
  for (const auto& tx : b.txs) sum += tx.gas;
  EXPECT_EQ(b.txs.size(), 20u);
  EXPECT_EQ(b.gas_used, sum);
}
