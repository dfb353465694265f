#include <gtest/gtest.h>

#include "fedledger/orchestrator.hpp"
#include "fedledger/sim.hpp"

using namespace fedledger;
using namespace fedledger::sim;

TEST(Stamp, AdvancesAndMergesSegments) {
  const auto s = Stamp(1.0)
                     .advanced(Phase::DataTransmission, 0.5)
                     .advanced(Phase::DataTransmission, 0.25)
                     .advanced(Phase::LocalTraining, 2.0)
                     .advanced(Phase::Cryptography, 0.0);
  EXPECT_DOUBLE_EQ(s.t(), 3.75);
  ASSERT_EQ(s.path().size(), 2u);
  EXPECT_EQ(s.path()[0].phase, Phase::DataTransmission);
  EXPECT_DOUBLE_EQ(s.path()[0].end, 1.75);
}

TEST(Stamp, UntilIsNoOpWhenLater) {
  const auto s = Stamp(5.0).until(Phase::TransactionExecution, 3.0);
  EXPECT_DOUBLE_EQ(s.t(), 5.0);
  EXPECT_TRUE(s.path().empty());
  EXPECT_DOUBLE_EQ(Stamp(5.0).until(Phase::TransactionExecution, 12.0).t(), 12.0);
}

TEST(Stamp, WindowClipsToInterval) {
  const auto s = Stamp(0.0)
                     .advanced(Phase::LocalTraining, 4.0)
                     .advanced(Phase::TransactionExecution, 4.0)
                     .advanced(Phase::DataTransmission, 2.0);
  const auto w = s.window(2.0, 9.0);
  EXPECT_DOUBLE_EQ(w[Phase::LocalTraining], 2.0);
  EXPECT_DOUBLE_EQ(w[Phase::TransactionExecution], 4.0);
  EXPECT_DOUBLE_EQ(w[Phase::DataTransmission], 1.0);
  EXPECT_DOUBLE_EQ(w.total(), 7.0);
  EXPECT_DOUBLE_EQ(w.non_training(), 5.0);
}

TEST(Stamp, LatestKeepsFirstOnTie) {
  const auto a = Stamp(1.0).advanced(Phase::Cryptography, 1.0);
  const auto b = Stamp(0.0).advanced(Phase::DataTransmission, 2.0);
  EXPECT_EQ(latest(a, b).path().front().phase, Phase::Cryptography);
  const auto c = Stamp(0.0).advanced(Phase::DataTransmission, 3.0);
  EXPECT_DOUBLE_EQ(latest(a, c).t(), 3.0);
}

TEST(EventQueue, OrdersByTimeThenInsertion) {
  EventQueue q;
  std::vector<int> order;
  q.push(2.0, [&] { order.push_back(3); });
  q.push(1.0, [&] { order.push_back(1); });
  q.push(1.0, [&] { order.push_back(2); });
  EXPECT_DOUBLE_EQ(q.top_time(), 1.0);
  while (!q.empty()) q.pop().second();
  EXPECT_EQ(order, (std::vector<int>{1, 2, 3}));
}

TEST(PhaseBreakdown, SingleNonZeroPhaseIsWhole) {
  PhaseTimes t;
  t[Phase::Cryptography] = 3.0;
  const auto rows = phase_breakdown(t);
  ASSERT_EQ(rows.size(), 5u);
  for (const auto& r : rows) EXPECT_DOUBLE_EQ(r.percent, r.phase == Phase::Cryptography ? 100.0 : 0.0);
  for (const auto& r : phase_breakdown(PhaseTimes{})) EXPECT_DOUBLE_EQ(r.percent, 0.0);
}

TEST(PhaseBreakdown, PercentsMatchSeconds) {
  PhaseTimes t;
  t[Phase::LocalTraining] = 18.28;
  t[Phase::AggregationEvaluation] = 1.96;
  t[Phase::Cryptography] = 0.24;
  t[Phase::TransactionExecution] = 12.12;
  t[Phase::DataTransmission] = 1.14;
  double sum = 0;
  for (const auto& r : phase_breakdown(t)) {
    EXPECT_NEAR(r.percent, 100.0 * r.seconds / t.total(), 1e-12);
    sum += r.percent;
  }
  EXPECT_NEAR(sum, 100.0, 1e-9);
  EXPECT_EQ(to_string(Phase::AggregationEvaluation), "AggregationEvaluation");
}

TEST(Mode, ParseAndLabel) {
  EXPECT_EQ(Mode::parse("owner"), Mode::owner());
  EXPECT_EQ(Mode::parse("c."), Mode::owner());
  EXPECT_EQ(Mode::parse("d.15"), Mode::committee(15));
  EXPECT_EQ(Mode::parse("committee:5"), Mode::committee(5));
  EXPECT_EQ(Mode::committee(25).label(), "d.25");
  EXPECT_EQ(Mode::owner().label(), "c.");
  EXPECT_THROW(Mode::parse("d.0"), Error);
  EXPECT_THROW(Mode::parse("d.x"), Error);
  EXPECT_THROW(Mode::parse("council"), Error);
}
