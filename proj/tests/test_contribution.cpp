#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>

#include "fedledger/contribution.hpp"
#include "fedledger/errors.hpp"
#include "fedledger/rng.hpp"

using namespace fedledger;
using namespace fedledger::valuation;

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

std::vector<AccountId> ids(std::size_t n) {
  std::vector<AccountId> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(AccountId{static_cast<std::uint32_t>(1000 + i)});
  return out;
}

std::uint32_t mask_of(std::span<const std::size_t> m) {
  std::uint32_t x = 0;
  for (auto i : m) x |= 1u << i;
  return x;
}

FunctionUtility table_utility(const std::vector<double>& table, std::size_t n) {
  return FunctionUtility(n, [table](std::span<const std::size_t> m) { return table[mask_of(m)]; });
}

// Average marginal contribution over all n! orderings.
std::vector<double> permutation_shapley(const std::vector<double>& table, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> phi(n, 0.0);
  double count = 0;
  do {
    std::uint32_t mask = 0;
    for (auto i : order) {
      const double before = table[mask];
      mask |= 1u << i;
      phi[i] += table[mask] - before;
    }
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));
  for (auto& v : phi) v /= count;
  return phi;
}

std::vector<double> random_table(Rng& rng, std::size_t n) {
  std::vector<double> t(std::size_t{1} << n);
  for (auto& v : t) v = uniform01(rng) * 2 - 0.5;
  t[0] = 0;
  return t;
}

}  // namespace

TEST(Valuation, ShapleyMatchesPermutationOracle) {
  Rng rng(77);
  for (std::size_t n = 2; n <= 5; ++n)
    for (int trial = 0; trial < 20; ++trial) {
      const auto table = random_table(rng, n);
      const auto u = table_utility(table, n);
      const auto who = ids(n);
      const auto got = shapley_exact(u, who);
      const auto want = permutation_shapley(table, n);
      for (std::size_t i = 0; i < n; ++i) {
        EXPECT_EQ(got[i].trainer, who[i]);
        EXPECT_NEAR(got[i].score, want[i], 1e-9);
      }
    }
}

TEST(Valuation, ShapleyAxioms) {
  Rng rng(5);
  const std::size_t n = 4;
  // Efficiency.
  const auto table = random_table(rng, n);
  const auto sv = shapley_exact(table_utility(table, n), ids(n));
  double sum = 0;
  for (const auto& s : sv) sum += s.score;
  EXPECT_NEAR(sum, table.back(), 1e-12);

  // Dummy: player 3 adds exactly its singleton value; symmetry: 0 and 1 swap.
  auto u = FunctionUtility(n, [](std::span<const std::size_t> m) {
    double v = 0;
    bool a = false, b = false;
    for (auto i : m) {
      if (i == 0) a = true;
      if (i == 1) b = true;
      if (i == 2) v += 0.3;
      if (i == 3) v += 0.125;
    }
    if (a || b) v += 1.0;
    return v;
  });
  const auto s = shapley_exact(u, ids(n));
  EXPECT_NEAR(s[3].score, 0.125, 1e-12);
  EXPECT_NEAR(s[0].score, s[1].score, 1e-12);
  EXPECT_NEAR(s[0].score, 0.5, 1e-12);

  // Null player.
  auto null = FunctionUtility(3, [](std::span<const std::size_t> m) {
    return std::count_if(m.begin(), m.end(), [](std::size_t i) { return i != 2; }) * 1.0;
  });
  EXPECT_NEAR(shapley_exact(null, ids(3))[2].score, 0.0, 1e-12);
}

TEST(Valuation, LooMatchesDirectFormula) {
  Rng rng(9);
  for (std::size_t n = 1; n <= 6; ++n) {
    const auto table = random_table(rng, n);
    const auto got = loo(table_utility(table, n), ids(n));
    const std::uint32_t full = (1u << n) - 1;
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(got[i].score, table[full] - table[full & ~(1u << i)]);
  }
}

TEST(Valuation, ExactShapleyCap) {
  auto u = FunctionUtility(13, [](std::span<const std::size_t> m) { return static_cast<double>(m.size()); });
  EXPECT_EQ(code_of([&] { shapley_exact(u, ids(13)); }), Errc::TooManyPlayers);
  auto e = make_evaluator(Method::Shapley);
  EXPECT_EQ(e->cost(4), 15u);
  EXPECT_EQ(make_evaluator(Method::Loo)->cost(4), 5u);
}

TEST(Valuation, ModelUtilityOfFullCoalitionIsFedAvgGain) {
  fl::TaskSpec spec;
  spec.n_trainers = 3;
  spec.n_features = 4;
  spec.n_classes = 3;
  spec.samples_per_trainer = 50;
  spec.seed = 3;
  const auto task = fl::make_task(spec);
  fl::SoftmaxRegression arch(4, 3);
  const auto base = arch.initial_model();
  fl::TrainConfig cfg;
  std::vector<fl::Update> ups;
  for (const auto& s : task.shards) ups.push_back(fl::local_train(base, s, cfg, arch, 1));
  ModelUtility u(arch, base, ups, task.validation);
  const std::size_t all[] = {0, 1, 2};
  const auto agg = fl::aggregate_fedavg(base, ups);
  const double want = fl::evaluate(arch, base, task.validation).loss - fl::evaluate(arch, agg, task.validation).loss;
  EXPECT_NEAR(u.value(all), want, 1e-12);
  EXPECT_EQ(u.evaluations(), 1u);
}

TEST(Allocation, FloorsAndRefundsRemainder) {
  const std::vector<FixedScore> s{{AccountId{1}, 1}, {AccountId{2}, 2}, {AccountId{3}, -5}};
  const auto a = allocate(s, 100, 4);
  EXPECT_EQ(a.round, 4u);
  EXPECT_EQ(a.payouts.at(AccountId{1}), 33u);
  EXPECT_EQ(a.payouts.at(AccountId{2}), 66u);
  EXPECT_EQ(a.payouts.at(AccountId{3}), 0u);
  EXPECT_EQ(a.refund, 1u);
  const std::vector<FixedScore> neg{{AccountId{1}, -1}, {AccountId{2}, 0}};
  EXPECT_EQ(allocate(neg, 50).refund, 50u);
}

TEST(Allocation, ConservesBudget) {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<FixedScore> s;
    const auto n = 1 + uniform_index(rng, 8);
    for (std::uint64_t i = 0; i < n; ++i)
      s.push_back({AccountId{static_cast<std::uint32_t>(i)}, static_cast<std::int64_t>(uniform_index(rng, 1000)) - 300});
    const Tokens budget = uniform_index(rng, 10'000);
    const auto a = allocate(s, budget);
    Tokens sum = a.refund;
    for (const auto& [_, v] : a.payouts) sum += v;
    EXPECT_EQ(sum, budget);
  }
}

TEST(Allocation, ScorePayloadRoundTrip) {
  const std::vector<FixedScore> s{{AccountId{1000}, 5}, {AccountId{1001}, -7}};
  const auto b = encode_scores(3, s);
  EXPECT_EQ(b.size(), 4u + 2u * 20u);
  const auto d = decode_scores(view(b));
  EXPECT_EQ(d.round, 3u);
  EXPECT_EQ(d.scores, s);
  const std::vector<FixedScore> dup{{AccountId{1}, 5}, {AccountId{1}, 6}};
  EXPECT_EQ(code_of([&] { decode_scores(view(encode_scores(1, dup))); }), Errc::MalformedPayload);
  auto cut = b;
  cut.pop_back();
  EXPECT_EQ(code_of([&] { decode_scores(view(cut)); }), Errc::MalformedPayload);
}

TEST(Allocation, FixedPointRounding) {
  EXPECT_EQ(to_fixed(0.0000015), 2);
  EXPECT_EQ(to_fixed(-0.0000015), -2);
  EXPECT_EQ(to_fixed(1.0), 1'000'000);
}
