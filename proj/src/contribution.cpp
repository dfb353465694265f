#include "fedledger/contribution.hpp"

#include <bit>

#include "fedledger/errors.hpp"

namespace fedledger::valuation {

std::string_view to_string(Method m) noexcept { return m == Method::Shapley ? "shapley" : "loo"; }

ModelUtility::ModelUtility(const fl::SoftmaxRegression& arch, fl::ModelParams base,
                           std::vector<fl::Update> updates, const fl::Dataset& valset, Metric metric)
    : arch_(&arch), base_(std::move(base)), updates_(std::move(updates)), valset_(&valset), metric_(metric) {
  if (updates_.empty()) fail(Errc::EmptySet, "utility needs at least one update");
  base_metric_ = metric_of(base_);
}

double ModelUtility::metric_of(const fl::ModelParams& model) const {
  const auto ev = fl::evaluate(*arch_, model, *valset_);
  return metric_ == Metric::NegLoss ? -ev.loss : ev.accuracy;
}

double ModelUtility::value(std::span<const std::size_t> members) const {
  if (members.empty()) return 0.0;
  ++evaluations_;
  std::vector<fl::Update> subset;
  subset.reserve(members.size());
  for (auto i : members) subset.push_back(updates_.at(i));
  return metric_of(fl::aggregate_fedavg(base_, subset)) - base_metric_;
}

std::vector<ContributionScore> loo(const Utility& u, std::span<const AccountId> ids) {
  const std::size_t n = u.players();
  if (ids.size() != n) fail(Errc::DimensionMismatch, "one id per player required");
  if (n == 0) fail(Errc::EmptySet, "no players");
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  const double grand = u.value(all);

  std::vector<ContributionScore> out;
  out.reserve(n);
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < n; ++i) {
    rest.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) rest.push_back(j);
    out.push_back({ids[i], grand - u.value(rest), Method::Loo});
  }
  return out;
}

std::vector<ContributionScore> shapley_exact(const Utility& u, std::span<const AccountId> ids) {
  const std::size_t n = u.players();
  if (ids.size() != n) fail(Errc::DimensionMismatch, "one id per player required");
  if (n == 0) fail(Errc::EmptySet, "no players");
  if (n > kMaxExactShapleyPlayers) fail(Errc::TooManyPlayers, std::to_string(n) + " players");

  const std::uint32_t full = (1u << n) - 1;
  std::vector<double> value(std::size_t{full} + 1, 0.0);
  std::vector<std::size_t> members;
  for (std::uint32_t mask = 1; mask <= full; ++mask) {
    members.clear();
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) members.push_back(i);
    value[mask] = u.value(members);
  }

  // weight[s] = s! (n - s - 1)! / n!
  std::vector<std::uint64_t> fact(n + 1, 1);
  for (std::size_t i = 1; i <= n; ++i) fact[i] = fact[i - 1] * i;
  std::vector<double> weight(n);
  for (std::size_t s = 0; s < n; ++s)
    weight[s] = static_cast<double>(fact[s] * fact[n - s - 1]) / static_cast<double>(fact[n]);

  std::vector<ContributionScore> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t bit = 1u << i;
    double phi = 0;
    for (std::uint32_t mask = 0; mask <= full; ++mask) {
      if (mask & bit) continue;
      phi += weight[static_cast<std::size_t>(std::popcount(mask))] * (value[mask | bit] - value[mask]);
    }
    out.push_back({ids[i], phi, Method::Shapley});
  }
  return out;
}

std::unique_ptr<ContributionEvaluator> make_evaluator(Method m) {
  if (m == Method::Shapley) return std::make_unique<ShapleyEvaluator>();
  return std::make_unique<LooEvaluator>();
}

std::vector<FixedScore> to_fixed(std::span<const ContributionScore> scores) {
  std::vector<FixedScore> out;
  out.reserve(scores.size());
  for (const auto& s : scores) out.push_back({s.trainer, to_fixed(s.score)});
  return out;
}

RewardAllocation allocate(std::span<const ContributionScore> scores, Tokens budget, std::uint32_t round) {
  const auto fixed = to_fixed(scores);
  return allocate(std::span<const FixedScore>(fixed), budget, round);
}

}  // namespace fedledger::valuation
