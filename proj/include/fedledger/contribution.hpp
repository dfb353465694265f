#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fedledger/allocation.hpp"
#include "fedledger/fl.hpp"

namespace fedledger::valuation {

enum class Metric { NegLoss, Accuracy };
enum class Method { Shapley, Loo };

std::string_view to_string(Method m) noexcept;

struct ContributionScore {
  AccountId trainer;
  double score = 0;
  Method method = Method::Loo;
};

/// Coalition utility over players 0..players()-1, normalised so that the
/// empty coalition is worth 0.
class Utility {
 public:
  virtual ~Utility() = default;
  virtual std::size_t players() const = 0;
  /// members is sorted ascending and duplicate-free.
  virtual double value(std::span<const std::size_t> members) const = 0;
};

/// U(S) = metric(FedAvg of S's local models) - metric(W_t) on the
/// customer's validation set.
class ModelUtility final : public Utility {
 public:
  ModelUtility(const fl::SoftmaxRegression& arch, fl::ModelParams base, std::vector<fl::Update> updates,
               const fl::Dataset& valset, Metric metric = Metric::NegLoss);

  std::size_t players() const override { return updates_.size(); }
  double value(std::span<const std::size_t> members) const override;

  const fl::ModelParams& base() const { return base_; }
  const std::vector<fl::Update>& updates() const { return updates_; }
  /// Number of value() calls made so far (for cost accounting).
  std::uint64_t evaluations() const { return evaluations_; }

 private:
  double metric_of(const fl::ModelParams& model) const;

  const fl::SoftmaxRegression* arch_;
  fl::ModelParams base_;
  std::vector<fl::Update> updates_;
  const fl::Dataset* valset_;
  Metric metric_;
  double base_metric_;
  mutable std::uint64_t evaluations_ = 0;
};

/// Utility from an arbitrary function of the member list.
class FunctionUtility final : public Utility {
 public:
  using Fn = std::function<double(std::span<const std::size_t>)>;
  FunctionUtility(std::size_t players, Fn fn) : n_(players), fn_(std::move(fn)) {}
  std::size_t players() const override { return n_; }
  double value(std::span<const std::size_t> members) const override {
    return members.empty() ? 0.0 : fn_(members);
  }

 private:
  std::size_t n_;
  Fn fn_;
};

inline constexpr std::size_t kMaxExactShapleyPlayers = 12;

/// c_i = U(N) - U(N \ {i}).
std::vector<ContributionScore> loo(const Utility& u, std::span<const AccountId> ids);

/// Exact Shapley values by enumerating all 2^n coalitions once (memoised).
/// Throws TooManyPlayers above kMaxExactShapleyPlayers.
std::vector<ContributionScore> shapley_exact(const Utility& u, std::span<const AccountId> ids);

/// Evaluator plug point; Monte-Carlo or gradient-similarity estimators
/// implement the same interface.
class ContributionEvaluator {
 public:
  virtual ~ContributionEvaluator() = default;
  virtual Method method() const = 0;
  virtual std::vector<ContributionScore> evaluate(const Utility& u, std::span<const AccountId> ids) const = 0;
  /// Utility evaluations evaluate() performs for n players.
  virtual std::uint64_t cost(std::size_t n) const = 0;
};

class LooEvaluator final : public ContributionEvaluator {
 public:
  Method method() const override { return Method::Loo; }
  std::vector<ContributionScore> evaluate(const Utility& u, std::span<const AccountId> ids) const override {
    return loo(u, ids);
  }
  std::uint64_t cost(std::size_t n) const override { return n + 1; }
};

class ShapleyEvaluator final : public ContributionEvaluator {
 public:
  Method method() const override { return Method::Shapley; }
  std::vector<ContributionScore> evaluate(const Utility& u, std::span<const AccountId> ids) const override {
    return shapley_exact(u, ids);
  }
  std::uint64_t cost(std::size_t n) const override { return (std::uint64_t{1} << n) - 1; }
};

std::unique_ptr<ContributionEvaluator> make_evaluator(Method m);

/// Fixed-point conversion in trainer order, ready for encode_scores().
std::vector<FixedScore> to_fixed(std::span<const ContributionScore> scores);

/// Converts real scores and applies allocate().
RewardAllocation allocate(std::span<const ContributionScore> scores, Tokens budget, std::uint32_t round = 0);

}  // namespace fedledger::valuation
