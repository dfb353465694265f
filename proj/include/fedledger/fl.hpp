#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fedledger/types.hpp"

namespace fedledger::fl {

/// Flat parameter vector. For softmax regression the layout is the
/// class-major weight matrix (classes x features) followed by the biases.
struct ModelParams {
  std::vector<double> values;
  std::string arch_tag = "softmax";

  std::size_t dim() const { return values.size(); }
  bool operator==(const ModelParams&) const = default;
};

/// Local model update. delta = W_t - W_local, so a descent step yields a
/// delta pointing along the gradient. The local model is W_t - delta.
struct Update {
  std::vector<double> delta;
  std::uint64_t n_samples = 1;
  AccountId trainer;
  std::uint32_t round = 0;
  bool operator==(const Update&) const = default;
};

struct TrainConfig {
  double lr = 0.1;
  std::uint32_t local_iters = 10;
  std::uint32_t batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Dataset {
  std::size_t n_features = 0;
  std::vector<double> features;  // row-major, rows() x n_features
  std::vector<std::uint32_t> labels;

  std::size_t rows() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * n_features, n_features};
  }
  bool operator==(const Dataset&) const = default;
};

struct Shard {
  Dataset data;
  AccountId owner;
  bool operator==(const Shard&) const = default;
};

enum class Partition { Iid, LabelSkew };

struct TaskSpec {
  std::uint32_t n_trainers = 5;
  std::uint32_t samples_per_trainer = 200;
  std::uint32_t n_features = 16;
  std::uint32_t n_classes = 4;
  std::uint32_t validation_samples = 400;
  double separation = 1.5;  // stddev of class centres relative to unit noise
  Partition partition = Partition::Iid;
  double skew = 0.0;  // label-skew only: probability of the shard's own class
  std::uint64_t seed = 0;
  std::uint32_t first_trainer_id = 1000;
};

struct Task {
  std::vector<Shard> shards;
  Dataset validation;  // held by the customer only
  std::uint32_t n_classes = 0;
  bool operator==(const Task&) const = default;
};

/// Gaussian class clusters; deterministic in spec.seed. Throws
/// InvalidPartition for non-positive counts, skew outside [0, 1] or fewer than
/// two classes.
Task make_task(const TaskSpec& spec);

/// Concatenation of datasets in order.
Dataset pool(std::span<const Shard> shards);

/// Differentiable empirical loss over a set of rows of a dataset.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual std::size_t dim() const = 0;
  /// Mean loss over rows; writes the mean gradient into grad (size dim()).
  virtual double loss_and_gradient(std::span<const double> params, const Dataset& data,
                                   std::span<const std::size_t> rows, std::span<double> grad) const = 0;
};

/// Multinomial logistic regression with mean cross-entropy loss.
class SoftmaxRegression final : public Objective {
 public:
  SoftmaxRegression(std::size_t n_features, std::size_t n_classes);

  std::size_t dim() const override { return n_classes_ * (n_features_ + 1); }
  std::size_t n_features() const { return n_features_; }
  std::size_t n_classes() const { return n_classes_; }

  double loss_and_gradient(std::span<const double> params, const Dataset& data,
                           std::span<const std::size_t> rows, std::span<double> grad) const override;

  /// Log-probabilities of each class for one input row.
  void log_probs(std::span<const double> params, std::span<const double> x,
                 std::span<double> out) const;

  ModelParams initial_model() const;

 private:
  std::size_t n_features_;
  std::size_t n_classes_;
};

/// Exactly cfg.local_iters minibatch SGD steps from model on the shard.
/// Minibatches walk a seeded permutation of the shard; a batch_size at least
/// the shard size means full-batch gradient descent.
/// Throws DimensionMismatch.
Update local_train(const ModelParams& model, const Shard& shard, const TrainConfig& cfg,
                   const Objective& objective, std::uint32_t round);

/// W_t - delta.
ModelParams apply_update(const ModelParams& base, const Update& update);

/// Normalised FedAvg weights |D_i| / sum |D_j|. Throws EmptySet when the
/// total is zero.
std::vector<double> fedavg_weights(std::span<const std::uint64_t> sizes);

/// Weighted model average, summed in the given order.
/// Throws EmptySet or DimensionMismatch.
ModelParams aggregate_fedavg(std::span<const ModelParams> models, std::span<const std::uint64_t> sizes);

/// FedAvg over the local models reconstructed from updates.
ModelParams aggregate_fedavg(const ModelParams& base, std::span<const Update> updates);

/// Server-side aggregation plug point. Implementations may keep state
/// across rounds (momentum, adaptive moments).
class Aggregator {
 public:
  virtual ~Aggregator() = default;
  virtual std::string name() const = 0;
  virtual ModelParams aggregate(const ModelParams& base, std::span<const Update> updates) = 0;
  virtual std::unique_ptr<Aggregator> clone() const = 0;
};

class FedAvg final : public Aggregator {
 public:
  std::string name() const override { return "fedavg"; }
  ModelParams aggregate(const ModelParams& base, std::span<const Update> updates) override;
  std::unique_ptr<Aggregator> clone() const override { return std::make_unique<FedAvg>(*this); }
};

struct MomentumState {
  std::vector<double> velocity;
};

/// FedAvgM: v = mu * v + g; W = W_t - server_lr * v, with g the FedAvg
/// pseudo-gradient (weighted mean delta).
std::pair<ModelParams, MomentumState> aggregate_fedavgm(const MomentumState& prev, const ModelParams& base,
                                                        std::span<const Update> updates, double momentum_coef,
                                                        double server_lr = 1.0);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
};

/// FedAdam (no bias correction): m = b1 m + (1-b1) g; v = b2 v + (1-b2) g^2;
/// W = W_t - lr * m / (sqrt(v) + eps).
std::pair<ModelParams, AdamState> aggregate_fedadam(const AdamState& prev, const ModelParams& base,
                                                    std::span<const Update> updates, double lr, double beta1,
                                                    double beta2, double eps);

class FedAvgM final : public Aggregator {
 public:
  explicit FedAvgM(double momentum_coef, double server_lr = 1.0) : mu_(momentum_coef), lr_(server_lr) {}
  std::string name() const override { return "fedavgm"; }
  ModelParams aggregate(const ModelParams& base, std::span<const Update> updates) override;
  std::unique_ptr<Aggregator> clone() const override { return std::make_unique<FedAvgM>(*this); }

 private:
  double mu_;
  double lr_;
  MomentumState state_;
};

class FedAdam final : public Aggregator {
 public:
  FedAdam(double lr, double beta1, double beta2, double eps) : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}
  std::string name() const override { return "fedadam"; }
  ModelParams aggregate(const ModelParams& base, std::span<const Update> updates) override;
  std::unique_ptr<Aggregator> clone() const override { return std::make_unique<FedAdam>(*this); }

 private:
  double lr_, b1_, b2_, eps_;
  AdamState state_;
};

/// "fedavg", "fedavgm" or "fedadam" with default hyperparameters.
std::unique_ptr<Aggregator> make_aggregator(const std::string& name);

struct Evaluation {
  double loss = 0;
  double accuracy = 0;
};

/// Mean cross-entropy and argmax accuracy (ties resolve to the lower class).
Evaluation evaluate(const SoftmaxRegression& arch, const ModelParams& model, const Dataset& data);

// Wire format, little-endian:
//   magic "FLMP" | version u16 | kind u8 (0 model, 1 update) |
//   arch_tag (u32 len ‖ bytes) | dim u32 | round u32 | trainer u32 |
//   n_samples u64 | dim x f64
Bytes encode_model(const ModelParams& model, std::uint32_t round, AccountId publisher);
Bytes encode_update(const Update& update, const std::string& arch_tag);

struct DecodedModel {
  ModelParams model;
  std::uint32_t round = 0;
  AccountId publisher;
};

/// Throw MalformedPayload on layout errors.
DecodedModel decode_model(ByteView wire);
Update decode_update(ByteView wire);

}  // namespace fedledger::fl
