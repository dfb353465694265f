#include <cmath>

#include "fedledger/errors.hpp"
#include "fedledger/fl.hpp"

namespace fedledger::fl {

namespace {

// Weighted mean delta, the FedAvg pseudo-gradient.
std::vector<double> pseudo_gradient(const ModelParams& base, std::span<const Update> updates) {
  if (updates.empty()) fail(Errc::EmptySet, "no updates to aggregate");
  std::vector<std::uint64_t> sizes;
  for (const auto& u : updates) {
    if (u.delta.size() != base.dim()) fail(Errc::DimensionMismatch, "update dimension");
    sizes.push_back(u.n_samples);
  }
  const auto w = fedavg_weights(sizes);
  std::vector<double> g(base.dim(), 0.0);
  for (std::size_t i = 0; i < updates.size(); ++i)
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += w[i] * updates[i].delta[j];
  return g;
}

void resize_state(std::vector<double>& v, std::size_t dim) {
  if (v.empty()) v.assign(dim, 0.0);
  if (v.size() != dim) fail(Errc::DimensionMismatch, "server state dimension");
}

}  // namespace

ModelParams FedAvg::aggregate(const ModelParams& base, std::span<const Update> updates) {
  return aggregate_fedavg(base, updates);
}

std::pair<ModelParams, MomentumState> aggregate_fedavgm(const MomentumState& prev, const ModelParams& base,
                                                        std::span<const Update> updates, double momentum_coef,
                                                        double server_lr) {
  const auto g = pseudo_gradient(base, updates);
  MomentumState next = prev;
  resize_state(next.velocity, base.dim());
  ModelParams out = base;
  for (std::size_t j = 0; j < g.size(); ++j) {
    next.velocity[j] = momentum_coef * next.velocity[j] + g[j];
    out.values[j] = base.values[j] - server_lr * next.velocity[j];
  }
  return {std::move(out), std::move(next)};
}

std::pair<ModelParams, AdamState> aggregate_fedadam(const AdamState& prev, const ModelParams& base,
                                                    std::span<const Update> updates, double lr, double beta1,
                                                    double beta2, double eps) {
  const auto g = pseudo_gradient(base, updates);
  AdamState next = prev;
  resize_state(next.m, base.dim());
  resize_state(next.v, base.dim());
  ModelParams out = base;
  for (std::size_t j = 0; j < g.size(); ++j) {
    next.m[j] = beta1 * next.m[j] + (1.0 - beta1) * g[j];
    next.v[j] = beta2 * next.v[j] + (1.0 - beta2) * g[j] * g[j];
    out.values[j] = base.values[j] - lr * next.m[j] / (std::sqrt(next.v[j]) + eps);
  }
  return {std::move(out), std::move(next)};
}

ModelParams FedAvgM::aggregate(const ModelParams& base, std::span<const Update> updates) {
  auto [model, state] = aggregate_fedavgm(state_, base, updates, mu_, lr_);
  state_ = std::move(state);
  return model;
}

ModelParams FedAdam::aggregate(const ModelParams& base, std::span<const Update> updates) {
  auto [model, state] = aggregate_fedadam(state_, base, updates, lr_, b1_, b2_, eps_);
  state_ = std::move(state);
  return model;
}

std::unique_ptr<Aggregator> make_aggregator(const std::string& name) {
  if (name == "fedavg") return std::make_unique<FedAvg>();
  if (name == "fedavgm") return std::make_unique<FedAvgM>(0.9, 1.0);
  if (name == "fedadam") return std::make_unique<FedAdam>(0.01, 0.9, 0.99, 1e-3);
  fail(Errc::ConfigError, "unknown aggregator '" + name + "'");
}

}  // namespace fedledger::fl
