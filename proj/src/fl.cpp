#include "fedledger/fl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedledger/bytes.hpp"
#include "fedledger/errors.hpp"
#include "fedledger/rng.hpp"

namespace fedledger::fl {

void TrainConfig::validate() const {
  if (!(lr > 0) || !std::isfinite(lr)) fail(Errc::InvalidParameter, "lr must be positive");
  if (batch_size < 1) fail(Errc::InvalidParameter, "batch_size must be >= 1");
}

namespace {

void push_sample(Dataset& ds, Rng& rng, const std::vector<double>& centre, std::uint32_t label) {
  for (double c : centre) ds.features.push_back(c + standard_normal(rng));
  ds.labels.push_back(label);
}

}  // namespace

Task make_task(const TaskSpec& spec) {
  if (spec.n_trainers == 0 || spec.samples_per_trainer == 0 || spec.n_features == 0 ||
      spec.validation_samples == 0)
    fail(Errc::InvalidPartition, "all counts must be positive");
  if (spec.n_classes < 2 || spec.n_classes > 10) fail(Errc::InvalidPartition, "2 to 10 classes supported");
  if (!(spec.skew >= 0.0 && spec.skew <= 1.0)) fail(Errc::InvalidPartition, "skew must lie in [0, 1]");

  const std::uint32_t k = spec.n_classes;
  Rng centre_rng(derive_seed(spec.seed, 1));
  std::vector<std::vector<double>> centres(k, std::vector<double>(spec.n_features));
  for (auto& c : centres)
    for (auto& v : c) v = spec.separation * standard_normal(centre_rng);

  Task task;
  task.n_classes = k;
  Rng sample_rng(derive_seed(spec.seed, 2));
  const std::size_t m = spec.samples_per_trainer;

  std::vector<std::uint32_t> labels;
  if (spec.partition == Partition::Iid) {
    labels.resize(m * spec.n_trainers);
    for (std::size_t j = 0; j < labels.size(); ++j) labels[j] = static_cast<std::uint32_t>(j % k);
    Rng perm_rng(derive_seed(spec.seed, 3));
    shuffle(labels.begin(), labels.end(), perm_rng);
  } else {
    Rng label_rng(derive_seed(spec.seed, 4));
    labels.reserve(m * spec.n_trainers);
    for (std::uint32_t i = 0; i < spec.n_trainers; ++i) {
      const std::uint32_t own = i % k;
      for (std::size_t j = 0; j < m; ++j) {
        const bool dominant = uniform01(label_rng) < spec.skew;
        labels.push_back(dominant ? own : static_cast<std::uint32_t>(uniform_index(label_rng, k)));
      }
    }
  }

  task.shards.resize(spec.n_trainers);
  for (std::uint32_t i = 0; i < spec.n_trainers; ++i) {
    Shard& s = task.shards[i];
    s.owner = AccountId{spec.first_trainer_id + i};
    s.data.n_features = spec.n_features;
    s.data.features.reserve(m * spec.n_features);
    for (std::size_t j = 0; j < m; ++j) {
      const auto y = labels[i * m + j];
      push_sample(s.data, sample_rng, centres[y], y);
    }
  }

  Rng val_rng(derive_seed(spec.seed, 5));
  task.validation.n_features = spec.n_features;
  for (std::uint32_t j = 0; j < spec.validation_samples; ++j) {
    const auto y = j % k;
    push_sample(task.validation, val_rng, centres[y], y);
  }
  return task;
}

Dataset pool(std::span<const Shard> shards) {
  Dataset out;
  if (shards.empty()) return out;
  out.n_features = shards.front().data.n_features;
  for (const auto& s : shards) {
    out.features.insert(out.features.end(), s.data.features.begin(), s.data.features.end());
    out.labels.insert(out.labels.end(), s.data.labels.begin(), s.data.labels.end());
  }
  return out;
}

SoftmaxRegression::SoftmaxRegression(std::size_t n_features, std::size_t n_classes)
    : n_features_(n_features), n_classes_(n_classes) {}

ModelParams SoftmaxRegression::initial_model() const {
  ModelParams m;
  m.values.assign(dim(), 0.0);
  m.arch_tag = "softmax-" + std::to_string(n_features_) + "x" + std::to_string(n_classes_);
  return m;
}

void SoftmaxRegression::log_probs(std::span<const double> params, std::span<const double> x,
                                  std::span<double> out) const {
  const double* bias = params.data() + n_classes_ * n_features_;
  double top = -INFINITY;
  for (std::size_t c = 0; c < n_classes_; ++c) {
    const double* w = params.data() + c * n_features_;
    double z = bias[c];
    for (std::size_t f = 0; f < n_features_; ++f) z += w[f] * x[f];
    out[c] = z;
    top = std::max(top, z);
  }
  double sum = 0;
  for (std::size_t c = 0; c < n_classes_; ++c) sum += std::exp(out[c] - top);
  const double lse = top + std::log(sum);
  for (std::size_t c = 0; c < n_classes_; ++c) out[c] -= lse;
}

double SoftmaxRegression::loss_and_gradient(std::span<const double> params, const Dataset& data,
                                            std::span<const std::size_t> rows, std::span<double> grad) const {
  if (params.size() != dim() || grad.size() != dim() || data.n_features != n_features_)
    fail(Errc::DimensionMismatch, "softmax parameter or feature size");
  std::fill(grad.begin(), grad.end(), 0.0);
  if (rows.empty()) return 0.0;
  std::vector<double> lp(n_classes_);
  double loss = 0;
  double* gbias = grad.data() + n_classes_ * n_features_;
  const double scale = 1.0 / static_cast<double>(rows.size());
  for (std::size_t r : rows) {
    auto x = data.row(r);
    const auto y = data.labels[r];
    log_probs(params, x, lp);
    loss -= lp[y];
    for (std::size_t c = 0; c < n_classes_; ++c) {
      const double dz = (std::exp(lp[c]) - (c == y ? 1.0 : 0.0)) * scale;
      double* gw = grad.data() + c * n_features_;
      for (std::size_t f = 0; f < n_features_; ++f) gw[f] += dz * x[f];
      gbias[c] += dz;
    }
  }
  return loss * scale;
}

Update local_train(const ModelParams& model, const Shard& shard, const TrainConfig& cfg,
                   const Objective& objective, std::uint32_t round) {
  cfg.validate();
  if (model.dim() != objective.dim()) fail(Errc::DimensionMismatch, "model does not match objective");
  const std::size_t n = shard.data.rows();
  if (n == 0) fail(Errc::EmptySet, "empty shard");

  Update up;
  up.trainer = shard.owner;
  up.round = round;
  up.n_samples = n;
  // The iterate is tracked as its displacement from W_t, so the local model
  // is by definition W_t - delta and reconstructs bit-exactly.
  up.delta.assign(model.dim(), 0.0);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const bool full_batch = cfg.batch_size >= n;
  Rng rng(derive_seed(cfg.seed, (static_cast<std::uint64_t>(shard.owner.value) << 32) | round));
  if (!full_batch) shuffle(order.begin(), order.end(), rng);

  std::vector<double> current(model.dim());
  std::vector<double> grad(model.dim());
  std::size_t cursor = 0;
  std::vector<std::size_t> batch;
  for (std::uint32_t step = 0; step < cfg.local_iters; ++step) {
    for (std::size_t j = 0; j < current.size(); ++j) current[j] = model.values[j] - up.delta[j];
    if (full_batch) {
      objective.loss_and_gradient(current, shard.data, order, grad);
    } else {
      batch.clear();
      while (batch.size() < cfg.batch_size) {
        if (cursor == n) {
          shuffle(order.begin(), order.end(), rng);
          cursor = 0;
        }
        batch.push_back(order[cursor++]);
      }
      objective.loss_and_gradient(current, shard.data, batch, grad);
    }
    for (std::size_t j = 0; j < grad.size(); ++j) up.delta[j] += cfg.lr * grad[j];
  }
  return up;
}

ModelParams apply_update(const ModelParams& base, const Update& update) {
  if (update.delta.size() != base.dim()) fail(Errc::DimensionMismatch, "update dimension");
  ModelParams out;
  out.arch_tag = base.arch_tag;
  out.values.resize(base.dim());
  for (std::size_t j = 0; j < out.values.size(); ++j) out.values[j] = base.values[j] - update.delta[j];
  return out;
}

std::vector<double> fedavg_weights(std::span<const std::uint64_t> sizes) {
  if (sizes.empty()) fail(Errc::EmptySet, "no participants");
  std::uint64_t total = 0;
  for (auto s : sizes) total += s;
  if (total == 0) fail(Errc::EmptySet, "zero total sample count");
  std::vector<double> w(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i)
    w[i] = static_cast<double>(sizes[i]) / static_cast<double>(total);
  return w;
}

ModelParams aggregate_fedavg(std::span<const ModelParams> models, std::span<const std::uint64_t> sizes) {
  if (models.empty()) fail(Errc::EmptySet, "no models to aggregate");
  if (models.size() != sizes.size()) fail(Errc::DimensionMismatch, "one size per model required");
  const auto dim = models.front().dim();
  for (const auto& m : models)
    if (m.dim() != dim) fail(Errc::DimensionMismatch, "models differ in dimension");
  if (models.size() == 1) return models.front();

  const auto w = fedavg_weights(sizes);
  ModelParams out;
  out.arch_tag = models.front().arch_tag;
  out.values.assign(dim, 0.0);
  for (std::size_t i = 0; i < models.size(); ++i)
    for (std::size_t j = 0; j < dim; ++j) out.values[j] += w[i] * models[i].values[j];
  return out;
}

ModelParams aggregate_fedavg(const ModelParams& base, std::span<const Update> updates) {
  if (updates.empty()) fail(Errc::EmptySet, "no updates to aggregate");
  std::vector<ModelParams> models;
  std::vector<std::uint64_t> sizes;
  models.reserve(updates.size());
  for (const auto& u : updates) {
    models.push_back(apply_update(base, u));
    sizes.push_back(u.n_samples);
  }
  return aggregate_fedavg(models, sizes);
}

Evaluation evaluate(const SoftmaxRegression& arch, const ModelParams& model, const Dataset& data) {
  if (model.dim() != arch.dim() || data.n_features != arch.n_features())
    fail(Errc::DimensionMismatch, "model does not match dataset");
  Evaluation ev;
  if (data.rows() == 0) return ev;
  std::vector<double> lp(arch.n_classes());
  std::size_t correct = 0;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    arch.log_probs(model.values, data.row(r), lp);
    ev.loss -= lp[data.labels[r]];
    const auto best = static_cast<std::uint32_t>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    if (best == data.labels[r]) ++correct;
  }
  ev.loss /= static_cast<double>(data.rows());
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(data.rows());
  return ev;
}

namespace {

constexpr std::uint16_t kWireVersion = 1;

void write_header(ByteWriter& w, std::uint8_t kind, const std::string& arch, std::size_t dim,
                  std::uint32_t round, AccountId who, std::uint64_t n_samples) {
  w.raw(ByteView{reinterpret_cast<const std::uint8_t*>("FLMP"), 4});
  w.u16(kWireVersion).u8(kind).str(arch);
  w.u32(static_cast<std::uint32_t>(dim)).u32(round).u32(who.value).u64(n_samples);
}

struct Header {
  std::uint8_t kind;
  std::string arch;
  std::uint32_t dim, round;
  AccountId who;
  std::uint64_t n_samples;
};

Header read_header(ByteReader& r) {
  auto magic = r.raw(4);
  if (std::string(magic.begin(), magic.end()) != "FLMP") fail(Errc::MalformedPayload, "bad magic");
  if (r.u16() != kWireVersion) fail(Errc::MalformedPayload, "unsupported version");
  Header h;
  h.kind = r.u8();
  h.arch = r.str();
  h.dim = r.u32();
  h.round = r.u32();
  h.who = AccountId{r.u32()};
  h.n_samples = r.u64();
  if (r.remaining() != static_cast<std::size_t>(h.dim) * 8) fail(Errc::MalformedPayload, "payload size");
  return h;
}

}  // namespace

Bytes encode_model(const ModelParams& model, std::uint32_t round, AccountId publisher) {
  ByteWriter w;
  write_header(w, 0, model.arch_tag, model.dim(), round, publisher, 0);
  for (double v : model.values) w.f64(v);
  return std::move(w).bytes();
}

Bytes encode_update(const Update& update, const std::string& arch_tag) {
  ByteWriter w;
  write_header(w, 1, arch_tag, update.delta.size(), update.round, update.trainer, update.n_samples);
  for (double v : update.delta) w.f64(v);
  return std::move(w).bytes();
}

DecodedModel decode_model(ByteView wire) {
  ByteReader r(wire);
  auto h = read_header(r);
  if (h.kind != 0) fail(Errc::MalformedPayload, "not a model payload");
  DecodedModel out;
  out.model.arch_tag = h.arch;
  out.model.values.resize(h.dim);
  for (auto& v : out.model.values) v = r.f64();
  out.round = h.round;
  out.publisher = h.who;
  return out;
}

Update decode_update(ByteView wire) {
  ByteReader r(wire);
  auto h = read_header(r);
  if (h.kind != 1) fail(Errc::MalformedPayload, "not an update payload");
  Update u;
  u.delta.resize(h.dim);
  for (auto& v : u.delta) v = r.f64();
  u.round = h.round;
  u.trainer = h.who;
  u.n_samples = h.n_samples;
  if (u.n_samples == 0) fail(Errc::MalformedPayload, "update with zero samples");
  return u;
}

}  // namespace fedledger::fl
