#include "fedledger/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "fedledger/errors.hpp"

namespace fedledger::cli {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  fail(Errc::ConfigError, fmt::format("'{}': {}", key, what));
}

void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) bad(where, "expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!ok.count(it.key())) bad(where.empty() ? it.key() : where + "." + it.key(), "unknown key");
}

double number(const json& v, const std::string& key) {
  if (!v.is_number()) bad(key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) bad(key, "must be finite");
  return d;
}

std::uint64_t integer(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) bad(key, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

std::uint32_t u32(const json& v, const std::string& key) {
  const auto x = integer(v, key);
  if (x > UINT32_MAX) bad(key, "out of range");
  return static_cast<std::uint32_t>(x);
}

std::string text(const json& v, const std::string& key) {
  if (!v.is_string()) bad(key, "expected a string");
  return v.get<std::string>();
}

bool boolean(const json& v, const std::string& key) {
  if (!v.is_boolean()) bad(key, "expected true or false");
  return v.get<bool>();
}

template <typename T, typename F>
std::vector<T> axis(const json& v, const std::string& key, F&& one) {
  std::vector<T> out;
  if (v.is_array()) {
    if (v.empty()) bad(key, "sweep list must not be empty");
    for (const auto& e : v) out.push_back(one(e, key));
  } else {
    out.push_back(one(v, key));
  }
  return out;
}

template <typename F>
void opt(const json& obj, const char* key, F&& f) {
  if (auto it = obj.find(key); it != obj.end()) f(*it);
}

}  // namespace

ScenarioFile parse_scenario(const json& doc) {
  only_keys(doc, "",
            {"name", "seed", "rounds", "n_trainers", "mode", "chain", "network", "training", "task", "evaluator",
             "metric", "payload_inflation", "timing", "cost", "rotate_keys", "round_budget", "fee",
             "deadline_blocks", "faults", "phase_table"});
  ScenarioFile f;
  auto& b = f.base;
  opt(doc, "name", [&](const json& v) { f.name = text(v, "name"); });
  if (f.name.empty() || f.name.find_first_of("/\\ ") != std::string::npos)
    bad("name", "must be non-empty without spaces or slashes");
  opt(doc, "seed", [&](const json& v) { b.seed = integer(v, "seed"); });
  opt(doc, "rounds", [&](const json& v) { b.rounds = u32(v, "rounds"); });
  opt(doc, "payload_inflation", [&](const json& v) { b.payload_inflation = integer(v, "payload_inflation"); });
  opt(doc, "rotate_keys", [&](const json& v) { b.rotate_keys = boolean(v, "rotate_keys"); });
  opt(doc, "round_budget", [&](const json& v) { b.round_budget = integer(v, "round_budget"); });
  opt(doc, "fee", [&](const json& v) { b.fee = integer(v, "fee"); });
  opt(doc, "deadline_blocks", [&](const json& v) { b.deadline_blocks = u32(v, "deadline_blocks"); });
  opt(doc, "phase_table", [&](const json& v) { f.phase_table = boolean(v, "phase_table"); });
  opt(doc, "evaluator", [&](const json& v) {
    const auto s = text(v, "evaluator");
    if (s == "loo")
      b.evaluator = valuation::Method::Loo;
    else if (s == "shapley")
      b.evaluator = valuation::Method::Shapley;
    else
      bad("evaluator", "expected \"loo\" or \"shapley\"");
  });
  opt(doc, "metric", [&](const json& v) {
    const auto s = text(v, "metric");
    if (s == "neg_loss")
      b.metric = valuation::Metric::NegLoss;
    else if (s == "accuracy")
      b.metric = valuation::Metric::Accuracy;
    else
      bad("metric", "expected \"neg_loss\" or \"accuracy\"");
  });
  opt(doc, "timing", [&](const json& v) {
    const auto s = text(v, "timing");
    if (s == "modeled")
      b.timing = sim::Timing::Modeled;
    else if (s == "wallclock")
      b.timing = sim::Timing::WallClock;
    else
      bad("timing", "expected \"modeled\" or \"wallclock\"");
  });

  f.n_trainers = {b.n_trainers};
  opt(doc, "n_trainers", [&](const json& v) {
    f.n_trainers = axis<std::uint32_t>(v, "n_trainers", [](const json& e, const std::string& k) { return u32(e, k); });
  });
  f.modes = {b.mode};
  opt(doc, "mode", [&](const json& v) {
    f.modes = axis<sim::Mode>(v, "mode", [](const json& e, const std::string& k) {
      try {
        return sim::Mode::parse(text(e, k));
      } catch (const Error& err) {
        bad(k, err.what());
      }
    });
  });

  f.block_intervals = {b.chain.block_interval};
  opt(doc, "chain", [&](const json& c) {
    only_keys(c, "chain", {"preset", "block_interval", "tps", "txs_per_block", "gas_limit", "base_tx_gas", "per_byte_gas"});
    opt(c, "preset", [&](const json& v) {
      f.chain_preset = text(v, "chain.preset");
      try {
        b.chain = chain::configure_chain(*f.chain_preset);
      } catch (const Error& err) {
        bad("chain.preset", err.what());
      }
      f.block_intervals = {b.chain.block_interval};
    });
    if (f.chain_preset && (c.contains("block_interval") || c.contains("tps") || c.contains("txs_per_block")))
      bad("chain", "preset cannot be combined with explicit block parameters");
    if (c.contains("tps") && c.contains("txs_per_block")) bad("chain", "give either tps or txs_per_block");
    opt(c, "block_interval", [&](const json& v) {
      f.block_intervals =
          axis<Seconds>(v, "chain.block_interval", [](const json& e, const std::string& k) { return number(e, k); });
    });
    opt(c, "tps", [&](const json& v) { f.tps = number(v, "chain.tps"); });
    opt(c, "txs_per_block", [&](const json& v) { f.txs_per_block = u32(v, "chain.txs_per_block"); });
    opt(c, "gas_limit", [&](const json& v) { b.chain.gas_limit_per_block = integer(v, "chain.gas_limit"); });
    opt(c, "base_tx_gas", [&](const json& v) { b.chain.base_tx_gas = integer(v, "chain.base_tx_gas"); });
    opt(c, "per_byte_gas", [&](const json& v) { b.chain.per_byte_gas = integer(v, "chain.per_byte_gas"); });
  });
  if (!f.chain_preset && !f.txs_per_block && !f.tps) f.tps = 27.5;
  for (auto bi : f.block_intervals)
    if (!(bi > 0)) bad("chain.block_interval", "must be positive");
  if (f.tps && !(*f.tps > 0)) bad("chain.tps", "must be positive");

  f.rtts = {b.net.rtt};
  opt(doc, "network", [&](const json& n) {
    only_keys(n, "network", {"rtt", "bandwidth", "fallback_throughput", "fallback_profile", "direct_failure_prob",
                             "fallback_failure_prob", "fallback_jitter", "fallback_attempts", "policy", "anchor_cids"});
    if (n.contains("fallback_throughput") && n.contains("fallback_profile"))
      bad("network", "give either fallback_throughput or fallback_profile");
    opt(n, "rtt", [&](const json& v) {
      f.rtts = axis<Seconds>(v, "network.rtt", [](const json& e, const std::string& k) { return number(e, k); });
    });
    opt(n, "bandwidth", [&](const json& v) { b.net.bandwidth = number(v, "network.bandwidth"); });
    opt(n, "fallback_throughput", [&](const json& v) { b.net.fallback_throughput = number(v, "network.fallback_throughput"); });
    opt(n, "fallback_profile", [&](const json& v) {
      try {
        b.net = net::with_fallback_profile(b.net, text(v, "network.fallback_profile"));
      } catch (const Error& err) {
        bad("network.fallback_profile", err.what());
      }
    });
    opt(n, "direct_failure_prob", [&](const json& v) { b.net.direct_failure_prob = number(v, "network.direct_failure_prob"); });
    opt(n, "fallback_failure_prob",
        [&](const json& v) { b.net.fallback_failure_prob = number(v, "network.fallback_failure_prob"); });
    opt(n, "fallback_jitter", [&](const json& v) { b.net.fallback_jitter = boolean(v, "network.fallback_jitter"); });
    opt(n, "fallback_attempts", [&](const json& v) { b.net.fallback_attempts = u32(v, "network.fallback_attempts"); });
    opt(n, "anchor_cids", [&](const json& v) { b.net.anchor_cids = boolean(v, "network.anchor_cids"); });
    opt(n, "policy", [&](const json& v) {
      const auto s = text(v, "network.policy");
      if (s == "direct-first")
        b.policy = net::Policy::DirectFirst;
      else if (s == "direct-only")
        b.policy = net::Policy::DirectOnly;
      else if (s == "fallback-only")
        b.policy = net::Policy::FallbackOnly;
      else
        bad("network.policy", "expected direct-first, direct-only or fallback-only");
    });
  });

  opt(doc, "training", [&](const json& t) {
    only_keys(t, "training", {"lr", "local_iters", "batch_size", "aggregator"});
    opt(t, "lr", [&](const json& v) { b.train.lr = number(v, "training.lr"); });
    opt(t, "local_iters", [&](const json& v) { b.train.local_iters = u32(v, "training.local_iters"); });
    opt(t, "batch_size", [&](const json& v) { b.train.batch_size = u32(v, "training.batch_size"); });
    opt(t, "aggregator", [&](const json& v) { b.aggregator = text(v, "training.aggregator"); });
  });

  opt(doc, "task", [&](const json& t) {
    only_keys(t, "task",
              {"samples_per_trainer", "n_features", "n_classes", "validation_samples", "separation", "partition", "skew"});
    opt(t, "samples_per_trainer", [&](const json& v) { b.task.samples_per_trainer = u32(v, "task.samples_per_trainer"); });
    opt(t, "n_features", [&](const json& v) { b.task.n_features = u32(v, "task.n_features"); });
    opt(t, "n_classes", [&](const json& v) { b.task.n_classes = u32(v, "task.n_classes"); });
    opt(t, "validation_samples", [&](const json& v) { b.task.validation_samples = u32(v, "task.validation_samples"); });
    opt(t, "separation", [&](const json& v) { b.task.separation = number(v, "task.separation"); });
    opt(t, "skew", [&](const json& v) { b.task.skew = number(v, "task.skew"); });
    opt(t, "partition", [&](const json& v) {
      const auto s = text(v, "task.partition");
      if (s == "iid")
        b.task.partition = fl::Partition::Iid;
      else if (s == "label-skew")
        b.task.partition = fl::Partition::LabelSkew;
      else
        bad("task.partition", "expected \"iid\" or \"label-skew\"");
    });
  });

  opt(doc, "cost", [&](const json& c) {
    only_keys(c, "cost", {"train_per_sample", "crypto_per_byte", "ecdh_op", "aggregate_per_param", "evaluate_per_sample_param"});
    opt(c, "train_per_sample", [&](const json& v) { b.cost.train_per_sample = number(v, "cost.train_per_sample"); });
    opt(c, "crypto_per_byte", [&](const json& v) { b.cost.crypto_per_byte = number(v, "cost.crypto_per_byte"); });
    opt(c, "ecdh_op", [&](const json& v) { b.cost.ecdh_op = number(v, "cost.ecdh_op"); });
    opt(c, "aggregate_per_param", [&](const json& v) { b.cost.aggregate_per_param = number(v, "cost.aggregate_per_param"); });
    opt(c, "evaluate_per_sample_param",
        [&](const json& v) { b.cost.evaluate_per_sample_param = number(v, "cost.evaluate_per_sample_param"); });
  });

  opt(doc, "faults", [&](const json& fj) {
    only_keys(fj, "faults", {"corrupt_aggregators"});
    opt(fj, "corrupt_aggregators", [&](const json& v) {
      if (!v.is_array()) bad("faults.corrupt_aggregators", "expected a list");
      for (const auto& e : v) b.faults.corrupt_aggregators.push_back(u32(e, "faults.corrupt_aggregators"));
    });
  });

  try {
    for (const auto& cfg : expand(f)) cfg.validate();
  } catch (const Error& e) {
    if (e.code() == Errc::ConfigError) throw;
    fail(Errc::ConfigError, e.what());
  }
  return f;
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::ConfigError, "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(Errc::ConfigError, fmt::format("{}: {}", path.string(), e.what()));
  }
  return parse_scenario(doc);
}

std::string scenario_id(const std::string& name, const sim::ScenarioConfig& cfg) {
  const std::string mode = cfg.mode.kind == sim::ExecMode::Owner ? "c" : fmt::format("d{}", cfg.mode.k);
  return fmt::format("{}-n{}-{}-b{:g}-rtt{:g}", name, cfg.n_trainers, mode, cfg.chain.block_interval,
                     cfg.net.rtt * 1000.0);
}

std::vector<sim::ScenarioConfig> expand(const ScenarioFile& f) {
  std::vector<sim::ScenarioConfig> out;
  for (auto n : f.n_trainers)
    for (const auto& mode : f.modes)
      for (auto bi : f.block_intervals)
        for (auto rtt : f.rtts) {
          sim::ScenarioConfig c = f.base;
          c.n_trainers = n;
          c.mode = mode;
          if (f.chain_preset) {
            c.chain = chain::configure_chain(*f.chain_preset);
          } else {
            const auto keep = c.chain;
            c.chain = f.txs_per_block ? chain::configure_chain(bi, *f.txs_per_block, keep.gas_limit_per_block,
                                                               keep.base_tx_gas, keep.per_byte_gas)
                                      : chain::chain_from_tps(bi, *f.tps, keep.gas_limit_per_block);
            c.chain.base_tx_gas = keep.base_tx_gas;
            c.chain.per_byte_gas = keep.per_byte_gas;
          }
          c.net.rtt = rtt;
          c.id = scenario_id(f.name, c);
          out.push_back(std::move(c));
        }
  return out;
}

ScenarioFile preset(std::string_view name) {
  ScenarioFile f;
  if (name == "fig4") {
    f.name = "fig4";
    f.base.rounds = 5;
    f.base.seed = 1;
    f.base.evaluator = valuation::Method::Loo;
    f.base.net.bandwidth = 100e6;
    f.base.payload_inflation = static_cast<std::uint64_t>(5.6 * 1024 * 1024);
    f.n_trainers = {10, 20, 50, 100};
    f.modes = {sim::Mode::owner(), sim::Mode::committee(5), sim::Mode::committee(15), sim::Mode::committee(25)};
    f.block_intervals = {5.0, 12.0};
    f.rtts = {0.05, 0.2};
    f.tps = 27.5;
  } else if (name == "table2-lan") {
    f.name = "table2-lan";
    auto& b = f.base;
    b.rounds = 3;
    b.seed = 1;
    b.evaluator = valuation::Method::Shapley;
    b.net.bandwidth = 100e6;
    b.train.batch_size = 32;
    b.train.local_iters = 50;
    b.cost.train_per_sample = 18.0 / (32.0 * 50.0);
    b.payload_inflation = static_cast<std::uint64_t>(5.6 * 1024 * 1024);
    f.n_trainers = {5};
    f.modes = {sim::Mode::owner()};
    f.block_intervals = {5.0};
    f.rtts = {0.001};
    f.tps = 27.5;
    f.phase_table = true;
  } else {
    fail(Errc::UnknownPreset, "unknown preset '" + std::string(name) + "'");
  }
  return f;
}

}  // namespace fedledger::cli
