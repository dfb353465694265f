#include "fedledger/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include <fmt/format.h>

#include "fedledger/bytes.hpp"
#include "fedledger/errors.hpp"

namespace fedledger::sim {

namespace {

constexpr std::uint32_t kCustomerId = 1;
constexpr std::uint32_t kAggregatorBase = 100;
constexpr std::uint32_t kTrainerBase = 1000;

// Stall guard: no round should need more than this many blocks.
constexpr std::uint64_t kMaxBlocksPerRound = 100'000;

using Clock = std::chrono::steady_clock;

// Update envelope: count u32 ‖ count x (recipient u32 ‖ wrapped data key) ‖ ciphertext
Bytes encode_envelope(const std::map<AccountId, crypto::WrappedKey>& wrapped, ByteView ciphertext) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(wrapped.size()));
  for (const auto& [who, blob] : wrapped) w.u32(who.value).raw(blob);
  w.raw(ciphertext);
  return std::move(w).bytes();
}

struct Envelope {
  std::map<AccountId, Bytes> wrapped;
  crypto::Ciphertext ciphertext;
};

Envelope decode_envelope(ByteView bytes) {
  ByteReader r(bytes);
  Envelope e;
  const auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    AccountId who{r.u32()};
    auto blob = r.raw(crypto::kWrappedKeyBytes);
    e.wrapped[who] = Bytes(blob.begin(), blob.end());
  }
  e.ciphertext = crypto::Ciphertext::parse(r.raw(r.remaining()));
  return e;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0;
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0;
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

std::string Mode::label() const { return kind == ExecMode::Owner ? "c." : fmt::format("d.{}", k); }

Mode Mode::parse(std::string_view s) {
  if (s == "owner" || s == "c." || s == "c") return owner();
  std::string_view num;
  if (s.starts_with("committee:"))
    num = s.substr(10);
  else if (s.starts_with("d."))
    num = s.substr(2);
  else
    fail(Errc::ConfigError, "unknown mode '" + std::string(s) + "'");
  std::uint32_t k = 0;
  for (char c : num) {
    if (c < '0' || c > '9' || k > 100000) fail(Errc::ConfigError, "bad committee size in '" + std::string(s) + "'");
    k = k * 10 + static_cast<std::uint32_t>(c - '0');
  }
  if (num.empty() || k == 0) fail(Errc::ConfigError, "committee size must be at least 1");
  return committee(k);
}

void ScenarioConfig::validate() const {
  auto check = [](bool ok, const std::string& what) {
    if (!ok) fail(Errc::ConfigError, what);
  };
  check(n_trainers >= 1, "n_trainers must be at least 1");
  check(n_trainers < kAggregatorBase * 1000, "too many trainers");
  check(rounds >= 1, "rounds must be at least 1");
  check(mode.kind == ExecMode::Owner || mode.k >= 1, "committee size must be at least 1");
  check(mode.k < kTrainerBase - kAggregatorBase, "committee too large");
  check(deadline_blocks >= 1, "deadline_blocks must be at least 1");
  check(round_budget >= 1, "round_budget must be positive");
  if (evaluator == valuation::Method::Shapley)
    check(n_trainers <= valuation::kMaxExactShapleyPlayers, "exact Shapley supports at most 12 trainers");
  for (auto idx : faults.corrupt_aggregators)
    check(mode.kind == ExecMode::Committee && idx < mode.k, "fault targets a committee member that does not exist");
  const double costs[] = {cost.train_per_sample, cost.crypto_per_byte, cost.ecdh_op, cost.aggregate_per_param,
                          cost.evaluate_per_sample_param};
  for (double c : costs) check(c >= 0 && std::isfinite(c), "cost model entries must be non-negative");
  try {
    chain.validate();
    net.validate();
    train.validate();
  } catch (const Error& e) {
    fail(Errc::ConfigError, e.what());
  }
  fl::make_aggregator(aggregator);
}

// ---------------------------------------------------------------------------

struct Simulation::Impl {
  using TxCallback = std::function<void(const chain::TxOutcome&, const Stamp&)>;

  struct Pending {
    Stamp stamp;
    std::uint32_t round = 0;
    TxCallback on_included;
  };

  struct Arrival {
    Stamp stamp;
    Bytes bytes;
  };

  struct ExecResult {
    fl::ModelParams model;
    std::vector<valuation::ContributionScore> scores;
    Bytes score_payload;
    Digest model_digest{};
    ContentId cid;
  };

  struct TrainerState {
    fl::ModelParams model;
    Stamp held;
    std::map<std::uint32_t, crypto::RoundKey> keys;
  };

  struct RoundRun {
    std::uint32_t round = 0;
    std::uint32_t joins = 0;
    Stamp join_stamp;
    std::optional<Stamp> key_stamp;
    std::optional<Stamp> finished_stamp;
    std::map<AccountId, Stamp> ref_stamps;
    std::map<AccountId, std::map<AccountId, Arrival>> arrivals;  // recipient -> trainer
    std::map<AccountId, crypto::RoundKey> executor_keys;
    std::map<AccountId, Stamp> executor_key_stamps;
    std::map<AccountId, fl::Update> updates;
    std::map<AccountId, ExecResult> results;
    fl::ModelParams base;
    fl::ModelParams global;
    std::vector<AccountId> providers;
    std::optional<Stamp> end;
    bool published = false;
    bool settle_done = false;
    bool voided = false;
    Gas gas = 0;
    std::vector<chain::TxId> txs;
  };

  explicit Impl(ScenarioConfig c)
      : cfg((c.validate(), std::move(c))),
        ledger(cfg.chain),
        contract(cfg.chain.block_interval),
        net(cfg.net, derive_seed(cfg.seed, 0x6e6574)),
        arch(cfg.task.n_features, cfg.task.n_classes),
        schedule(derive_seed(cfg.seed, 0x6b6579), cfg.rotate_keys) {
    fl::TaskSpec spec = cfg.task;
    spec.n_trainers = cfg.n_trainers;
    spec.seed = derive_seed(cfg.seed, 0x7461736b);
    spec.first_trainer_id = kTrainerBase;
    task = fl::make_task(spec);
    if (cfg.train.seed == 0) cfg.train.seed = derive_seed(cfg.seed, 0x747261696e);

    customer = AccountId{kCustomerId};
    for (std::uint32_t j = 0; j < cfg.mode.k && cfg.mode.kind == ExecMode::Committee; ++j)
      aggregators.push_back(AccountId{kAggregatorBase + j});
    for (std::uint32_t i = 0; i < cfg.n_trainers; ++i) trainers.push_back(AccountId{kTrainerBase + i});

    for (auto who : all_accounts()) {
      keys[who] = crypto::keygen(derive_seed(cfg.seed, 0x1000000000ULL + who.value));
      net.register_peer(who);
    }
    for (auto e : executors()) plugins[e] = fl::make_aggregator(cfg.aggregator);
    global = arch.initial_model();
    for (auto t : trainers) tstate[t].model = global;
  }

  std::vector<AccountId> all_accounts() const {
    std::vector<AccountId> out{customer};
    out.insert(out.end(), aggregators.begin(), aggregators.end());
    out.insert(out.end(), trainers.begin(), trainers.end());
    return out;
  }

  std::vector<AccountId> executors() const {
    return cfg.mode.kind == ExecMode::Owner ? std::vector<AccountId>{customer} : aggregators;
  }

  bool wall() const { return cfg.timing == Timing::WallClock; }

  template <typename F>
  double timed(double modeled, F&& body) {
    if (!wall()) {
      body();
      return modeled;
    }
    const auto t0 = Clock::now();
    body();
    return std::chrono::duration<double>(Clock::now() - t0).count();
  }

  std::uint64_t wire(std::size_t actual) const { return std::max<std::uint64_t>(actual, cfg.payload_inflation); }

  const crypto::SharedSecret& shared(AccountId self, AccountId peer) {
    auto key = std::make_pair(self, peer);
    auto it = shared_cache.find(key);
    if (it != shared_cache.end()) return it->second;
    return shared_cache.emplace(key, crypto::derive_shared(keys.at(self).sk, keys.at(peer).pk)).first->second;
  }

  const contract::RoundState& round_state(std::uint32_t r) const { return contract.project(project).rounds.at(r); }

  RoundRun& run(std::uint32_t r) {
    auto& rr = runs[r];
    rr.round = r;
    return rr;
  }

  // ---- chain interaction ----

  void submit(AccountId sender, contract::Call call, const Stamp& at, std::uint32_t round, TxCallback cb = {}) {
    queue.push(at.t(), [this, sender, call = std::move(call), at, round, cb = std::move(cb)]() mutable {
      auto tx = ledger.make_tx(sender, contract::encode(call));
      const auto id = tx.id();
      ledger.submit(std::move(tx), at.t());
      pending[id] = Pending{at, round, std::move(cb)};
    });
  }

  void step() {
    const Seconds next_block = ledger.next_block_time();
    if (!queue.empty() && queue.top_time() < next_block) {
      auto [t, action] = queue.pop();
      ledger.advance_to(t, &contract);
      action();
      return;
    }
    produce_block(next_block);
  }

  void produce_block(Seconds when) {
    const std::size_t before = ledger.events().size();
    const auto blocks = ledger.advance_to(when, &contract);
    const auto& block = blocks.back();
    std::size_t tx_events = 0;
    for (const auto& tx : block.txs) {
      const auto* outcome = ledger.outcome(tx.id());
      tx_events += outcome->events.size();
      auto it = pending.find(tx.id());
      if (it == pending.end()) continue;
      Pending p = std::move(it->second);
      pending.erase(it);
      const Stamp s = p.stamp.until(Phase::TransactionExecution, block.timestamp);
      if (p.round > 0) {
        auto& rr = run(p.round);
        rr.gas += tx.gas;
        rr.txs.push_back(tx.id());
      }
      if (p.on_included) p.on_included(*outcome, s);
      for (const auto& ev : outcome->events) on_event(ev, &s, block.timestamp);
    }
    const auto& events = ledger.events();
    for (std::size_t i = before + tx_events; i < events.size(); ++i) on_event(events[i], nullptr, block.timestamp);
    check_voided(block.timestamp);
  }

  // ---- setup ----

  void setup() {
    const Tokens budget = cfg.round_budget * cfg.rounds;
    contract.fund(customer, budget);
    for (auto t : trainers) contract.fund(t, cfg.fee * cfg.rounds);

    contract::ProjectParams params;
    const std::string digest_src =
        fmt::format("{}|{}|{}|{}|{}|{}|{}", arch.initial_model().arch_tag, cfg.train.lr, cfg.train.local_iters,
                    cfg.train.batch_size, cfg.aggregator, cfg.rounds, valuation::to_string(cfg.evaluator));
    params.config_digest = crypto::sha256(ByteView(reinterpret_cast<const std::uint8_t*>(digest_src.data()),
                                                   digest_src.size()));
    params.budget = budget;
    params.required_fee = cfg.fee;
    params.round_budget = cfg.round_budget;
    params.total_rounds = cfg.rounds;
    params.deadline_blocks = cfg.deadline_blocks;
    params.committee = aggregators;

    project = contract.last_project_id() + 1;
    const Stamp zero(ledger.now());
    auto done = [this](const chain::TxOutcome& o, const Stamp& s) {
      if (!o.ok) fail(Errc::RoundAborted, "setup transaction failed: " + o.message);
      setup_stamp = latest(setup_stamp, s);
      if (--setup_outstanding == 0) setup_complete = true;
    };
    setup_outstanding = 1 + all_accounts().size();
    submit(customer, contract::CreateProject{params}, zero, 0, done);
    for (auto who : all_accounts()) submit(who, contract::RegisterKey{project, keys.at(who).pk}, zero, 0, done);

    guard_until([this] { return setup_complete; }, "setup");
    origin = Stamp(setup_stamp.t());
    for (auto t : trainers) tstate[t].held = origin;
    start_round(1, origin);
  }

  void start_round(std::uint32_t r, const Stamp& at) {
    run(r).base = global;
    for (auto t : trainers) submit(t, contract::JoinRound{project, r, cfg.fee}, at, r);
  }

  template <typename Pred>
  void guard_until(Pred done, const char* what) {
    const std::uint64_t limit = ledger.height() + kMaxBlocksPerRound;
    while (!done()) {
      if (ledger.height() > limit) fail(Errc::RoundAborted, fmt::format("simulation stalled during {}", what));
      step();
    }
  }

  // ---- protocol handlers ----

  void on_event(const chain::EventRecord& ev, const Stamp* s, Seconds ts) {
    if (ev.project != project) return;
    auto& rr = run(ev.round);
    switch (ev.kind) {
      case chain::EventKind::KeyRequest:
        rr.join_stamp = rr.joins == 0 ? *s : latest(rr.join_stamp, *s);
        if (++rr.joins == round_state(ev.round).enrolled.size() && rr.joins == trainers.size())
          publish_keys(ev.round, rr.join_stamp);
        break;
      case chain::EventKind::KeyAchieved:
        key_achieved(ev.round, *s);
        break;
      case chain::EventKind::LocalTrainingFinished: {
        Stamp at;
        if (s) {
          at = *s;
        } else {
          bool first = true;
          for (const auto& [who, st] : rr.ref_stamps) {
            at = first ? st : latest(at, st);
            first = false;
          }
          at = at.until(Phase::TransactionExecution, ts);
        }
        training_finished(ev.round, at);
        break;
      }
      case chain::EventKind::GlobalModelUpdated:
        published(ev.round, *s);
        break;
    }
  }

  void publish_keys(std::uint32_t r, const Stamp& at) {
    const auto& rs = round_state(r);
    std::map<AccountId, Bytes> wrapped;
    crypto::RoundKey rk;
    std::vector<AccountId> recipients(rs.enrolled.begin(), rs.enrolled.end());
    recipients.insert(recipients.end(), aggregators.begin(), aggregators.end());
    const double modeled =
        static_cast<double>(recipients.size()) * (cfg.cost.ecdh_op + cfg.cost.crypto_per_byte * crypto::kKeyBytes);
    const double cost = timed(modeled, [&] {
      rk = schedule.next(r);
      for (auto who : recipients)
        wrapped[who] = crypto::wrap_round_key(rk, shared(customer, who), crypto::derive_nonce(r, who, 1));
    });
    run(r).executor_keys[customer] = rk;
    submit(customer, contract::PublishWrappedKeys{project, r, std::move(wrapped)},
           at.advanced(Phase::Cryptography, cost), r);
  }

  void key_achieved(std::uint32_t r, const Stamp& at) {
    auto& rr = run(r);
    rr.key_stamp = at;
    const auto& rs = round_state(r);
    const double unwrap_cost = cfg.cost.ecdh_op + cfg.cost.crypto_per_byte * crypto::kKeyBytes;
    for (const auto& [a, blob] : rs.committee_keys) {
      crypto::RoundKey rk;
      const double cost = timed(unwrap_cost, [&] { rk = crypto::unwrap_round_key(blob, shared(a, customer), r); });
      rr.executor_keys[a] = rk;
      rr.executor_key_stamps[a] = at.advanced(Phase::Cryptography, cost);
    }
    for (const auto& [t, blob] : rs.wrapped_keys) {
      auto& ts = tstate.at(t);
      const double cost =
          timed(unwrap_cost, [&] { ts.keys[r] = crypto::unwrap_round_key(blob, shared(t, customer), r); });
      train(t, r, latest(at.advanced(Phase::Cryptography, cost), ts.held));
    }
  }

  void train(AccountId t, std::uint32_t r, const Stamp& start) {
    auto& ts = tstate.at(t);
    const auto& shard = task.shards.at(t.value - kTrainerBase);
    const double samples = std::min<double>(cfg.train.batch_size, static_cast<double>(shard.data.rows()));
    fl::Update upd;
    const double train_cost = timed(cfg.cost.train_per_sample * samples * cfg.train.local_iters,
                                    [&] { upd = fl::local_train(ts.model, shard, cfg.train, arch, r); });
    run(r).updates[t] = upd;

    const auto recipients = executors();
    Bytes envelope;
    const auto t0 = Clock::now();
    {
      const Bytes plain = fl::encode_update(upd, ts.model.arch_tag);
      Rng rng(derive_seed(cfg.seed, 0x646b0000000000ULL ^ (std::uint64_t{t.value} << 20) ^ r));
      crypto::RoundKey data_key{{}, r, r};
      for (auto& b : data_key.key) b = static_cast<std::uint8_t>(rng());
      const auto ct = crypto::seal(plain, data_key.key, crypto::derive_nonce(r, t, 0));
      std::map<AccountId, crypto::WrappedKey> wrapped;
      for (auto rec : recipients)
        wrapped[rec] = crypto::wrap_round_key(data_key, shared(t, rec), crypto::derive_nonce(r, t, 2));
      envelope = encode_envelope(wrapped, ct.serialize());
    }
    const auto size = wire(envelope.size());
    const double seal_cost = wall() ? std::chrono::duration<double>(Clock::now() - t0).count()
                       : cfg.cost.crypto_per_byte * static_cast<double>(size) +
                             static_cast<double>(recipients.size()) *
                                 (cfg.cost.ecdh_op + cfg.cost.crypto_per_byte * crypto::kKeyBytes);
    const ContentId cid = net.put_fallback(std::move(envelope), size);
    const Stamp sealed =
        start.advanced(Phase::LocalTraining, train_cost).advanced(Phase::Cryptography, seal_cost);

    queue.push(sealed.t(), [this, t, r, cid, sealed, recipients] {
      Stamp last = sealed;
      auto& rr = run(r);
      for (auto rec : recipients) {
        try {
          auto [bytes, receipt] = net.disseminate(t, rec, cid, sealed.t(), cfg.policy);
          Stamp arrived = sealed.until(Phase::DataTransmission, receipt.end);
          last = latest(last, arrived);
          rr.arrivals[rec][t] = Arrival{arrived, std::move(bytes)};
        } catch (const Error& e) {
          if (e.code() != Errc::Unavailable) throw;
        }
      }
      submit(t, contract::SubmitUpdateRef{project, r, cid}, last, r,
             [this, t, r](const chain::TxOutcome& o, const Stamp& s) {
               if (o.ok) run(r).ref_stamps[t] = s;
             });
    });
  }

  void training_finished(std::uint32_t r, const Stamp& at) {
    auto& rr = run(r);
    rr.finished_stamp = at;
    const auto refs = round_state(r).update_refs;
    const AccountId first_trainer = refs.empty() ? AccountId{} : refs.begin()->first;

    std::uint32_t position = 0;
    for (auto e : executors()) {
      const bool faulty = std::find(cfg.faults.corrupt_aggregators.begin(), cfg.faults.corrupt_aggregators.end(),
                                    position++) != cfg.faults.corrupt_aggregators.end() &&
                          cfg.mode.kind == ExecMode::Committee;
      Stamp st = at;
      if (auto it = rr.executor_key_stamps.find(e); it != rr.executor_key_stamps.end()) st = latest(st, it->second);

      // Collect every referenced update, from the direct copy or the store.
      std::vector<std::pair<AccountId, Bytes>> received;
      auto& inbox = rr.arrivals[e];
      for (const auto& [t, cid] : refs) {
        auto it = inbox.find(t);
        if (it != inbox.end()) {
          st = latest(st, it->second.stamp);
          received.emplace_back(t, it->second.bytes);
          continue;
        }
        try {
          auto [bytes, receipt] = net.get_fallback(cid, st.t(), e);
          st = st.until(Phase::DataTransmission, receipt.end);
          received.emplace_back(t, std::move(bytes));
        } catch (const Error& err) {
          if (err.code() != Errc::Unavailable) throw;
        }
      }

      std::vector<fl::Update> accepted;
      double open_modeled = 0;
      const double open_cost = [&] {
        const auto t0 = Clock::now();
        for (auto& [t, bytes] : received) {
          open_modeled += cfg.cost.ecdh_op + cfg.cost.crypto_per_byte * static_cast<double>(wire(bytes.size()));
          try {
            auto env = decode_envelope(bytes);
            if (faulty && t == first_trainer && !env.ciphertext.body.empty()) env.ciphertext.body[0] ^= 0x01;
            auto wk = env.wrapped.find(e);
            if (wk == env.wrapped.end()) continue;
            const auto dk = crypto::unwrap_round_key(wk->second, shared(e, t), r);
            auto upd = fl::decode_update(crypto::open(env.ciphertext, dk.key));
            if (upd.trainer != t || upd.round != r || upd.delta.size() != arch.dim()) continue;
            accepted.push_back(std::move(upd));
          } catch (const Error&) {
            // Undecryptable or malformed updates are excluded.
          }
        }
        return wall() ? std::chrono::duration<double>(Clock::now() - t0).count() : open_modeled;
      }();
      if (accepted.empty()) continue;

      ExecResult res;
      const double dim = static_cast<double>(arch.dim());
      const double n = static_cast<double>(accepted.size());
      const double val_rows = static_cast<double>(task.validation.rows());
      std::uint64_t evals = 0;
      const auto t_agg = Clock::now();
      res.model = plugins.at(e)->aggregate(rr.base, accepted);
      valuation::ModelUtility utility(arch, rr.base, accepted, task.validation, cfg.metric);
      std::vector<AccountId> ids;
      for (const auto& u : accepted) ids.push_back(u.trainer);
      res.scores = valuation::make_evaluator(cfg.evaluator)->evaluate(utility, ids);
      evals = utility.evaluations() + 1;  // plus the base-model evaluation
      const double agg_cost =
          wall() ? std::chrono::duration<double>(Clock::now() - t_agg).count()
                 : cfg.cost.aggregate_per_param * dim * n +
                       static_cast<double>(evals) * (cfg.cost.aggregate_per_param * dim * n +
                                                     cfg.cost.evaluate_per_sample_param * val_rows * dim);

      const auto fixed = valuation::to_fixed(res.scores);
      res.score_payload = valuation::encode_scores(r, fixed);
      const Digest contribution_digest = crypto::sha256(res.score_payload);
      Bytes sealed_model;
      const auto plain = fl::encode_model(res.model, r, customer);
      res.model_digest = crypto::sha256(plain);
      const double seal_cost = timed(cfg.cost.crypto_per_byte * static_cast<double>(wire(plain.size())), [&] {
        sealed_model =
            crypto::seal(plain, rr.executor_keys.at(e).key, crypto::derive_nonce(r, e, 0)).serialize();
      });
      const auto model_wire = wire(sealed_model.size());
      res.cid = net.put_fallback(std::move(sealed_model), model_wire);

      const Stamp done = st.advanced(Phase::Cryptography, open_cost)
                             .advanced(Phase::AggregationEvaluation, agg_cost)
                             .advanced(Phase::Cryptography, seal_cost);
      const ContentId cid = res.cid;
      const Digest model_digest = res.model_digest;
      const Bytes payload = res.score_payload;
      rr.results[e] = std::move(res);

      if (cfg.mode.kind == ExecMode::Owner) {
        submit(e, contract::PublishGlobalModel{project, r, cid, contribution_digest}, done, r);
        submit(e, contract::SubmitContributions{project, r, payload}, done, r,
               [this, r](const chain::TxOutcome&, const Stamp&) { run(r).settle_done = true; });
      } else {
        contract::Endorsement en{{model_digest, contribution_digest}, cid};
        submit(e, contract::Endorse{project, r, en}, done, r);
      }
    }
  }

  void published(std::uint32_t r, const Stamp& at) {
    auto& rr = run(r);
    rr.published = true;
    rr.providers = contract.certified_providers(project, r);
    const auto& rs = round_state(r);
    const auto& certified = rr.results.at(rr.providers.front());
    global = certified.model;
    rr.global = global;

    if (cfg.mode.kind == ExecMode::Committee) {
      const auto lead = rr.providers.front();
      submit(lead, contract::SubmitContributions{project, r, certified.score_payload}, at, r,
             [this, r](const chain::TxOutcome&, const Stamp&) { run(r).settle_done = true; });
    }

    std::optional<Stamp> end;
    bool first_trainer = true;
    for (auto t : trainers) {
      auto& ts = tstate.at(t);
      std::optional<Stamp> held;
      for (auto p : rr.providers) {
        const ContentId cid =
            cfg.mode.kind == ExecMode::Owner ? *rs.global_model_ref : rs.endorsements.at(p).model_cid;
        try {
          auto [bytes, receipt] = net.disseminate(p, t, cid, at.t(), cfg.policy);
          const Stamp arrived = at.until(Phase::DataTransmission, receipt.end);
          fl::ModelParams model;
          bool ok = false;
          const double cost = timed(cfg.cost.crypto_per_byte * static_cast<double>(wire(bytes.size())), [&] {
            try {
              const auto plain = crypto::open(crypto::Ciphertext::parse(bytes), ts.keys.at(r).key);
              if (cfg.mode.kind == ExecMode::Committee && crypto::sha256(plain) != rs.certified_result->model_digest)
                return;
              model = fl::decode_model(plain).model;
              ok = true;
            } catch (const Error&) {
            }
          });
          if (!ok) continue;
          ts.model = std::move(model);
          held = arrived.advanced(Phase::Cryptography, cost);
          break;
        } catch (const Error& e) {
          if (e.code() != Errc::Unavailable) throw;
        }
      }
      if (!held) fail(Errc::RoundAborted, fmt::format("trainer {} could not obtain the round {} model", t.value, r));
      ts.held = *held;
      if (first_trainer) rr.global = ts.model;
      first_trainer = false;
      end = end ? latest(*end, *held) : *held;
    }
    rr.end = end;
    if (r < cfg.rounds) start_round(r + 1, at);
  }

  void check_voided(Seconds ts) {
    for (auto& [r, rr] : runs) {
      if (rr.voided || rr.published || r == 0) continue;
      const auto& p = contract.project(project);
      auto it = p.rounds.find(r);
      if (it == p.rounds.end() || it->second.phase != contract::RoundPhase::Voided) continue;
      rr.voided = true;
      Stamp base = rr.finished_stamp ? *rr.finished_stamp : rr.key_stamp ? *rr.key_stamp : rr.join_stamp;
      const Stamp at = base.until(Phase::TransactionExecution, ts);
      rr.end = at;
      for (auto t : trainers) tstate.at(t).held = latest(tstate.at(t).held, at);
      if (r < cfg.rounds) start_round(r + 1, at);
    }
  }

  bool round_complete(std::uint32_t r) {
    auto it = runs.find(r);
    if (it == runs.end()) return false;
    const auto& rr = it->second;
    return rr.voided || (rr.published && rr.end && rr.settle_done);
  }

  RoundReport run_round() {
    const std::uint32_t r = next_round;
    if (!setup_done) fail(Errc::InvalidParameter, "setup() must run before rounds");
    if (r > cfg.rounds) fail(Errc::InvalidParameter, "all rounds already ran");
    guard_until([&] { return round_complete(r); }, "round");
    ++next_round;

    auto& rr = runs.at(r);
    RoundReport rep;
    rep.round = r;
    rep.start = r == 1 ? origin.t() : reports.back().end;
    rep.end = rr.end->t();
    rep.phases = rr.end->window(rep.start, rep.end);
    rep.gas_total = rr.gas;
    rep.tx_count = static_cast<std::uint32_t>(rr.txs.size());
    rep.txs = rr.txs;
    rep.aborted = rr.voided;
    rep.providers = rr.providers;
    for (const auto& ev : ledger.events())
      if (ev.project == project && ev.round == r) rep.events.push_back(ev);
    const auto& rs = round_state(r);
    rep.allocation = rs.allocation;
    rep.base_model = rr.base;
    rep.global_model = rr.voided ? rr.base : rr.global;
    for (const auto& [t, u] : rr.updates) rep.updates.push_back(u);
    if (!rr.providers.empty()) rep.scores = rr.results.at(rr.providers.front()).scores;
    const auto ev = fl::evaluate(arch, rep.global_model, task.validation);
    rep.accuracy = ev.accuracy;
    rep.loss = ev.loss;
    reports.push_back(rep);
    return rep;
  }

  ScenarioConfig cfg;
  chain::Ledger ledger;
  contract::ProjectContract contract;
  net::DataPlane net;
  fl::Task task;
  fl::SoftmaxRegression arch;
  crypto::RoundKeySchedule schedule;
  contract::ProjectId project = 0;
  AccountId customer;
  std::vector<AccountId> aggregators;
  std::vector<AccountId> trainers;
  std::map<AccountId, crypto::KeyPair> keys;
  std::map<std::pair<AccountId, AccountId>, crypto::SharedSecret> shared_cache;
  std::map<AccountId, std::unique_ptr<fl::Aggregator>> plugins;
  std::map<AccountId, TrainerState> tstate;
  fl::ModelParams global;
  EventQueue queue;
  std::map<chain::TxId, Pending> pending;
  std::map<std::uint32_t, RoundRun> runs;
  std::vector<RoundReport> reports;
  Stamp origin;
  Stamp setup_stamp;
  std::size_t setup_outstanding = 0;
  bool setup_complete = false;
  bool setup_done = false;
  std::uint32_t next_round = 1;
};

Simulation::Simulation(ScenarioConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}
Simulation::~Simulation() = default;

void Simulation::setup() {
  if (impl_->setup_done) fail(Errc::InvalidParameter, "setup already ran");
  impl_->setup();
  impl_->setup_done = true;
}

RoundReport Simulation::run_round() { return impl_->run_round(); }

ExperimentReport Simulation::finish() {
  ExperimentReport out;
  out.config = impl_->cfg;
  out.rounds = impl_->reports;
  out.summary = summarize(out.rounds);
  out.transfers = impl_->net.trace();
  out.events_jsonl = impl_->ledger.events_jsonl();
  out.contract_state = impl_->contract.dump();
  return out;
}

const chain::Ledger& Simulation::ledger() const { return impl_->ledger; }
const contract::ProjectContract& Simulation::contract() const { return impl_->contract; }
const net::DataPlane& Simulation::dataplane() const { return impl_->net; }
const fl::Task& Simulation::task() const { return impl_->task; }
contract::ProjectId Simulation::project_id() const { return impl_->project; }
AccountId Simulation::customer() const { return impl_->customer; }
const std::vector<AccountId>& Simulation::trainers() const { return impl_->trainers; }
const std::vector<AccountId>& Simulation::aggregators() const { return impl_->aggregators; }

ExperimentReport run_scenario(const ScenarioConfig& cfg) {
  Simulation sim(cfg);
  sim.setup();
  for (std::uint32_t r = 0; r < cfg.rounds; ++r) sim.run_round();
  return sim.finish();
}

Summary summarize(const std::vector<RoundReport>& rounds) {
  Summary s;
  std::vector<double> overhead, gas;
  for (const auto& r : rounds) {
    if (r.aborted) {
      ++s.aborted;
      continue;
    }
    overhead.push_back(r.non_training_time());
    gas.push_back(static_cast<double>(r.gas_total));
  }
  s.mean_non_training = mean(overhead);
  s.std_non_training = stddev(overhead);
  s.mean_gas = mean(gas);
  s.std_gas = stddev(gas);
  if (!rounds.empty()) {
    s.final_accuracy = rounds.back().accuracy;
    s.final_loss = rounds.back().loss;
  }
  return s;
}

std::vector<PhaseRow> phase_breakdown(const PhaseTimes& times) {
  std::vector<PhaseRow> rows;
  const Seconds total = times.total();
  for (auto p : kAllPhases) rows.push_back({p, times[p], total > 0 ? 100.0 * times[p] / total : 0.0});
  return rows;
}

std::vector<PhaseRow> phase_breakdown(const RoundReport& report) { return phase_breakdown(report.phases); }

}  // namespace fedledger::sim
