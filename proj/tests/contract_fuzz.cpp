#include "contract_fuzz.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "fedledger/allocation.hpp"
#include "fedledger/contract.hpp"
#include "fedledger/crypto.hpp"
#include "fedledger/rng.hpp"

namespace fedledger::fuzz {

namespace {

using contract::ProjectContract;
using contract::ProjectState;
using contract::RoundPhase;

constexpr Seconds kInterval = 5.0;

const std::vector<PublicKeyBytes>& valid_keys() {
  static const auto keys = [] {
    std::vector<PublicKeyBytes> out;
    for (std::uint64_t i = 0; i < 8; ++i) out.push_back(crypto::keygen(0xf00d + i).pk);
    return out;
  }();
  return keys;
}

struct Harness {
  Rng rng;
  std::uint64_t salt;
  ProjectContract c{kInterval};
  AccountId customer{1};
  std::vector<AccountId> trainers;
  std::vector<AccountId> committee;
  std::vector<AccountId> everyone;
  Tokens funded = 0;
  std::uint64_t height = 0;
  std::map<std::pair<std::uint64_t, std::uint32_t>, std::vector<chain::EventDraft>> log;
  FuzzReport* rep;

  Harness(std::uint64_t seed, FuzzReport* r) : rng(seed), salt(seed), rep(r) {
    for (std::uint32_t i = 0; i < 4; ++i) trainers.push_back(AccountId{1000 + i});
    for (std::uint32_t i = 0; i < 3; ++i) committee.push_back(AccountId{100 + i});
    everyone = trainers;
    everyone.insert(everyone.end(), committee.begin(), committee.end());
    everyone.push_back(customer);
    everyone.push_back(AccountId{7});
    for (auto a : everyone) {
      const Tokens amount = a == customer ? 500 : 40;
      c.fund(a, amount);
      funded += amount;
    }
  }

  bool coin(double p) { return uniform01(rng) < p; }
  std::uint64_t pick(std::uint64_t n) { return uniform_index(rng, n); }
  AccountId any() { return everyone[pick(everyone.size())]; }

  chain::BlockContext ctx() const { return {height, height * kInterval}; }

  void record(const chain::EventDraft& ev) { log[{ev.project, ev.round}].push_back(ev); }

  void violation(const std::string& what) {
    ++rep->violation_count;
    if (rep->violations.size() < 10) rep->violations.push_back(what);
  }

  std::uint32_t some_round(const ProjectState& p) {
    if (coin(0.7)) return std::max<std::uint32_t>(1, p.current_round);
    const auto cur = static_cast<std::int64_t>(p.current_round);
    return static_cast<std::uint32_t>(std::max<std::int64_t>(1, cur + static_cast<std::int64_t>(pick(3)) - 1));
  }

  Bytes scores_payload(const ProjectState& p, std::uint32_t round) {
    std::vector<valuation::FixedScore> scores;
    auto it = p.rounds.find(round);
    if (it != p.rounds.end())
      for (const auto& [t, _] : it->second.update_refs)
        scores.push_back({t, static_cast<std::int64_t>(splitmix64(salt ^ (round * 131 + t.value)) % 7'000'000) -
                                 2'000'000});
    return valuation::encode_scores(round, scores);
  }

  ContentId cid(std::uint64_t k) {
    Bytes b(8);
    for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(k >> (8 * i));
    return ContentId::of(b);
  }

  Tokens global_total() const {
    Tokens sum = 0;
    for (auto a : everyone) sum += c.balance(a);
    if (c.has_project(1)) sum += c.project(1).treasury;
    return sum;
  }

  void check_conservation(const std::string& where) {
    if (c.has_project(1)) {
      const auto& p = c.project(1);
      if (p.deposited + p.fees_collected != p.paid_out + p.refunded + p.treasury)
        violation("project ledger unbalanced after " + where);
    }
    if (global_total() != funded) violation("token supply changed after " + where);
  }

  void advance() {
    const auto steps = pick(3);
    for (std::uint64_t i = 0; i < steps; ++i) {
      ++height;
      const auto before_voided = voided_count();
      for (auto& ev : c.on_block(ctx())) record(ev);
      rep->voided += voided_count() - before_voided;
      check_conservation("block");
    }
  }

  std::uint64_t voided_count() const {
    if (!c.has_project(1)) return 0;
    std::uint64_t n = 0;
    for (const auto& [_, r] : c.project(1).rounds) n += r.phase == RoundPhase::Voided;
    return n;
  }

  // Runs one random call; returns its name.
  void step() {
    const ProjectState& p = c.project(1);
    const ProjectContract before = c;
    const std::uint32_t round = some_round(p);
    const auto op = pick(8);
    std::string name;
    bool ok = false;
    AccountId caller = any();
    try {
      switch (op) {
        case 0: {
          name = "register_key";
          const bool bad = coin(0.1);
          PublicKeyBytes pk = bad ? PublicKeyBytes{} : valid_keys()[pick(valid_keys().size())];
          c.register_key(caller, 1, pk);
          ok = true;
          if (bad) violation("invalid key accepted");
          break;
        }
        case 1: {
          name = "join_round";
          if (coin(0.8)) caller = trainers[pick(trainers.size())];
          const Tokens fee = p.required_fee + (coin(0.15) ? 0 : pick(2)) - (coin(0.1) && p.required_fee ? 1 : 0);
          const bool had_key = p.trainers.count(caller) != 0;
          const Tokens req = p.required_fee;
          record(c.join_round(caller, 1, round, fee));
          ok = true;
          if (!had_key || fee < req || caller == customer || before.project(1).is_aggregator(caller))
            violation("unauthorised join accepted");
          break;
        }
        case 2: {
          name = "publish_wrapped_keys";
          if (coin(0.8)) caller = customer;
          std::map<AccountId, Bytes> wrapped;
          auto rit = p.rounds.find(round);
          if (rit != p.rounds.end())
            for (auto t : rit->second.enrolled) wrapped[t] = Bytes(crypto::kWrappedKeyBytes, 0x5a);
          for (auto a : p.aggregators) wrapped[a] = Bytes(crypto::kWrappedKeyBytes, 0xa5);
          if (coin(0.1) && !wrapped.empty()) wrapped.erase(wrapped.begin());
          if (coin(0.05)) wrapped[AccountId{7}] = Bytes(crypto::kWrappedKeyBytes, 1);
          if (coin(0.05) && !wrapped.empty()) wrapped.begin()->second.pop_back();
          record(c.publish_wrapped_keys(caller, 1, round, wrapped, ctx()));
          ok = true;
          if (caller != customer) violation("non-customer published keys");
          break;
        }
        case 3: {
          name = "submit_update_ref";
          if (coin(0.8)) caller = trainers[pick(trainers.size())];
          auto rit = p.rounds.find(round);
          const bool enrolled = rit != p.rounds.end() && rit->second.enrolled.count(caller);
          if (auto ev = c.submit_update_ref(caller, 1, round, cid(pick(4)), ctx())) record(*ev);
          ok = true;
          if (!enrolled) violation("update from non-enrolled account accepted");
          break;
        }
        case 4: {
          name = "publish_global_model";
          if (coin(0.8)) caller = customer;
          const Bytes payload = scores_payload(p, round);
          const Digest d = coin(0.9) ? crypto::sha256(payload) : Digest{};
          const bool committee_mode = p.committee_mode();
          record(c.publish_global_model(caller, 1, round, cid(10 + pick(2)), d));
          ok = true;
          if (caller != customer || committee_mode) violation("unauthorised publication accepted");
          break;
        }
        case 5: {
          name = "endorse";
          if (coin(0.8) && !committee.empty()) caller = committee[pick(committee.size())];
          contract::Endorsement e;
          e.result.model_digest = crypto::sha256(view(Bytes{static_cast<std::uint8_t>(coin(0.25))}));
          const Bytes payload = scores_payload(p, round);
          e.result.contribution_digest = crypto::sha256(payload);
          e.model_cid = cid(20 + caller.value);
          const bool member = p.is_aggregator(caller);
          if (auto cert = c.endorse(caller, 1, round, e)) record(cert->event);
          ok = true;
          if (!member) violation("endorsement from non-member accepted");
          break;
        }
        case 6:
        case 7: {
          name = "submit_contributions";
          if (coin(0.5)) caller = p.committee_mode() ? committee[pick(committee.size())] : customer;
          Bytes payload = scores_payload(p, round);
          if (coin(0.05)) payload.back() ^= 1;
          auto rit = p.rounds.find(round);
          const bool allowed =
              rit != p.rounds.end() &&
              (p.committee_mode()
                   ? std::count(rit->second.certified_providers.begin(), rit->second.certified_providers.end(),
                                caller) > 0
                   : caller == customer);
          c.submit_contributions(caller, 1, round, payload);
          ok = true;
          ++rep->settlements;
          if (!allowed) violation("settlement by unauthorised caller accepted");
          const ProjectContract settled = c;
          try {
            c.submit_contributions(caller, 1, round, payload);
            violation("second settlement accepted");
          } catch (const Error& e) {
            if (e.code() != Errc::AlreadySettled) violation(fmt::format("repeat settlement raised {}", to_string(e.code())));
          }
          if (!(c == settled)) violation("repeat settlement changed state");
          break;
        }
      }
    } catch (const Error&) {
      if (!(c == before)) violation("rejected " + name + " changed state");
    }
    ++rep->calls;
    rep->accepted += ok;
    check_conservation(name);
  }

  void run(std::uint32_t steps) {
    contract::ProjectParams params;
    params.budget = 300;
    params.required_fee = 1 + pick(3);
    params.total_rounds = 1 + static_cast<std::uint32_t>(pick(4));
    params.round_budget = params.budget / params.total_rounds;
    params.deadline_blocks = 2 + static_cast<std::uint32_t>(pick(3));
    if (coin(0.5)) params.committee = committee;
    c.create_project(customer, params, ctx());
    for (std::uint32_t i = 0; i < steps; ++i) {
      step();
      if (coin(0.15)) advance();
    }
    for (const auto& [key, events] : log)
      if (!contract::valid_event_order(events))
        violation(fmt::format("event order broken in round {}", key.second));
  }
};

}  // namespace

FuzzReport fuzz_contract(std::uint64_t seed, std::uint64_t sequences, std::uint32_t steps) {
  FuzzReport rep;
  for (std::uint64_t s = 0; s < sequences; ++s) {
    Harness h(derive_seed(seed, s), &rep);
    h.run(steps);
    ++rep.sequences;
  }
  return rep;
}

}  // namespace fedledger::fuzz
