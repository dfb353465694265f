#include "fedledger/contract.hpp"

#include <algorithm>

#include "fedledger/crypto.hpp"
#include "fedledger/errors.hpp"

namespace fedledger::contract {

namespace {

std::string id_list(const std::vector<AccountId>& ids) {
  std::string out;
  for (const auto& a : ids) {
    if (!out.empty()) out += ',';
    out += to_string(a);
  }
  return out;
}

EventDraft make_event(chain::EventKind kind, const ProjectState& p, std::uint32_t round, AccountId emitter) {
  return {kind, p.id, round, emitter, {}};
}

}  // namespace

std::string_view to_string(ProjectStatus s) noexcept {
  switch (s) {
    case ProjectStatus::Open: return "open";
    case ProjectStatus::Running: return "running";
    case ProjectStatus::Finished: return "finished";
  }
  return "?";
}

std::string_view to_string(RoundPhase p) noexcept {
  switch (p) {
    case RoundPhase::Joining: return "joining";
    case RoundPhase::Training: return "training";
    case RoundPhase::Aggregating: return "aggregating";
    case RoundPhase::Published: return "published";
    case RoundPhase::Voided: return "voided";
  }
  return "?";
}

Digest EndorsementResult::digest() const {
  Bytes buf(model_digest.begin(), model_digest.end());
  buf.insert(buf.end(), contribution_digest.begin(), contribution_digest.end());
  return crypto::sha256(buf);
}

bool ProjectState::is_aggregator(AccountId a) const {
  return std::find(aggregators.begin(), aggregators.end(), a) != aggregators.end();
}

ProjectContract::ProjectContract(Seconds block_interval) : block_interval_(block_interval) {
  if (!(block_interval > 0)) fail(Errc::InvalidParameter, "block interval must be positive");
}

void ProjectContract::fund(AccountId account, Tokens amount) { balances_[account] += amount; }

Tokens ProjectContract::balance(AccountId account) const {
  auto it = balances_.find(account);
  return it == balances_.end() ? 0 : it->second;
}

const ProjectState& ProjectContract::project(ProjectId id) const {
  auto it = projects_.find(id);
  if (it == projects_.end()) fail(Errc::UnknownProject, "project " + std::to_string(id));
  return it->second;
}

ProjectState& ProjectContract::get(ProjectId id) {
  auto it = projects_.find(id);
  if (it == projects_.end()) fail(Errc::UnknownProject, "project " + std::to_string(id));
  return it->second;
}

Seconds ProjectContract::deadline(const ProjectState& p) const { return p.deadline_blocks * block_interval_; }

ProjectId ProjectContract::create_project(AccountId customer, const ProjectParams& params, const BlockContext&) {
  if (params.budget == 0) fail(Errc::InsufficientDeposit, "budget must be positive");
  if (balance(customer) < params.budget) fail(Errc::InsufficientDeposit, "customer balance below budget");
  if (params.total_rounds == 0) fail(Errc::InvalidParameter, "total_rounds must be positive");
  if (params.deadline_blocks == 0) fail(Errc::InvalidParameter, "deadline_blocks must be positive");
  const Tokens round_budget = params.round_budget ? params.round_budget : params.budget / params.total_rounds;
  if (static_cast<unsigned __int128>(round_budget) * params.total_rounds > params.budget)
    fail(Errc::InsufficientDeposit, "round budgets exceed deposit");
  auto committee = params.committee;
  std::sort(committee.begin(), committee.end());
  if (std::adjacent_find(committee.begin(), committee.end()) != committee.end())
    fail(Errc::InvalidParameter, "duplicate committee member");
  if (std::binary_search(committee.begin(), committee.end(), customer))
    fail(Errc::InvalidParameter, "customer cannot sit on the committee");

  ProjectState p;
  p.id = next_id_;
  p.customer = customer;
  p.aggregators = committee;
  p.config_digest = params.config_digest;
  p.required_fee = params.required_fee;
  p.round_budget = round_budget;
  p.total_rounds = params.total_rounds;
  p.deadline_blocks = params.deadline_blocks;
  p.treasury = params.budget;
  p.deposited = params.budget;
  p.rounds[1].round = 1;

  balances_[customer] -= params.budget;
  projects_.emplace(p.id, std::move(p));
  return next_id_++;
}

void ProjectContract::register_key(AccountId caller, ProjectId project, const PublicKeyBytes& pubkey) {
  auto& p = get(project);
  if (p.status == ProjectStatus::Finished) fail(Errc::RoundClosed, "project finished");
  if (!crypto::is_valid_public_key(pubkey)) fail(Errc::InvalidPoint, "public key is not a curve point");
  if (caller == p.customer) {
    if (p.customer_pubkey) fail(Errc::InvalidParameter, "customer key already registered");
    p.customer_pubkey = pubkey;
  } else if (p.is_aggregator(caller)) {
    if (p.aggregator_keys.count(caller)) fail(Errc::InvalidParameter, "aggregator key already registered");
    p.aggregator_keys[caller] = pubkey;
  } else {
    if (p.trainers.count(caller)) fail(Errc::InvalidParameter, "trainer key already registered");
    p.trainers[caller] = TrainerRecord{pubkey, 0};
  }
}

EventDraft ProjectContract::join_round(AccountId trainer, ProjectId project, std::uint32_t round, Tokens fee) {
  auto& p = get(project);
  if (p.status == ProjectStatus::Finished) fail(Errc::RoundClosed, "project finished");
  if (round != p.current_round) fail(Errc::RoundClosed, "round " + std::to_string(round) + " is not current");
  auto& r = p.rounds.at(round);
  if (r.phase != RoundPhase::Joining) fail(Errc::RoundClosed, "round no longer accepts joins");
  auto tr = p.trainers.find(trainer);
  if (tr == p.trainers.end()) fail(Errc::Unauthorized, "no registered trainer key");
  if (fee < p.required_fee) fail(Errc::Unauthorized, "fee below required fee");
  if (balance(trainer) < fee) fail(Errc::Unauthorized, "balance below fee");
  if (r.enrolled.count(trainer)) fail(Errc::DuplicateJoin, "already enrolled");

  balances_[trainer] -= fee;
  p.treasury += fee;
  p.fees_collected += fee;
  tr->second.fee_paid += fee;
  r.enrolled.insert(trainer);
  r.fees[trainer] = fee;
  if (p.status == ProjectStatus::Open) p.status = ProjectStatus::Running;

  auto ev = make_event(chain::EventKind::KeyRequest, p, round, trainer);
  ev.data["trainer"] = to_string(trainer);
  return ev;
}

EventDraft ProjectContract::publish_wrapped_keys(AccountId caller, ProjectId project, std::uint32_t round,
                                                 const std::map<AccountId, Bytes>& wrapped,
                                                 const BlockContext& ctx) {
  auto& p = get(project);
  if (caller != p.customer) fail(Errc::NotCustomer, "only the customer distributes round keys");
  if (p.status == ProjectStatus::Finished || round != p.current_round)
    fail(Errc::RoundClosed, "round " + std::to_string(round) + " is not current");
  auto& r = p.rounds.at(round);
  if (r.phase != RoundPhase::Joining) fail(Errc::RoundClosed, "keys already published");
  if (r.enrolled.empty()) fail(Errc::NoParticipants, "no enrolled trainers");
  for (const auto& t : r.enrolled)
    if (!wrapped.count(t)) fail(Errc::MissingTrainerKey, "no wrapped key for " + to_string(t));
  for (const auto& a : p.aggregators)
    if (!wrapped.count(a)) fail(Errc::MissingTrainerKey, "no wrapped key for committee member " + to_string(a));
  for (const auto& [who, blob] : wrapped) {
    if (!r.enrolled.count(who) && !p.is_aggregator(who))
      fail(Errc::NotEnrolled, to_string(who) + " is neither enrolled nor on the committee");
    if (blob.size() != crypto::kWrappedKeyBytes) fail(Errc::MalformedPayload, "wrapped key length");
  }

  for (const auto& [who, blob] : wrapped) {
    if (r.enrolled.count(who))
      r.wrapped_keys[who] = blob;
    else
      r.committee_keys[who] = blob;
  }
  r.phase = RoundPhase::Training;
  r.key_achieved_at = ctx.timestamp;

  auto ev = make_event(chain::EventKind::KeyAchieved, p, round, caller);
  ev.data["trainers"] = std::to_string(r.wrapped_keys.size());
  return ev;
}

std::optional<EventDraft> ProjectContract::submit_update_ref(AccountId trainer, ProjectId project,
                                                             std::uint32_t round, const ContentId& cid,
                                                             const BlockContext& ctx) {
  auto& p = get(project);
  auto rit = p.rounds.find(round);
  if (rit == p.rounds.end()) fail(Errc::RoundClosed, "unknown round");
  auto& r = rit->second;
  if (!r.enrolled.count(trainer)) fail(Errc::NotEnrolled, to_string(trainer) + " not enrolled");
  if (r.phase == RoundPhase::Joining) fail(Errc::TooEarly, "key not yet achieved");
  if (r.phase != RoundPhase::Training) fail(Errc::RoundClosed, "training phase is over");
  if (r.update_refs.count(trainer)) fail(Errc::DuplicateSubmission, "update already submitted");

  r.update_refs[trainer] = cid;
  if (r.update_refs.size() < r.enrolled.size()) return std::nullopt;
  r.phase = RoundPhase::Aggregating;
  r.training_finished_at = ctx.timestamp;
  auto ev = make_event(chain::EventKind::LocalTrainingFinished, p, round, trainer);
  ev.data["submissions"] = std::to_string(r.update_refs.size());
  return ev;
}

EventDraft ProjectContract::publish_global_model(AccountId caller, ProjectId project, std::uint32_t round,
                                                 const ContentId& cid, const Digest& contribution_digest) {
  auto& p = get(project);
  if (caller != p.customer) fail(Errc::NotCustomer, "only the customer publishes in owner mode");
  if (p.committee_mode()) fail(Errc::WrongMode, "committee projects certify by endorsement");
  if (p.status == ProjectStatus::Finished || round != p.current_round)
    fail(Errc::RoundClosed, "round " + std::to_string(round) + " is not current");
  auto& r = p.rounds.at(round);
  if (r.phase == RoundPhase::Joining || r.phase == RoundPhase::Training)
    fail(Errc::TooEarly, "local training not finished");

  r.global_model_ref = cid;
  r.contribution_digest = contribution_digest;
  r.certified_providers = {p.customer};
  r.phase = RoundPhase::Published;

  auto ev = make_event(chain::EventKind::GlobalModelUpdated, p, round, caller);
  ev.data["cid"] = cid.hex();
  ev.data["providers"] = to_string(p.customer);
  open_next_round(p);
  return ev;
}

std::optional<Certification> ProjectContract::endorse(AccountId aggregator, ProjectId project, std::uint32_t round,
                                                      const Endorsement& endorsement) {
  auto& p = get(project);
  if (!p.committee_mode()) fail(Errc::WrongMode, "owner-executed project has no committee");
  if (!p.is_aggregator(aggregator)) fail(Errc::NotCommitteeMember, to_string(aggregator));
  auto rit = p.rounds.find(round);
  if (rit == p.rounds.end()) fail(Errc::RoundClosed, "unknown round");
  auto& r = rit->second;
  if (r.phase == RoundPhase::Joining || r.phase == RoundPhase::Training)
    fail(Errc::TooEarly, "local training not finished");
  if (r.phase == RoundPhase::Voided) fail(Errc::RoundClosed, "round voided");
  if (r.endorsements.count(aggregator)) fail(Errc::AlreadyEndorsed, to_string(aggregator));

  r.endorsements[aggregator] = endorsement;

  if (r.phase == RoundPhase::Published) {
    // Late endorsers of the adopted result also become providers.
    if (r.certified_result && endorsement.result == *r.certified_result) {
      r.certified_providers.push_back(aggregator);
      std::sort(r.certified_providers.begin(), r.certified_providers.end());
    }
    return std::nullopt;
  }

  const Digest d = endorsement.result.digest();
  std::vector<AccountId> matching;
  for (const auto& [who, e] : r.endorsements)
    if (e.result.digest() == d) matching.push_back(who);
  if (2 * matching.size() <= p.aggregators.size()) return std::nullopt;

  r.certified_result = endorsement.result;
  r.certified_providers = matching;  // map iteration order is ascending
  r.global_model_ref = r.endorsements.at(matching.front()).model_cid;
  r.contribution_digest = endorsement.result.contribution_digest;
  r.phase = RoundPhase::Published;

  Certification c;
  c.providers = matching;
  c.event = make_event(chain::EventKind::GlobalModelUpdated, p, round, aggregator);
  c.event.data["model_digest"] = to_hex(view(endorsement.result.model_digest));
  c.event.data["providers"] = id_list(matching);
  open_next_round(p);
  return c;
}

std::vector<AccountId> ProjectContract::certified_providers(ProjectId project, std::uint32_t round) const {
  const auto& p = this->project(project);
  auto rit = p.rounds.find(round);
  if (rit == p.rounds.end() || rit->second.certified_providers.empty())
    fail(Errc::NotCertified, "round " + std::to_string(round) + " not certified");
  return rit->second.certified_providers;
}

RewardAllocation ProjectContract::submit_contributions(AccountId caller, ProjectId project, std::uint32_t round,
                                                       ByteView score_payload) {
  auto& p = get(project);
  auto rit = p.rounds.find(round);
  if (rit == p.rounds.end() || rit->second.phase != RoundPhase::Published)
    fail(Errc::NotCertified, "round " + std::to_string(round) + " has no certified result");
  auto& r = rit->second;
  if (!p.committee_mode()) {
    if (caller != p.customer) fail(Errc::NotCustomer, "only the customer settles in owner mode");
  } else if (std::find(r.certified_providers.begin(), r.certified_providers.end(), caller) ==
             r.certified_providers.end()) {
    fail(Errc::Unauthorized, to_string(caller) + " is not a certified provider");
  }
  if (r.settled) fail(Errc::AlreadySettled, "round " + std::to_string(round));
  if (!r.contribution_digest || crypto::sha256(score_payload) != *r.contribution_digest)
    fail(Errc::DigestMismatch, "score list does not match the certified digest");
  const auto decoded = valuation::decode_scores(score_payload);
  if (decoded.round != round) fail(Errc::MalformedPayload, "score list is for another round");
  if (decoded.scores.size() != r.update_refs.size()) fail(Errc::MalformedPayload, "score list size");
  for (const auto& s : decoded.scores)
    if (!r.update_refs.count(s.trainer)) fail(Errc::MalformedPayload, to_string(s.trainer) + " has no update");
  if (p.treasury < p.round_budget) fail(Errc::InsufficientTreasury, "treasury below round budget");

  auto alloc = valuation::allocate(std::span<const valuation::FixedScore>(decoded.scores), p.round_budget, round);
  for (const auto& [who, amount] : alloc.payouts) balances_[who] += amount;
  balances_[p.customer] += alloc.refund;
  p.treasury -= p.round_budget;
  p.paid_out += p.round_budget - alloc.refund;
  p.refunded += alloc.refund;
  for (const auto& s : decoded.scores) r.contributions[s.trainer] = s.micro;
  r.allocation = alloc;
  r.settled = true;
  return alloc;
}

void ProjectContract::void_round(ProjectState& p, RoundState& r) {
  for (const auto& [who, fee] : r.fees) {
    balances_[who] += fee;
    p.treasury -= fee;
    p.refunded += fee;
  }
  r.phase = RoundPhase::Voided;
  open_next_round(p);
}

void ProjectContract::open_next_round(ProjectState& p) {
  if (p.current_round >= p.total_rounds) {
    p.status = ProjectStatus::Finished;
    return;
  }
  ++p.current_round;
  p.rounds[p.current_round].round = p.current_round;
}

std::vector<EventDraft> ProjectContract::on_block(const BlockContext& ctx) {
  std::vector<EventDraft> out;
  for (auto& [id, p] : projects_) {
    if (p.status == ProjectStatus::Finished) continue;
    auto& r = p.rounds.at(p.current_round);
    const Seconds limit = deadline(p);
    if (r.phase == RoundPhase::Training && ctx.timestamp >= r.key_achieved_at + limit) {
      if (r.update_refs.empty()) {
        void_round(p, r);
        continue;
      }
      r.phase = RoundPhase::Aggregating;
      r.training_finished_at = ctx.timestamp;
      auto ev = make_event(chain::EventKind::LocalTrainingFinished, p, r.round, p.customer);
      ev.data["submissions"] = std::to_string(r.update_refs.size());
      ev.data["deadline"] = "1";
      out.push_back(std::move(ev));
    } else if (r.phase == RoundPhase::Aggregating && ctx.timestamp >= r.training_finished_at + limit) {
      void_round(p, r);
    }
  }
  return out;
}

std::vector<EventDraft> ProjectContract::execute(const chain::Transaction& tx, const BlockContext& ctx) {
  const Call call = decode(tx.payload);
  const AccountId who = tx.sender;
  return std::visit(
      [&](const auto& c) -> std::vector<EventDraft> {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, CreateProject>) {
          create_project(who, c.params, ctx);
          return {};
        } else if constexpr (std::is_same_v<T, RegisterKey>) {
          register_key(who, c.project, c.pubkey);
          return {};
        } else if constexpr (std::is_same_v<T, JoinRound>) {
          return {join_round(who, c.project, c.round, c.fee)};
        } else if constexpr (std::is_same_v<T, PublishWrappedKeys>) {
          return {publish_wrapped_keys(who, c.project, c.round, c.wrapped, ctx)};
        } else if constexpr (std::is_same_v<T, SubmitUpdateRef>) {
          auto ev = submit_update_ref(who, c.project, c.round, c.cid, ctx);
          if (ev) return {*ev};
          return {};
        } else if constexpr (std::is_same_v<T, PublishGlobalModel>) {
          return {publish_global_model(who, c.project, c.round, c.cid, c.contribution_digest)};
        } else if constexpr (std::is_same_v<T, Endorse>) {
          auto cert = endorse(who, c.project, c.round, c.endorsement);
          if (cert) return {cert->event};
          return {};
        } else {
          submit_contributions(who, c.project, c.round, view(c.scores));
          return {};
        }
      },
      call);
}

namespace {

nlohmann::ordered_json ids_json(const std::vector<AccountId>& ids) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& a : ids) arr.push_back(a.value);
  return arr;
}

}  // namespace

nlohmann::ordered_json to_json(const ProjectState& p) {
  nlohmann::ordered_json j;
  j["project_id"] = p.id;
  j["customer"] = p.customer.value;
  j["customer_pubkey"] = p.customer_pubkey ? to_hex(view(*p.customer_pubkey)) : "";
  auto trainers = nlohmann::ordered_json::object();
  for (const auto& [id, t] : p.trainers)
    trainers[to_string(id)] = {{"pubkey", to_hex(view(t.pubkey))}, {"fee_paid", t.fee_paid}};
  j["trainers"] = trainers;
  j["aggregators"] = ids_json(p.aggregators);
  j["config_digest"] = to_hex(view(p.config_digest));
  j["required_fee"] = p.required_fee;
  j["round_budget"] = p.round_budget;
  j["total_rounds"] = p.total_rounds;
  j["deadline_blocks"] = p.deadline_blocks;
  j["treasury"] = p.treasury;
  j["deposited"] = p.deposited;
  j["fees_collected"] = p.fees_collected;
  j["paid_out"] = p.paid_out;
  j["refunded"] = p.refunded;
  j["status"] = to_string(p.status);
  j["current_round"] = p.current_round;
  auto rounds = nlohmann::ordered_json::array();
  for (const auto& [idx, r] : p.rounds) {
    nlohmann::ordered_json jr;
    jr["round"] = idx;
    jr["phase"] = to_string(r.phase);
    jr["enrolled"] = ids_json({r.enrolled.begin(), r.enrolled.end()});
    auto refs = nlohmann::ordered_json::object();
    for (const auto& [who, cid] : r.update_refs) refs[to_string(who)] = cid.hex();
    jr["update_refs"] = refs;
    jr["wrapped_keys"] = r.wrapped_keys.size();
    jr["global_model_ref"] = r.global_model_ref ? r.global_model_ref->hex() : "";
    auto ends = nlohmann::ordered_json::object();
    for (const auto& [who, e] : r.endorsements) ends[to_string(who)] = to_hex(view(e.result.digest()));
    jr["endorsements"] = ends;
    jr["certified_providers"] = ids_json(r.certified_providers);
    auto contrib = nlohmann::ordered_json::object();
    for (const auto& [who, micro] : r.contributions) contrib[to_string(who)] = micro;
    jr["contributions"] = contrib;
    if (r.allocation) {
      auto pay = nlohmann::ordered_json::object();
      for (const auto& [who, amount] : r.allocation->payouts) pay[to_string(who)] = amount;
      jr["payouts"] = pay;
      jr["refund"] = r.allocation->refund;
    }
    jr["settled"] = r.settled;
    rounds.push_back(std::move(jr));
  }
  j["rounds"] = rounds;
  return j;
}

nlohmann::ordered_json ProjectContract::dump() const {
  nlohmann::ordered_json j;
  auto projects = nlohmann::ordered_json::array();
  for (const auto& [id, p] : projects_) projects.push_back(to_json(p));
  j["projects"] = projects;
  auto bal = nlohmann::ordered_json::object();
  for (const auto& [who, amount] : balances_) bal[to_string(who)] = amount;
  j["balances"] = bal;
  return j;
}

namespace {

template <typename Ev>
bool check_order(std::span<const Ev> events) {
  using chain::EventKind;
  int stage = 0;  // 0 joining, 1 key achieved, 2 training finished, 3 published
  for (const auto& e : events) {
    switch (e.kind) {
      case EventKind::KeyRequest:
        if (stage != 0) return false;
        break;
      case EventKind::KeyAchieved:
        if (stage != 0) return false;
        stage = 1;
        break;
      case EventKind::LocalTrainingFinished:
        if (stage != 1) return false;
        stage = 2;
        break;
      case EventKind::GlobalModelUpdated:
        if (stage != 2) return false;
        stage = 3;
        break;
    }
  }
  return true;
}

}  // namespace

bool valid_event_order(std::span<const chain::EventRecord> round_events) { return check_order(round_events); }
bool valid_event_order(std::span<const chain::EventDraft> round_events) { return check_order(round_events); }

}  // namespace fedledger::contract
