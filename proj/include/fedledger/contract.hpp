#pragma once

#include <map>
#include <optional>
#include <set>
#include <variant>
#include <vector>

#include <json.hpp>

#include "fedledger/allocation.hpp"
#include "fedledger/ledger.hpp"

namespace fedledger::contract {

using ProjectId = std::uint64_t;
using chain::BlockContext;
using chain::EventDraft;
using valuation::RewardAllocation;

enum class ProjectStatus { Open, Running, Finished };

/// Joining -> Training (key_achieved) -> Aggregating (local_training_finished)
/// -> Published (global_model_updated). Voided rounds were aborted at a
/// deadline and had their fees refunded.
enum class RoundPhase { Joining, Training, Aggregating, Published, Voided };

std::string_view to_string(ProjectStatus s) noexcept;
std::string_view to_string(RoundPhase p) noexcept;

/// What a committee member commits to: the plaintext model digest and the
/// contribution-list digest. Members match on digest().
struct EndorsementResult {
  Digest model_digest{};
  Digest contribution_digest{};

  Digest digest() const;
  auto operator<=>(const EndorsementResult&) const = default;
};

struct Endorsement {
  EndorsementResult result;
  ContentId model_cid;  // where this member serves its encrypted model
  bool operator==(const Endorsement&) const = default;
};

struct TrainerRecord {
  PublicKeyBytes pubkey{};
  Tokens fee_paid = 0;  // cumulative over rounds
  bool operator==(const TrainerRecord&) const = default;
};

struct RoundState {
  std::uint32_t round = 0;
  RoundPhase phase = RoundPhase::Joining;
  std::set<AccountId> enrolled;
  std::map<AccountId, Tokens> fees;
  std::map<AccountId, Bytes> wrapped_keys;
  std::map<AccountId, Bytes> committee_keys;
  std::map<AccountId, ContentId> update_refs;
  std::optional<ContentId> global_model_ref;
  std::optional<Digest> contribution_digest;
  std::map<AccountId, Endorsement> endorsements;
  std::optional<EndorsementResult> certified_result;
  std::vector<AccountId> certified_providers;
  std::map<AccountId, std::int64_t> contributions;
  std::optional<RewardAllocation> allocation;
  bool settled = false;
  Seconds key_achieved_at = 0;
  Seconds training_finished_at = 0;
  bool operator==(const RoundState&) const = default;
};

struct ProjectParams {
  Digest config_digest{};
  Tokens budget = 0;
  Tokens required_fee = 0;
  Tokens round_budget = 0;  // paid out per settled round; 0 means budget / total_rounds
  std::uint32_t total_rounds = 1;
  std::uint32_t deadline_blocks = 10;
  std::vector<AccountId> committee;  // empty: owner-executed
  bool operator==(const ProjectParams&) const = default;
};

struct ProjectState {
  ProjectId id = 0;
  AccountId customer;
  std::optional<PublicKeyBytes> customer_pubkey;
  std::map<AccountId, TrainerRecord> trainers;
  std::vector<AccountId> aggregators;
  std::map<AccountId, PublicKeyBytes> aggregator_keys;
  Digest config_digest{};
  Tokens required_fee = 0;
  Tokens round_budget = 0;
  std::uint32_t total_rounds = 1;
  std::uint32_t deadline_blocks = 10;
  Tokens treasury = 0;
  std::uint32_t current_round = 1;
  std::map<std::uint32_t, RoundState> rounds;
  ProjectStatus status = ProjectStatus::Open;

  // Conservation ledger: deposited + fees_collected = paid_out + refunded + treasury.
  Tokens deposited = 0;
  Tokens fees_collected = 0;
  Tokens paid_out = 0;
  Tokens refunded = 0;

  bool committee_mode() const { return !aggregators.empty(); }
  bool is_aggregator(AccountId a) const;
  bool operator==(const ProjectState&) const = default;
};

nlohmann::ordered_json to_json(const ProjectState& p);

struct Certification {
  std::vector<AccountId> providers;
  EventDraft event;
};

// ---- call payloads ------------------------------------------------------

struct CreateProject {
  ProjectParams params;
};
struct RegisterKey {
  ProjectId project = 0;
  PublicKeyBytes pubkey{};
};
struct JoinRound {
  ProjectId project = 0;
  std::uint32_t round = 0;
  Tokens fee = 0;
};
struct PublishWrappedKeys {
  ProjectId project = 0;
  std::uint32_t round = 0;
  std::map<AccountId, Bytes> wrapped;
};
struct SubmitUpdateRef {
  ProjectId project = 0;
  std::uint32_t round = 0;
  ContentId cid;
};
struct PublishGlobalModel {
  ProjectId project = 0;
  std::uint32_t round = 0;
  ContentId cid;
  Digest contribution_digest{};
};
struct Endorse {
  ProjectId project = 0;
  std::uint32_t round = 0;
  Endorsement endorsement;
};
struct SubmitContributions {
  ProjectId project = 0;
  std::uint32_t round = 0;
  Bytes scores;  // valuation::encode_scores layout
};

using Call = std::variant<CreateProject, RegisterKey, JoinRound, PublishWrappedKeys, SubmitUpdateRef,
                          PublishGlobalModel, Endorse, SubmitContributions>;

// Call payload layout (little-endian):
//   method u8 | field_count u8 | field_count x (tag u8 | len u32 | bytes)
// Fields appear in ascending tag order; integers are fixed-width so payload
// length, and with it gas, depends only on the number of list entries.
Bytes encode(const Call& call);
/// Throws MalformedPayload.
Call decode(ByteView payload);

/// The training-project contract. Every mutating call validates completely
/// before it writes, so a rejected call leaves the state untouched.
class ProjectContract final : public chain::BlockExecutor {
 public:
  explicit ProjectContract(Seconds block_interval);

  /// Genesis allocation (not a transaction).
  void fund(AccountId account, Tokens amount);
  Tokens balance(AccountId account) const;

  ProjectId create_project(AccountId customer, const ProjectParams& params, const BlockContext& ctx);
  void register_key(AccountId caller, ProjectId project, const PublicKeyBytes& pubkey);
  EventDraft join_round(AccountId trainer, ProjectId project, std::uint32_t round, Tokens fee);
  EventDraft publish_wrapped_keys(AccountId caller, ProjectId project, std::uint32_t round,
                                  const std::map<AccountId, Bytes>& wrapped, const BlockContext& ctx);
  std::optional<EventDraft> submit_update_ref(AccountId trainer, ProjectId project, std::uint32_t round,
                                              const ContentId& cid, const BlockContext& ctx);
  EventDraft publish_global_model(AccountId caller, ProjectId project, std::uint32_t round, const ContentId& cid,
                                  const Digest& contribution_digest);
  std::optional<Certification> endorse(AccountId aggregator, ProjectId project, std::uint32_t round,
                                       const Endorsement& endorsement);
  std::vector<AccountId> certified_providers(ProjectId project, std::uint32_t round) const;
  RewardAllocation submit_contributions(AccountId caller, ProjectId project, std::uint32_t round,
                                        ByteView score_payload);

  /// Deadline processing; runs after the last transaction of every block.
  std::vector<EventDraft> on_block(const BlockContext& ctx);

  // BlockExecutor
  std::vector<EventDraft> execute(const chain::Transaction& tx, const BlockContext& ctx) override;
  std::vector<EventDraft> end_block(const BlockContext& ctx) override { return on_block(ctx); }

  const ProjectState& project(ProjectId id) const;
  bool has_project(ProjectId id) const { return projects_.count(id) != 0; }
  ProjectId last_project_id() const { return next_id_ - 1; }
  Seconds deadline(const ProjectState& p) const;

  /// Full state as JSON (projects and balances).
  nlohmann::ordered_json dump() const;

  bool operator==(const ProjectContract& o) const {
    return block_interval_ == o.block_interval_ && next_id_ == o.next_id_ && projects_ == o.projects_ &&
           balances_ == o.balances_;
  }

 private:
  ProjectState& get(ProjectId id);
  void void_round(ProjectState& p, RoundState& r);
  void open_next_round(ProjectState& p);

  Seconds block_interval_;
  ProjectId next_id_ = 1;
  std::map<ProjectId, ProjectState> projects_;
  std::map<AccountId, Tokens> balances_;
};

/// Checks that the events of one (project, round) follow
/// key_request* -> key_achieved -> local_training_finished -> global_model_updated,
/// allowing a truncated (in-progress or voided) prefix.
bool valid_event_order(std::span<const chain::EventRecord> round_events);
bool valid_event_order(std::span<const chain::EventDraft> round_events);

}  // namespace fedledger::contract
