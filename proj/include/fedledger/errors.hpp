#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fedledger {

/// Every failure the library reports carries one of these codes. Callers
/// (tests, the contract fuzzer, the CLI) branch on the code, never on text.
enum class Errc {
  // chain
  UnknownPreset,
  InvalidParameter,
  NonceGap,
  PayloadTooLarge,
  ClockRegression,
  // contract
  UnknownProject,
  MalformedPayload,
  InsufficientDeposit,
  Unauthorized,
  DuplicateJoin,
  DuplicateSubmission,
  RoundClosed,
  NoParticipants,
  NotCustomer,
  MissingTrainerKey,
  NotEnrolled,
  TooEarly,
  WrongMode,
  NotCommitteeMember,
  AlreadyEndorsed,
  NotCertified,
  DigestMismatch,
  AlreadySettled,
  InsufficientTreasury,
  // crypto
  InvalidPoint,
  AuthFailure,
  NonceReuse,
  // data plane
  LinkFailure,
  NotFound,
  Unavailable,
  // learning / valuation
  DimensionMismatch,
  EmptySet,
  InvalidPartition,
  TooManyPlayers,
  // orchestration / cli
  RoundAborted,
  ConfigError,
  NoData,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);
  explicit Error(Errc code);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& what);

}  // namespace fedledger
