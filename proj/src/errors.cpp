#include "fedledger/errors.hpp"

namespace fedledger {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::UnknownPreset: return "UnknownPreset";
    case Errc::InvalidParameter: return "InvalidParameter";
    case Errc::NonceGap: return "NonceGap";
    case Errc::PayloadTooLarge: return "PayloadTooLarge";
    case Errc::ClockRegression: return "ClockRegression";
    case Errc::UnknownProject: return "UnknownProject";
    case Errc::MalformedPayload: return "MalformedPayload";
    case Errc::InsufficientDeposit: return "InsufficientDeposit";
    case Errc::Unauthorized: return "Unauthorized";
    case Errc::DuplicateJoin: return "DuplicateJoin";
    case Errc::DuplicateSubmission: return "DuplicateSubmission";
    case Errc::RoundClosed: return "RoundClosed";
    case Errc::NoParticipants: return "NoParticipants";
    case Errc::NotCustomer: return "NotCustomer";
    case Errc::MissingTrainerKey: return "MissingTrainerKey";
    case Errc::NotEnrolled: return "NotEnrolled";
    case Errc::TooEarly: return "TooEarly";
    case Errc::WrongMode: return "WrongMode";
    case Errc::NotCommitteeMember: return "NotCommitteeMember";
    case Errc::AlreadyEndorsed: return "AlreadyEndorsed";
    case Errc::NotCertified: return "NotCertified";
    case Errc::DigestMismatch: return "DigestMismatch";
    case Errc::AlreadySettled: return "AlreadySettled";
    case Errc::InsufficientTreasury: return "InsufficientTreasury";
    case Errc::InvalidPoint: return "InvalidPoint";
    case Errc::AuthFailure: return "AuthFailure";
    case Errc::NonceReuse: return "NonceReuse";
    case Errc::LinkFailure: return "LinkFailure";
    case Errc::NotFound: return "NotFound";
    case Errc::Unavailable: return "Unavailable";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptySet: return "EmptySet";
    case Errc::InvalidPartition: return "InvalidPartition";
    case Errc::TooManyPlayers: return "TooManyPlayers";
    case Errc::RoundAborted: return "RoundAborted";
    case Errc::ConfigError: return "ConfigError";
    case Errc::NoData: return "NoData";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

Error::Error(Errc code) : std::runtime_error(std::string(to_string(code))), code_(code) {}

void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace fedledger
