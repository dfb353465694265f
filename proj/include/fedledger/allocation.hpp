#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "fedledger/types.hpp"

namespace fedledger::valuation {

/// Score in fixed point, micro-units (score * 10^6 rounded to nearest).
struct FixedScore {
  AccountId trainer;
  std::int64_t micro = 0;
  bool operator==(const FixedScore&) const = default;
};

inline constexpr double kScoreScale = 1e6;

std::int64_t to_fixed(double score);

struct RewardAllocation {
  std::uint32_t round = 0;
  std::map<AccountId, Tokens> payouts;
  Tokens refund = 0;
  bool operator==(const RewardAllocation&) const = default;
};

/// Negative scores are clipped to zero. With a positive clipped total each
/// trainer receives floor(budget * clipped_i / total) tokens and the rounding
/// remainder is refunded; otherwise the whole budget is refunded.
RewardAllocation allocate(std::span<const FixedScore> scores, Tokens budget, std::uint32_t round = 0);

// Contribution payload: count u32 ‖ count x (round u64 ‖ trainer u32 ‖ score i64).
// Endorsements and the owner's publication commit to SHA-256 of these bytes.
Bytes encode_scores(std::uint32_t round, std::span<const FixedScore> scores);

struct DecodedScores {
  std::uint32_t round = 0;
  std::vector<FixedScore> scores;
};

/// Throws MalformedPayload (layout, mixed rounds, duplicate trainers).
DecodedScores decode_scores(ByteView payload);

}  // namespace fedledger::valuation
