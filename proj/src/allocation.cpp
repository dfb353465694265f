#include "fedledger/allocation.hpp"

#include <cmath>
#include <set>

#include "fedledger/bytes.hpp"
#include "fedledger/errors.hpp"

namespace fedledger::valuation {

std::int64_t to_fixed(double score) {
  if (!std::isfinite(score)) fail(Errc::InvalidParameter, "score must be finite");
  return std::llround(score * kScoreScale);
}

RewardAllocation allocate(std::span<const FixedScore> scores, Tokens budget, std::uint32_t round) {
  RewardAllocation out;
  out.round = round;
  unsigned __int128 total = 0;
  for (const auto& s : scores) {
    out.payouts[s.trainer] = 0;
    if (s.micro > 0) total += static_cast<unsigned __int128>(s.micro);
  }
  if (total == 0) {
    out.refund = budget;
    return out;
  }
  Tokens paid = 0;
  for (const auto& s : scores) {
    if (s.micro <= 0) continue;
    const auto share = static_cast<unsigned __int128>(budget) * static_cast<unsigned __int128>(s.micro) / total;
    out.payouts[s.trainer] = static_cast<Tokens>(share);
    paid += static_cast<Tokens>(share);
  }
  out.refund = budget - paid;
  return out;
}

Bytes encode_scores(std::uint32_t round, std::span<const FixedScore> scores) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(scores.size()));
  for (const auto& s : scores) w.u64(round).u32(s.trainer.value).i64(s.micro);
  return std::move(w).bytes();
}

DecodedScores decode_scores(ByteView payload) {
  ByteReader r(payload);
  const auto count = r.u32();
  if (r.remaining() != static_cast<std::size_t>(count) * 20) fail(Errc::MalformedPayload, "score list size");
  DecodedScores out;
  std::set<AccountId> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto round = r.u64();
    if (round > UINT32_MAX) fail(Errc::MalformedPayload, "round out of range");
    if (i == 0) out.round = static_cast<std::uint32_t>(round);
    if (round != out.round) fail(Errc::MalformedPayload, "mixed rounds in score list");
    FixedScore s{AccountId{r.u32()}, r.i64()};
    if (!seen.insert(s.trainer).second) fail(Errc::MalformedPayload, "duplicate trainer in score list");
    out.scores.push_back(s);
  }
  return out;
}

}  // namespace fedledger::valuation
