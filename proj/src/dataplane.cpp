#include "fedledger/dataplane.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fedledger/errors.hpp"

namespace fedledger::net {

void NetworkConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!(rtt >= 0) || !std::isfinite(rtt)) fail(Errc::InvalidParameter, "rtt must be non-negative");
  if (!(bandwidth > 0)) fail(Errc::InvalidParameter, "bandwidth must be positive");
  if (!(fallback_throughput > 0)) fail(Errc::InvalidParameter, "fallback throughput must be positive");
  if (!prob(fallback_failure_prob) || !prob(direct_failure_prob))
    fail(Errc::InvalidParameter, "failure probabilities must lie in [0, 1]");
  if (fallback_attempts == 0) fail(Errc::InvalidParameter, "fallback_attempts must be positive");
}

NetworkConfig with_fallback_profile(NetworkConfig cfg, std::string_view profile) {
  if (profile == "wan")
    cfg.fallback_throughput = 2.0 * 1024 * 1024;
  else if (profile == "can")
    cfg.fallback_throughput = 8.0 * 1024 * 1024;
  else
    fail(Errc::UnknownPreset, "fallback profile " + std::string(profile));
  return cfg;
}

std::string_view to_string(Route r) noexcept { return r == Route::Direct ? "direct" : "fallback"; }

DataPlane::DataPlane(NetworkConfig cfg, std::uint64_t seed) : cfg_(cfg), rng_(derive_seed(seed, 0x6e6574)) {
  cfg_.validate();
}

bool DataPlane::sample(double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return uniform01(rng_) < p;
}

std::optional<TransferReceipt> DataPlane::try_direct(AccountId from, AccountId to, std::uint64_t nbytes,
                                                     Seconds now) {
  if (!registered(from) || !registered(to)) fail(Errc::NotFound, "peer not registered");
  if (sample(cfg_.direct_failure_prob)) return std::nullopt;
  Seconds& free = uplink_free_[from];
  const Seconds tx_start = std::max(now, free);
  const Seconds serial = static_cast<double>(nbytes) * 8.0 / cfg_.bandwidth;
  free = tx_start + serial;
  return TransferReceipt{Route::Direct, from, to, now, tx_start + cfg_.rtt / 2 + serial, nbytes, 1, tx_start - now};
}

TransferReceipt DataPlane::send_direct(AccountId from, AccountId to, std::uint64_t nbytes, Seconds now) {
  auto r = try_direct(from, to, nbytes, now);
  if (!r) fail(Errc::LinkFailure, fmt::format("direct link {} -> {} failed", from.value, to.value));
  trace_.push_back(*r);
  return *r;
}

ContentId DataPlane::put_fallback(Bytes bytes, std::uint64_t wire_size) {
  const auto cid = ContentId::of(bytes);
  const auto wire = std::max<std::uint64_t>(bytes.size(), wire_size);
  auto [it, fresh] = store_.try_emplace(cid);
  if (fresh) it->second.bytes = std::move(bytes);
  it->second.wire = std::max(it->second.wire, wire);
  return cid;
}

std::uint64_t DataPlane::wire_size(const ContentId& cid) const {
  auto it = store_.find(cid);
  if (it == store_.end()) fail(Errc::NotFound, "cid " + cid.hex());
  return it->second.wire;
}

std::pair<std::optional<TransferReceipt>, Seconds> DataPlane::try_fallback(const Stored& s, AccountId to,
                                                                          Seconds now) {
  Seconds t = now;
  for (std::uint32_t attempt = 1; attempt <= cfg_.fallback_attempts; ++attempt) {
    double throughput = cfg_.fallback_throughput;
    if (cfg_.fallback_jitter) throughput *= 0.8 + 0.4 * uniform01(rng_);
    t += static_cast<double>(s.wire) / throughput;
    if (!sample(cfg_.fallback_failure_prob))
      return {TransferReceipt{Route::Fallback, {}, to, now, t, s.wire, attempt, 0}, t};
  }
  return {std::nullopt, t};
}

std::pair<Bytes, TransferReceipt> DataPlane::get_fallback(const ContentId& cid, Seconds now, AccountId to) {
  auto it = store_.find(cid);
  if (it == store_.end()) fail(Errc::NotFound, "cid " + cid.hex());
  auto [receipt, _] = try_fallback(it->second, to, now);
  if (!receipt) fail(Errc::Unavailable, "fallback store exhausted retries for " + cid.hex());
  trace_.push_back(*receipt);
  return {it->second.bytes, *receipt};
}

std::pair<Bytes, TransferReceipt> DataPlane::disseminate(AccountId from, AccountId to, const ContentId& cid,
                                                         Seconds now, Policy policy) {
  auto it = store_.find(cid);
  if (it == store_.end()) fail(Errc::NotFound, "cid " + cid.hex());
  const Stored& s = it->second;
  Seconds t = now;
  std::uint32_t attempts = 0;
  if (policy != Policy::FallbackOnly) {
    ++attempts;
    if (auto r = try_direct(from, to, s.wire, now)) {
      trace_.push_back(*r);
      return {s.bytes, *r};
    }
    t += cfg_.rtt;  // failure detected after one round trip
    if (policy == Policy::DirectOnly) fail(Errc::Unavailable, "direct link failed and fallback disabled");
  }
  auto [r, _] = try_fallback(s, to, t);
  if (!r) fail(Errc::Unavailable, "both paths exhausted for " + cid.hex());
  r->from = from;
  r->start = now;
  r->attempts += attempts;
  trace_.push_back(*r);
  return {s.bytes, *r};
}

std::string DataPlane::trace_csv() const {
  std::string out = "route,from,to,bytes,start,end,attempts\n";
  for (const auto& r : trace_)
    out += fmt::format("{},{},{},{},{:.9f},{:.9f},{}\n", to_string(r.route), r.from.value, r.to.value, r.bytes,
                       r.start, r.end, r.attempts);
  return out;
}

Bytes frame(const ContentId& cid, ByteView ciphertext) {
  Bytes out(cid.digest.begin(), cid.digest.end());
  out.insert(out.end(), ciphertext.begin(), ciphertext.end());
  return out;
}

std::pair<ContentId, Bytes> unframe(ByteView framed) {
  if (framed.size() < 32) fail(Errc::MalformedPayload, "frame shorter than a CID");
  ContentId cid;
  std::copy_n(framed.begin(), 32, cid.digest.begin());
  Bytes body(framed.begin() + 32, framed.end());
  if (ContentId::of(body) != cid) fail(Errc::MalformedPayload, "frame body does not hash to its CID");
  return {cid, std::move(body)};
}

}  // namespace fedledger::net
