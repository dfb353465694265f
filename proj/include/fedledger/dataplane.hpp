#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fedledger/rng.hpp"
#include "fedledger/types.hpp"

namespace fedledger::net {

/// Link model. bandwidth is in bits/second, fallback_throughput in
/// bytes/second.
struct NetworkConfig {
  Seconds rtt = 0.05;
  double bandwidth = 100e6;
  double fallback_throughput = 2.0 * 1024 * 1024;
  double fallback_failure_prob = 0.0;
  double direct_failure_prob = 0.0;
  bool fallback_jitter = false;  // uniform +-20% per attempt
  std::uint32_t fallback_attempts = 3;
  bool anchor_cids = true;

  void validate() const;  // throws InvalidParameter
  bool operator==(const NetworkConfig&) const = default;
};

/// Named throughput profiles for the fallback store: "wan" (default), "can".
NetworkConfig with_fallback_profile(NetworkConfig cfg, std::string_view profile);

enum class Route { Direct, Fallback };
std::string_view to_string(Route r) noexcept;

struct TransferReceipt {
  Route route = Route::Direct;
  AccountId from;
  AccountId to;
  Seconds start = 0;
  Seconds end = 0;
  std::uint64_t bytes = 0;
  std::uint32_t attempts = 0;
  Seconds queued = 0;  // time spent waiting for the sender's uplink

  Seconds duration() const { return end - start; }
  bool operator==(const TransferReceipt&) const = default;
};

enum class Policy { DirectFirst, DirectOnly, FallbackOnly };

/// Direct channels plus a content-addressed fallback store. Each sender has
/// one uplink: consecutive direct sends from the same account serialise on
/// it, while propagation (rtt/2) overlaps.
class DataPlane {
 public:
  DataPlane(NetworkConfig cfg, std::uint64_t seed);

  const NetworkConfig& config() const { return cfg_; }

  void register_peer(AccountId peer) { peers_.insert(peer); }
  bool registered(AccountId peer) const { return peers_.count(peer) != 0; }

  /// end = max(now, uplink free) + rtt/2 + nbytes*8/bandwidth. Throws
  /// LinkFailure (sampled) or NotFound for unregistered peers.
  TransferReceipt send_direct(AccountId from, AccountId to, std::uint64_t nbytes, Seconds now);

  /// Stores bytes; wire_size lets callers charge a larger virtual size.
  ContentId put_fallback(Bytes bytes, std::uint64_t wire_size = 0);
  bool stored(const ContentId& cid) const { return store_.count(cid) != 0; }
  std::uint64_t wire_size(const ContentId& cid) const;

  /// Each attempt lasts size/throughput (times jitter) and fails with
  /// fallback_failure_prob. Throws NotFound or Unavailable.
  std::pair<Bytes, TransferReceipt> get_fallback(const ContentId& cid, Seconds now, AccountId to = {});

  /// Delivers the stored payload cid from -> to under the policy: direct
  /// first, then the fallback store. The receipt's start is now.
  /// Throws Unavailable when every permitted path fails.
  std::pair<Bytes, TransferReceipt> disseminate(AccountId from, AccountId to, const ContentId& cid, Seconds now,
                                                Policy policy = Policy::DirectFirst);

  const std::vector<TransferReceipt>& trace() const { return trace_; }
  /// Header: route,from,to,bytes,start,end,attempts
  std::string trace_csv() const;

 private:
  struct Stored {
    Bytes bytes;
    std::uint64_t wire = 0;
  };

  bool sample(double p);
  std::optional<TransferReceipt> try_direct(AccountId from, AccountId to, std::uint64_t nbytes, Seconds now);
  /// Returns the receipt, or the time at which the last attempt gave up.
  std::pair<std::optional<TransferReceipt>, Seconds> try_fallback(const Stored& s, AccountId to, Seconds now);

  NetworkConfig cfg_;
  Rng rng_;
  std::set<AccountId> peers_;
  std::map<AccountId, Seconds> uplink_free_;
  std::map<ContentId, Stored> store_;
  std::vector<TransferReceipt> trace_;
};

/// Payload framing: CID (32) ‖ ciphertext.
Bytes frame(const ContentId& cid, ByteView ciphertext);
std::pair<ContentId, Bytes> unframe(ByteView framed);  // throws MalformedPayload

}  // namespace fedledger::net
