#pragma once

// Information protection: X25519 key agreement, per-round symmetric keys,
// key wrapping and ChaCha20-Poly1305 (IETF) sealing of payloads.
//
// Key derivation: K = SHA-256(X25519(sk, pk)), i.e. the hash of the raw
// shared point. Both sides obtain the same K.
//
// Ciphertext wire layout: nonce (12) ‖ body (len(plaintext)) ‖ tag (16).
// A wrapped round key is a Ciphertext over the 32 key bytes whose associated
// data is the little-endian round index, 60 bytes in total.

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <utility>

#include "fedledger/rng.hpp"
#include "fedledger/types.hpp"

namespace fedledger::crypto {

inline constexpr std::size_t kKeyBytes = 32;
inline constexpr std::size_t kNonceBytes = 12;
inline constexpr std::size_t kTagBytes = 16;
inline constexpr std::size_t kAeadOverhead = kNonceBytes + kTagBytes;
inline constexpr std::size_t kWrappedKeyBytes = kKeyBytes + kAeadOverhead;

using SecretKey = std::array<std::uint8_t, kKeyBytes>;
using PublicKey = PublicKeyBytes;
using SymmetricKey = std::array<std::uint8_t, kKeyBytes>;
using Nonce = std::array<std::uint8_t, kNonceBytes>;
using Tag = std::array<std::uint8_t, kTagBytes>;

struct KeyPair {
  SecretKey sk{};
  PublicKey pk{};
};

struct SharedSecret {
  SymmetricKey bytes{};
  bool operator==(const SharedSecret&) const = default;
};

struct RoundKey {
  SymmetricKey key{};
  std::uint32_t round = 0;
  std::uint32_t expiry = 0;  // last round the key may be used for
  bool operator==(const RoundKey&) const = default;
};

struct Ciphertext {
  Nonce nonce{};
  Bytes body;
  Tag tag{};

  std::size_t wire_size() const { return kAeadOverhead + body.size(); }
  Bytes serialize() const;
  static Ciphertext parse(ByteView wire);  // throws MalformedPayload
  bool operator==(const Ciphertext&) const = default;
};

using WrappedKey = Bytes;

Digest sha256(ByteView bytes);

/// Deterministic under a fixed seed.
KeyPair keygen(std::uint64_t seed);
/// Keypair from an explicit 32-byte secret (clamped by X25519).
KeyPair keypair_from_secret(const SecretKey& sk);

/// A public key is valid when it is a point of the curve (not the twist)
/// of order larger than 8.
bool is_valid_public_key(const PublicKey& pk);

/// Throws InvalidPoint for keys failing is_valid_public_key.
SharedSecret derive_shared(const SecretKey& sk, const PublicKey& pk);
/// Throws InvalidPoint unless bytes is a 32-byte valid key.
SharedSecret derive_shared(const SecretKey& sk, ByteView pk_bytes);

RoundKey new_round_key(Rng& rng, std::uint32_t round);

/// Per-simulation round-key source. With rotation on, every round gets a
/// fresh key; with rotation off the first key is reused for all rounds.
class RoundKeySchedule {
 public:
  RoundKeySchedule(std::uint64_t seed, bool rotate);

  RoundKey next(std::uint32_t round);
  bool rotating() const { return rotate_; }

 private:
  Rng rng_;
  bool rotate_;
  std::optional<RoundKey> fixed_;
};

/// round (4) ‖ sender (4) ‖ counter (4), little-endian.
Nonce derive_nonce(std::uint32_t round, AccountId sender, std::uint32_t counter);

Ciphertext seal(ByteView plaintext, const SymmetricKey& key, const Nonce& nonce, ByteView ad = {});
/// Throws AuthFailure on any modification or wrong key.
Bytes open(const Ciphertext& ct, const SymmetricKey& key, ByteView ad = {});

WrappedKey wrap_round_key(const RoundKey& round_key, const SharedSecret& shared, const Nonce& nonce);
/// Throws AuthFailure (wrong secret, wrong round, or modified blob).
RoundKey unwrap_round_key(ByteView wrapped, const SharedSecret& shared, std::uint32_t round);

/// Tracks (key, nonce) pairs already used for sealing.
class NonceRegistry {
 public:
  /// Throws NonceReuse when the pair was seen before.
  void record(const SymmetricKey& key, const Nonce& nonce);
  std::size_t size() const { return seen_.size(); }

 private:
  std::set<Digest> seen_;
};

}  // namespace fedledger::crypto
