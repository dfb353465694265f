#include "fedledger/crypto.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <cstring>
#include <mutex>
#include <sodium.h>

#include "fedledger/bytes.hpp"
#include "fedledger/errors.hpp"

namespace fedledger::crypto {

namespace {

void ensure_init() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
  });
}

using boost::multiprecision::cpp_int;

cpp_int le_to_int(const PublicKey& pk) {
  cpp_int v = 0;
  for (int i = 31; i >= 0; --i) v = (v << 8) | pk[static_cast<std::size_t>(i)];
  return v;
}

const cpp_int& field_prime() {
  static const cpp_int p = (cpp_int(1) << 255) - 19;
  return p;
}

// Montgomery form of curve25519: v^2 = u^3 + 486662 u^2 + u.
bool on_curve(const cpp_int& u) {
  const auto& p = field_prime();
  cpp_int rhs = (((u * u % p) * u) % p + (486662 * (u * u % p)) % p + u) % p;
  if (rhs == 0) return true;
  cpp_int legendre = boost::multiprecision::powm(rhs, (p - 1) / 2, p);
  return legendre == 1;
}

}  // namespace

Digest sha256(ByteView bytes) {
  ensure_init();
  Digest out{};
  crypto_hash_sha256(out.data(), bytes.data(), bytes.size());
  return out;
}

Bytes Ciphertext::serialize() const {
  Bytes out;
  out.reserve(wire_size());
  out.insert(out.end(), nonce.begin(), nonce.end());
  out.insert(out.end(), body.begin(), body.end());
  out.insert(out.end(), tag.begin(), tag.end());
  return out;
}

Ciphertext Ciphertext::parse(ByteView wire) {
  if (wire.size() < kAeadOverhead) fail(Errc::MalformedPayload, "ciphertext too short");
  Ciphertext ct;
  std::memcpy(ct.nonce.data(), wire.data(), kNonceBytes);
  ct.body.assign(wire.begin() + kNonceBytes, wire.end() - kTagBytes);
  std::memcpy(ct.tag.data(), wire.data() + wire.size() - kTagBytes, kTagBytes);
  return ct;
}

KeyPair keypair_from_secret(const SecretKey& sk) {
  ensure_init();
  KeyPair kp;
  kp.sk = sk;
  crypto_scalarmult_base(kp.pk.data(), kp.sk.data());
  return kp;
}

KeyPair keygen(std::uint64_t seed) {
  ByteWriter w;
  w.str("fedledger/keygen").u64(seed);
  return keypair_from_secret(sha256(w.bytes()));
}

bool is_valid_public_key(const PublicKey& pk) {
  ensure_init();
  const cpp_int u = le_to_int(pk);
  if (u >= field_prime()) return false;
  if (!on_curve(u)) return false;
  // Clamped scalars are multiples of the cofactor, so the product is the
  // identity exactly when the point has small order.
  static const SecretKey probe = [] {
    SecretKey s{};
    s.fill(0x5a);
    return s;
  }();
  std::array<std::uint8_t, 32> out{};
  return crypto_scalarmult(out.data(), probe.data(), pk.data()) == 0;
}

SharedSecret derive_shared(const SecretKey& sk, const PublicKey& pk) {
  ensure_init();
  if (!is_valid_public_key(pk)) fail(Errc::InvalidPoint, "public key is not a valid curve point");
  std::array<std::uint8_t, 32> point{};
  if (crypto_scalarmult(point.data(), sk.data(), pk.data()) != 0)
    fail(Errc::InvalidPoint, "degenerate shared point");
  SharedSecret s;
  s.bytes = sha256(view(point));
  sodium_memzero(point.data(), point.size());
  return s;
}

SharedSecret derive_shared(const SecretKey& sk, ByteView pk_bytes) {
  if (pk_bytes.size() != 32) fail(Errc::InvalidPoint, "public key must be 32 bytes");
  PublicKey pk{};
  std::memcpy(pk.data(), pk_bytes.data(), 32);
  return derive_shared(sk, pk);
}

RoundKey new_round_key(Rng& rng, std::uint32_t round) {
  RoundKey k;
  for (std::size_t i = 0; i < k.key.size(); i += 8) {
    const auto word = rng();
    for (std::size_t b = 0; b < 8; ++b) k.key[i + b] = static_cast<std::uint8_t>(word >> (8 * b));
  }
  k.round = round;
  k.expiry = round;
  return k;
}

RoundKeySchedule::RoundKeySchedule(std::uint64_t seed, bool rotate) : rng_(seed), rotate_(rotate) {}

RoundKey RoundKeySchedule::next(std::uint32_t round) {
  if (rotate_) return new_round_key(rng_, round);
  if (!fixed_) {
    fixed_ = new_round_key(rng_, round);
    fixed_->expiry = UINT32_MAX;
  }
  RoundKey k = *fixed_;
  k.round = round;
  return k;
}

Nonce derive_nonce(std::uint32_t round, AccountId sender, std::uint32_t counter) {
  ByteWriter w;
  w.u32(round).u32(sender.value).u32(counter);
  Nonce n{};
  std::memcpy(n.data(), w.bytes().data(), n.size());
  return n;
}

Ciphertext seal(ByteView plaintext, const SymmetricKey& key, const Nonce& nonce, ByteView ad) {
  ensure_init();
  Ciphertext ct;
  ct.nonce = nonce;
  ct.body.resize(plaintext.size());
  unsigned long long taglen = 0;
  crypto_aead_chacha20poly1305_ietf_encrypt_detached(
      ct.body.data(), ct.tag.data(), &taglen, plaintext.data(), plaintext.size(),
      ad.empty() ? nullptr : ad.data(), ad.size(), nullptr, nonce.data(), key.data());
  return ct;
}

Bytes open(const Ciphertext& ct, const SymmetricKey& key, ByteView ad) {
  ensure_init();
  Bytes out(ct.body.size());
  if (crypto_aead_chacha20poly1305_ietf_decrypt_detached(
          out.data(), nullptr, ct.body.data(), ct.body.size(), ct.tag.data(),
          ad.empty() ? nullptr : ad.data(), ad.size(), ct.nonce.data(), key.data()) != 0) {
    fail(Errc::AuthFailure, "ciphertext failed authentication");
  }
  return out;
}

namespace {
std::array<std::uint8_t, 4> round_ad(std::uint32_t round) {
  return {static_cast<std::uint8_t>(round), static_cast<std::uint8_t>(round >> 8),
          static_cast<std::uint8_t>(round >> 16), static_cast<std::uint8_t>(round >> 24)};
}
}  // namespace

WrappedKey wrap_round_key(const RoundKey& round_key, const SharedSecret& shared, const Nonce& nonce) {
  const auto ad = round_ad(round_key.round);
  return seal(view(round_key.key), shared.bytes, nonce, view(ad)).serialize();
}

RoundKey unwrap_round_key(ByteView wrapped, const SharedSecret& shared, std::uint32_t round) {
  if (wrapped.size() != kWrappedKeyBytes) fail(Errc::AuthFailure, "wrapped key has wrong length");
  const auto ad = round_ad(round);
  auto plain = open(Ciphertext::parse(wrapped), shared.bytes, view(ad));
  RoundKey k;
  std::memcpy(k.key.data(), plain.data(), k.key.size());
  sodium_memzero(plain.data(), plain.size());
  k.round = round;
  k.expiry = round;
  return k;
}

void NonceRegistry::record(const SymmetricKey& key, const Nonce& nonce) {
  ByteWriter w;
  w.raw(view(key)).raw(view(nonce));
  if (!seen_.insert(sha256(w.bytes())).second) fail(Errc::NonceReuse, "nonce reused under key");
}

}  // namespace fedledger::crypto
