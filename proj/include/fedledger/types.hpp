#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fedledger {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

using Seconds = double;
using Gas = std::uint64_t;
using Tokens = std::uint64_t;

using Digest = std::array<std::uint8_t, 32>;
using PublicKeyBytes = std::array<std::uint8_t, 32>;

/// Account identity as trusted by the simulator. Ordering is numeric and is
/// what "ascending account id" means everywhere.
struct AccountId {
  std::uint32_t value = 0;

  auto operator<=>(const AccountId&) const = default;
};

std::string to_string(AccountId id);

/// Content identifier: SHA-256 of the addressed bytes.
struct ContentId {
  Digest digest{};

  static ContentId of(ByteView bytes);
  std::string hex() const;
  auto operator<=>(const ContentId&) const = default;
};

std::string to_hex(ByteView bytes);
Bytes from_hex(std::string_view hex);

inline ByteView view(const Bytes& b) { return {b.data(), b.size()}; }

template <std::size_t N>
ByteView view(const std::array<std::uint8_t, N>& a) {
  return {a.data(), a.size()};
}

}  // namespace fedledger
