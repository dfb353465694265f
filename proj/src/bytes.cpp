#include "fedledger/bytes.hpp"

#include <bit>
#include <sodium.h>

#include "fedledger/errors.hpp"

namespace fedledger {

std::string to_string(AccountId id) { return std::to_string(id.value); }

ContentId ContentId::of(ByteView bytes) {
  ContentId cid;
  crypto_hash_sha256(cid.digest.data(), bytes.data(), bytes.size());
  return cid;
}

std::string ContentId::hex() const { return to_hex(view(digest)); }

std::string to_hex(ByteView bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

namespace {
int nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) fail(Errc::MalformedPayload, "odd-length hex");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = nibble(hex[2 * i]);
    int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) fail(Errc::MalformedPayload, "bad hex digit");
    out[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return out;
}

ByteWriter& ByteWriter::u8(std::uint8_t v) {
  buf_.push_back(v);
  return *this;
}

ByteWriter& ByteWriter::u16(std::uint16_t v) {
  for (int i = 0; i < 2; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  return *this;
}

ByteWriter& ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  return *this;
}

ByteWriter& ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  return *this;
}

ByteWriter& ByteWriter::i64(std::int64_t v) { return u64(static_cast<std::uint64_t>(v)); }

ByteWriter& ByteWriter::f64(double v) { return u64(std::bit_cast<std::uint64_t>(v)); }

ByteWriter& ByteWriter::raw(ByteView bytes) {
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
  return *this;
}

ByteWriter& ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.insert(buf_.end(), s.begin(), s.end());
  return *this;
}

ByteView ByteReader::raw(std::size_t n) {
  if (n > remaining()) fail(Errc::MalformedPayload, "truncated input");
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t ByteReader::u8() { return raw(1)[0]; }

std::uint16_t ByteReader::u16() {
  auto b = raw(2);
  return static_cast<std::uint16_t>(b[0] | b[1] << 8);
}

std::uint32_t ByteReader::u32() {
  auto b = raw(4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = v << 8 | b[i];
  return v;
}

std::uint64_t ByteReader::u64() {
  auto b = raw(8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = v << 8 | b[i];
  return v;
}

std::int64_t ByteReader::i64() { return static_cast<std::int64_t>(u64()); }

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str() {
  auto n = u32();
  auto b = raw(n);
  return {b.begin(), b.end()};
}

void ByteReader::expect_done() const {
  if (!done()) fail(Errc::MalformedPayload, "trailing bytes");
}

}  // namespace fedledger
