#pragma once

#include <cstdint>
#include <cstring>
#include <string>

#include "fedledger/types.hpp"

namespace fedledger {

/// Little-endian append-only writer. All wire formats in the project are
/// built with it so layouts are identical on every platform.
class ByteWriter {
 public:
  ByteWriter& u8(std::uint8_t v);
  ByteWriter& u16(std::uint16_t v);
  ByteWriter& u32(std::uint32_t v);
  ByteWriter& u64(std::uint64_t v);
  ByteWriter& i64(std::int64_t v);
  ByteWriter& f64(double v);
  ByteWriter& raw(ByteView bytes);
  ByteWriter& str(std::string_view s);  // u32 length ‖ bytes

  const Bytes& bytes() const& { return buf_; }
  Bytes bytes() && { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }

 private:
  Bytes buf_;
};

/// Bounds-checked reader; any overrun throws MalformedPayload.
class ByteReader {
 public:
  explicit ByteReader(ByteView bytes) : data_(bytes) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64();
  double f64();
  ByteView raw(std::size_t n);
  std::string str();

  template <std::size_t N>
  std::array<std::uint8_t, N> fixed() {
    std::array<std::uint8_t, N> out{};
    auto src = raw(N);
    std::memcpy(out.data(), src.data(), N);
    return out;
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }
  void expect_done() const;

 private:
  ByteView data_;
  std::size_t pos_ = 0;
};

}  // namespace fedledger
