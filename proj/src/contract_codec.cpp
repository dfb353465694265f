#include <algorithm>

#include "fedledger/bytes.hpp"
#include "fedledger/contract.hpp"
#include "fedledger/errors.hpp"

namespace fedledger::contract {

namespace {

class FieldWriter {
 public:
  explicit FieldWriter(std::uint8_t method) : method_(method) {}

  FieldWriter& field(std::uint8_t tag, ByteView bytes) {
    body_.u8(tag).u32(static_cast<std::uint32_t>(bytes.size())).raw(bytes);
    ++count_;
    return *this;
  }
  FieldWriter& u32(std::uint8_t tag, std::uint32_t v) { return field(tag, ByteWriter().u32(v).bytes()); }
  FieldWriter& u64(std::uint8_t tag, std::uint64_t v) { return field(tag, ByteWriter().u64(v).bytes()); }
  FieldWriter& digest(std::uint8_t tag, const Digest& d) { return field(tag, view(d)); }

  Bytes finish() {
    ByteWriter out;
    out.u8(method_).u8(count_).raw(body_.bytes());
    return std::move(out).bytes();
  }

 private:
  std::uint8_t method_;
  std::uint8_t count_ = 0;
  ByteWriter body_;
};

class FieldReader {
 public:
  FieldReader(ByteReader& r, std::initializer_list<std::uint8_t> expected) {
    const auto count = r.u8();
    if (count != expected.size()) fail(Errc::MalformedPayload, "unexpected field count");
    auto want = expected.begin();
    for (std::uint8_t i = 0; i < count; ++i, ++want) {
      const auto tag = r.u8();
      if (tag != *want) fail(Errc::MalformedPayload, "unexpected field tag " + std::to_string(tag));
      fields_.push_back(r.raw(r.u32()));
    }
    r.expect_done();
  }

  ByteView at(std::size_t i) const { return fields_.at(i); }

  std::uint32_t u32(std::size_t i) const { return exact<4>(i).u32(); }
  std::uint64_t u64(std::size_t i) const { return exact<8>(i).u64(); }
  Digest digest(std::size_t i) const { return exact<32>(i).fixed<32>(); }

 private:
  template <std::size_t N>
  ByteReader exact(std::size_t i) const {
    if (fields_.at(i).size() != N) fail(Errc::MalformedPayload, "field width");
    return ByteReader(fields_[i]);
  }

  std::vector<ByteView> fields_;
};

enum Method : std::uint8_t {
  kCreateProject = 1,
  kRegisterKey = 2,
  kJoinRound = 3,
  kPublishWrappedKeys = 4,
  kSubmitUpdateRef = 5,
  kPublishGlobalModel = 6,
  kEndorse = 7,
  kSubmitContributions = 8,
};

}  // namespace

Bytes encode(const Call& call) {
  return std::visit(
      [](const auto& c) -> Bytes {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, CreateProject>) {
          ByteWriter committee;
          committee.u32(static_cast<std::uint32_t>(c.params.committee.size()));
          for (const auto& a : c.params.committee) committee.u32(a.value);
          return FieldWriter(kCreateProject)
              .digest(1, c.params.config_digest)
              .u64(2, c.params.budget)
              .u64(3, c.params.required_fee)
              .u64(4, c.params.round_budget)
              .u32(5, c.params.total_rounds)
              .u32(6, c.params.deadline_blocks)
              .field(7, committee.bytes())
              .finish();
        } else if constexpr (std::is_same_v<T, RegisterKey>) {
          return FieldWriter(kRegisterKey).u64(1, c.project).digest(2, c.pubkey).finish();
        } else if constexpr (std::is_same_v<T, JoinRound>) {
          return FieldWriter(kJoinRound).u64(1, c.project).u32(2, c.round).u64(3, c.fee).finish();
        } else if constexpr (std::is_same_v<T, PublishWrappedKeys>) {
          ByteWriter list;
          list.u32(static_cast<std::uint32_t>(c.wrapped.size()));
          for (const auto& [who, blob] : c.wrapped) list.u32(who.value).u32(static_cast<std::uint32_t>(blob.size())).raw(blob);
          return FieldWriter(kPublishWrappedKeys).u64(1, c.project).u32(2, c.round).field(3, list.bytes()).finish();
        } else if constexpr (std::is_same_v<T, SubmitUpdateRef>) {
          return FieldWriter(kSubmitUpdateRef).u64(1, c.project).u32(2, c.round).digest(3, c.cid.digest).finish();
        } else if constexpr (std::is_same_v<T, PublishGlobalModel>) {
          return FieldWriter(kPublishGlobalModel)
              .u64(1, c.project)
              .u32(2, c.round)
              .digest(3, c.cid.digest)
              .digest(4, c.contribution_digest)
              .finish();
        } else if constexpr (std::is_same_v<T, Endorse>) {
          return FieldWriter(kEndorse)
              .u64(1, c.project)
              .u32(2, c.round)
              .digest(3, c.endorsement.result.model_digest)
              .digest(4, c.endorsement.result.contribution_digest)
              .digest(5, c.endorsement.model_cid.digest)
              .finish();
        } else {
          return FieldWriter(kSubmitContributions).u64(1, c.project).u32(2, c.round).field(3, c.scores).finish();
        }
      },
      call);
}

Call decode(ByteView payload) {
  ByteReader r(payload);
  switch (r.u8()) {
    case kCreateProject: {
      FieldReader f(r, {1, 2, 3, 4, 5, 6, 7});
      CreateProject c;
      c.params.config_digest = f.digest(0);
      c.params.budget = f.u64(1);
      c.params.required_fee = f.u64(2);
      c.params.round_budget = f.u64(3);
      c.params.total_rounds = f.u32(4);
      c.params.deadline_blocks = f.u32(5);
      ByteReader list(f.at(6));
      const auto n = list.u32();
      if (list.remaining() != static_cast<std::size_t>(n) * 4) fail(Errc::MalformedPayload, "committee list");
      for (std::uint32_t i = 0; i < n; ++i) c.params.committee.push_back(AccountId{list.u32()});
      return c;
    }
    case kRegisterKey: {
      FieldReader f(r, {1, 2});
      return RegisterKey{f.u64(0), f.digest(1)};
    }
    case kJoinRound: {
      FieldReader f(r, {1, 2, 3});
      return JoinRound{f.u64(0), f.u32(1), f.u64(2)};
    }
    case kPublishWrappedKeys: {
      FieldReader f(r, {1, 2, 3});
      PublishWrappedKeys c{f.u64(0), f.u32(1), {}};
      ByteReader list(f.at(2));
      const auto n = list.u32();
      for (std::uint32_t i = 0; i < n; ++i) {
        const AccountId who{list.u32()};
        auto blob = list.raw(list.u32());
        if (!c.wrapped.emplace(who, Bytes(blob.begin(), blob.end())).second)
          fail(Errc::MalformedPayload, "duplicate wrapped key entry");
      }
      list.expect_done();
      return c;
    }
    case kSubmitUpdateRef: {
      FieldReader f(r, {1, 2, 3});
      return SubmitUpdateRef{f.u64(0), f.u32(1), ContentId{f.digest(2)}};
    }
    case kPublishGlobalModel: {
      FieldReader f(r, {1, 2, 3, 4});
      return PublishGlobalModel{f.u64(0), f.u32(1), ContentId{f.digest(2)}, f.digest(3)};
    }
    case kEndorse: {
      FieldReader f(r, {1, 2, 3, 4, 5});
      Endorse c{f.u64(0), f.u32(1), {}};
      c.endorsement.result = {f.digest(2), f.digest(3)};
      c.endorsement.model_cid = ContentId{f.digest(4)};
      return c;
    }
    case kSubmitContributions: {
      FieldReader f(r, {1, 2, 3});
      auto s = f.at(2);
      return SubmitContributions{f.u64(0), f.u32(1), Bytes(s.begin(), s.end())};
    }
    default:
      fail(Errc::MalformedPayload, "unknown contract method");
  }
}

}  // namespace fedledger::contract
