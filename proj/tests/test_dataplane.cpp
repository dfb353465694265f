#include <gtest/gtest.h>

#include "fedledger/dataplane.hpp"
#include "fedledger/errors.hpp"

using namespace fedledger;
using namespace fedledger::net;

namespace {

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return Errc::NoData;
}

DataPlane plane(NetworkConfig cfg = {}) {
  DataPlane dp(cfg, 1);
  for (std::uint32_t id : {1u, 2u, 3u}) dp.register_peer(AccountId{id});
  return dp;
}

}  // namespace

TEST(DataPlane, DirectTransferTime) {
  NetworkConfig cfg;
  cfg.rtt = 0.05;
  cfg.bandwidth = 100e6;
  auto dp = plane(cfg);
  const std::uint64_t mib = 1024 * 1024;
  const auto r = dp.send_direct(AccountId{1}, AccountId{2}, mib, 3.0);
  EXPECT_EQ(r.route, Route::Direct);
  EXPECT_NEAR(r.duration(), 0.025 + mib * 8.0 / 100e6, 1e-12);
  EXPECT_DOUBLE_EQ(r.start, 3.0);
  EXPECT_DOUBLE_EQ(r.queued, 0.0);
}

TEST(DataPlane, UplinkSerialisesPerSender) {
  auto dp = plane();
  const std::uint64_t n = 1'000'000;
  const double serial = n * 8.0 / 100e6;
  const auto a = dp.send_direct(AccountId{1}, AccountId{2}, n, 0.0);
  const auto b = dp.send_direct(AccountId{1}, AccountId{3}, n, 0.0);
  const auto c = dp.send_direct(AccountId{2}, AccountId{3}, n, 0.0);
  EXPECT_NEAR(b.queued, serial, 1e-12);
  EXPECT_NEAR(b.end - a.end, serial, 1e-12);
  EXPECT_DOUBLE_EQ(c.queued, 0.0);
}

TEST(DataPlane, RttIsAdditive) {
  NetworkConfig lo, hi;
  lo.rtt = 0.05;
  hi.rtt = 0.2;
  for (std::uint64_t n : {1u, 1000u, 5'872'025u}) {
    auto a = plane(lo), b = plane(hi);
    const auto ra = a.send_direct(AccountId{1}, AccountId{2}, n, 0.0);
    const auto rb = b.send_direct(AccountId{1}, AccountId{2}, n, 0.0);
    EXPECT_NEAR(rb.duration() - ra.duration(), 0.075, 1e-9);
  }
}

TEST(DataPlane, FallbackStoreRoundTrip) {
  NetworkConfig cfg;
  cfg.fallback_throughput = 1000;
  auto dp = plane(cfg);
  const Bytes blob{1, 2, 3, 4};
  const auto cid = dp.put_fallback(blob, 2000);
  EXPECT_EQ(cid, ContentId::of(blob));
  EXPECT_EQ(dp.wire_size(cid), 2000u);
  auto [bytes, r] = dp.get_fallback(cid, 1.0, AccountId{2});
  EXPECT_EQ(bytes, blob);
  EXPECT_EQ(r.route, Route::Fallback);
  EXPECT_DOUBLE_EQ(r.end, 3.0);
  EXPECT_EQ(code_of([&] { dp.get_fallback(ContentId::of(Bytes{9}), 0.0, AccountId{2}); }), Errc::NotFound);
}

TEST(DataPlane, DirectFailureFallsBack) {
  NetworkConfig cfg;
  cfg.direct_failure_prob = 1.0;
  cfg.rtt = 0.1;
  cfg.fallback_throughput = 1e6;
  auto dp = plane(cfg);
  const auto cid = dp.put_fallback(Bytes(500'000, 1));
  auto [bytes, r] = dp.disseminate(AccountId{1}, AccountId{2}, cid, 0.0, Policy::DirectFirst);
  EXPECT_EQ(r.route, Route::Fallback);
  EXPECT_EQ(r.attempts, 2u);
  EXPECT_NEAR(r.end, 0.1 + 0.5, 1e-12);
  EXPECT_EQ(code_of([&] { dp.disseminate(AccountId{1}, AccountId{2}, cid, 0.0, Policy::DirectOnly); }),
            Errc::Unavailable);
  EXPECT_EQ(code_of([&] { dp.send_direct(AccountId{1}, AccountId{2}, 10, 0.0); }), Errc::LinkFailure);
}

TEST(DataPlane, BothPathsExhausted) {
  NetworkConfig cfg;
  cfg.direct_failure_prob = 1.0;
  cfg.fallback_failure_prob = 1.0;
  auto dp = plane(cfg);
  const auto cid = dp.put_fallback(Bytes(10, 1));
  EXPECT_EQ(code_of([&] { dp.disseminate(AccountId{1}, AccountId{2}, cid, 0.0, Policy::DirectFirst); }),
            Errc::Unavailable);
  EXPECT_EQ(code_of([&] { dp.get_fallback(cid, 0.0, AccountId{2}); }), Errc::Unavailable);
}

TEST(DataPlane, FallbackJitterStaysInBand) {
  NetworkConfig cfg;
  cfg.fallback_jitter = true;
  cfg.fallback_throughput = 1e6;
  auto dp = plane(cfg);
  const auto cid = dp.put_fallback(Bytes(1'000'000, 1));
  for (int i = 0; i < 200; ++i) {
    auto [_, r] = dp.get_fallback(cid, 0.0, AccountId{2});
    EXPECT_GE(r.duration(), 1.0 / 1.2 - 1e-12);
    EXPECT_LE(r.duration(), 1.0 / 0.8 + 1e-12);
  }
}

TEST(DataPlane, UnregisteredPeer) {
  auto dp = plane();
  EXPECT_EQ(code_of([&] { dp.send_direct(AccountId{1}, AccountId{99}, 10, 0.0); }), Errc::NotFound);
}

TEST(DataPlane, Profiles) {
  EXPECT_DOUBLE_EQ(with_fallback_profile({}, "wan").fallback_throughput, 2.0 * 1024 * 1024);
  EXPECT_DOUBLE_EQ(with_fallback_profile({}, "can").fallback_throughput, 8.0 * 1024 * 1024);
  EXPECT_EQ(code_of([] { with_fallback_profile({}, "moon"); }), Errc::UnknownPreset);
  NetworkConfig bad;
  bad.bandwidth = 0;
  EXPECT_EQ(code_of([&] { bad.validate(); }), Errc::InvalidParameter);
}

TEST(DataPlane, FramingVerifiesCid) {
  const Bytes ct{5, 6, 7};
  const auto cid = ContentId::of(ct);
  auto f = frame(cid, view(ct));
  EXPECT_EQ(f.size(), 35u);
  auto [got, body] = unframe(view(f));
  EXPECT_EQ(got, cid);
  EXPECT_EQ(body, ct);
  f.back() ^= 1;
  EXPECT_EQ(code_of([&] { unframe(view(f)); }), Errc::MalformedPayload);
}

TEST(DataPlane, TraceCsv) {
  auto dp = plane();
  dp.send_direct(AccountId{1}, AccountId{2}, 100, 0.0);
  const auto csv = dp.trace_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "route,from,to,bytes,start,end,attempts");
  EXPECT_NE(csv.find("direct,1,2,100,"), std::string::npos);
}
