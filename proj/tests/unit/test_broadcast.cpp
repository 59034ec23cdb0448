#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "skewsync/broadcast.hpp"

using namespace skewsync;

namespace {

SimClock clk(double skew = 0, std::int64_t theta0 = 0, std::int64_t granule = 1) {
  SimClock::Params p;
  p.skew_ppb = skew;
  p.theta0_ns = theta0;
  p.granule_ns = granule;
  return SimClock(p);
}

DelayModel zero_delay() {
  DelayModel m;
  m.d_fixed_ns = 0;
  m.sigma_ns = 0;
  return m;
}

DelayModel fixed_delay(double d) {
  DelayModel m;
  m.d_fixed_ns = d;
  m.sigma_ns = 0;
  return m;
}

}  // namespace

TEST(RunBatch, SinglePacket) {
  Rng rng(1);
  const auto b = run_batch(clk(), clk(), 1, kDefaultIntraGapNs, zero_delay(), TrueTime{100}, rng);
  EXPECT_EQ(b.size(), 1u);
  EXPECT_EQ(b.t_shift_ns, 0);
}

TEST(RunBatch, IdenticalIdealClocksZeroDelay) {
  Rng rng(1);
  const auto b = run_batch(clk(), clk(), 5, 100'000, zero_delay(), TrueTime{1'000}, rng);
  EXPECT_EQ(b.t_shift_ns, 400'000);
  for (std::size_t n = 0; n < 5; ++n) {
    EXPECT_EQ(b.stamps[n].sender, b.stamps[n].receiver);
    EXPECT_EQ(b.stamps[n].sender, 1'000 + static_cast<std::int64_t>(n) * 100'000);
  }
}

TEST(RunBatch, SenderStampsIncrease) {
  Rng rng(2);
  const auto b = run_batch(clk(3'000), clk(-7'000, 55), 20, 100'000, delay_preset("equal"), TrueTime{5}, rng);
  for (std::size_t n = 1; n < b.size(); ++n) EXPECT_GT(b.stamps[n].sender, b.stamps[n - 1].sender);
}

TEST(RunBatch, InjectionAddsExactMagnitudeWithoutExtraDraws) {
  Rng a(3), b(3);
  BatchOptions opt;
  opt.inject_index = 2;
  opt.inject_ns = 200'000;
  const auto clean = run_batch(clk(), clk(), 5, 100'000, delay_preset("single-task"), TrueTime{0}, a);
  const auto hit = run_batch(clk(), clk(), 5, 100'000, delay_preset("single-task"), TrueTime{0}, b, opt);
  for (std::size_t n = 0; n < 5; ++n) {
    const double extra = n == 2 ? 200'000 : 0;
    EXPECT_EQ(hit.delays[n].total, clean.delays[n].total + extra);
  }
  EXPECT_EQ(a(), b());
}

TEST(RunBatch, RejectsBadArguments) {
  Rng rng(1);
  EXPECT_THROW(run_batch(clk(), clk(), 0, 1, zero_delay(), TrueTime{0}, rng), DomainError);
  EXPECT_THROW(run_batch(clk(), clk(), 2, 0, zero_delay(), TrueTime{0}, rng), DomainError);
}

TEST(CheckTShift, ThresholdAt32MHz) {
  EXPECT_NEAR(t_shift_limit_ns(50'000, 32e6), 625'000.0, 1e-6);
  EXPECT_TRUE(check_t_shift(400'000, 50'000, 32e6));
  EXPECT_FALSE(check_t_shift(700'000, 50'000, 32e6));
  EXPECT_TRUE(check_t_shift(std::int64_t{1} << 50, 0.0, 32e6));
  EXPECT_THROW(check_t_shift(1, 1.0, 0.0), DomainError);
}

TEST(Observations, SignConvention) {
  Rng rng(1);
  // identical clocks, zero delay
  auto b = run_batch(clk(), clk(), 4, 100'000, zero_delay(), TrueTime{0}, rng);
  for (double o : observations(b)) EXPECT_EQ(o, 0.0);
  // receiver 500 ns behind
  b = run_batch(clk(), clk(0, -500), 4, 100'000, zero_delay(), TrueTime{1'000}, rng);
  for (double o : observations(b)) EXPECT_EQ(o, 500.0);
  // constant delay: receiver stamps later
  b = run_batch(clk(), clk(), 4, 100'000, fixed_delay(3'300), TrueTime{0}, rng);
  for (double o : observations(b)) EXPECT_EQ(o, -3'300.0);
}

TEST(PairObservations, NoiselessLinearClock) {
  const double s = 40'000;  // sender fast relative to receiver
  const auto sender = clk(s), receiver = clk();
  Rng rng(1);
  const std::int64_t tau = 200LL * kNsPerSecond;
  const auto u = run_batch(sender, receiver, 5, 100'000, fixed_delay(3'300), TrueTime{kNsPerSecond}, rng);
  const auto v = run_batch(sender, receiver, 5, 100'000, fixed_delay(3'300), TrueTime{kNsPerSecond + tau}, rng);
  const auto o = pair_observations(u, v);
  for (double p : o.p) EXPECT_DOUBLE_EQ(p, s * 1e-9 * static_cast<double>(tau));
  EXPECT_EQ(o.tau_hat_ns, static_cast<double>(tau));
}

TEST(PairObservations, HandWorkedJitter) {
  BroadcastBatch u, v;
  u.batch_true_time = TrueTime{0};
  v.batch_true_time = TrueTime{10};
  // zero skew: sender = true send time, receiver = send + 3300 + d
  u.stamps = {{0, 3'300 + 100}};
  v.stamps = {{1'000, 1'000 + 3'300 - 100}};
  const auto o = pair_observations(u, v);
  // obs = sender - receiver, so jitter enters as d[u] - d[v]: +100 - (-100)
  EXPECT_EQ(o.p[0], 200.0);
  EXPECT_EQ(std::abs(o.p[0]), 200.0);
}

TEST(PairObservations, ReceiverOffsetTranslationInvarianceProperty) {
  const auto sender = clk(12'345, 77);
  for (std::int64_t shift : {1LL, -999LL, 123'456'789LL}) {
    Rng r1(5), r2(5);
    const auto rx1 = clk(-3'000, 1'000'000'000), rx2 = clk(-3'000, 1'000'000'000 + shift);
    const auto u1 = run_batch(sender, rx1, 5, 100'000, delay_preset("single-task"), TrueTime{kNsPerSecond}, r1);
    const auto v1 = run_batch(sender, rx1, 5, 100'000, delay_preset("single-task"), TrueTime{201 * kNsPerSecond}, r1);
    const auto u2 = run_batch(sender, rx2, 5, 100'000, delay_preset("single-task"), TrueTime{kNsPerSecond}, r2);
    const auto v2 = run_batch(sender, rx2, 5, 100'000, delay_preset("single-task"), TrueTime{201 * kNsPerSecond}, r2);
    const auto a = pair_observations(u1, v1), b = pair_observations(u2, v2);
    EXPECT_EQ(a.p, b.p);
    EXPECT_EQ(a.tau_hat_ns, b.tau_hat_ns);
  }
}

TEST(PairObservations, TauHatIgnoresSenderParameters) {
  const auto rx = clk(2'000, 3);
  Rng r1(8), r2(8);
  const auto s1 = clk(-40'000, 0), s2 = clk(35'000, 999'999);
  const auto u1 = run_batch(s1, rx, 5, 100'000, delay_preset("single-task"), TrueTime{kNsPerSecond}, r1);
  const auto v1 = run_batch(s1, rx, 5, 100'000, delay_preset("single-task"), TrueTime{31 * kNsPerSecond}, r1);
  const auto u2 = run_batch(s2, rx, 5, 100'000, delay_preset("single-task"), TrueTime{kNsPerSecond}, r2);
  const auto v2 = run_batch(s2, rx, 5, 100'000, delay_preset("single-task"), TrueTime{31 * kNsPerSecond}, r2);
  EXPECT_EQ(pair_observations(u1, v1).tau_hat_ns, pair_observations(u2, v2).tau_hat_ns);
}

TEST(PairObservations, ConstantUpToQuantizationWithoutNoise) {
  const std::int64_t g = 32;
  const auto sender = clk(-31'000, 17, g), receiver = clk(22'000, 5'000, g);
  Rng rng(1);
  const auto u = run_batch(sender, receiver, 20, 100'000, fixed_delay(3'300), TrueTime{kNsPerSecond}, rng);
  const auto v = run_batch(sender, receiver, 20, 100'000, fixed_delay(3'300), TrueTime{91 * kNsPerSecond}, rng);
  const auto o = pair_observations(u, v);
  const auto [lo, hi] = std::minmax_element(o.p.begin(), o.p.end());
  EXPECT_LE(*hi - *lo, 2.0 * 2 * g);
}

TEST(PairObservations, Errors) {
  BroadcastBatch u, v;
  u.stamps = {{0, 0}, {1, 1}};
  v.stamps = {{0, 0}};
  u.batch_true_time = TrueTime{0};
  v.batch_true_time = TrueTime{1};
  EXPECT_THROW(pair_observations(u, v), ProtocolError);
  v.stamps = {{5, 5}, {6, 6}};
  v.batch_true_time = TrueTime{0};
  EXPECT_THROW(pair_observations(u, v), OrderingError);
}
