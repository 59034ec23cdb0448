#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "skewsync/experiment.hpp"

using namespace skewsync;

namespace {

DelayModel noiseless(double d_fixed) {
  DelayModel m;
  m.d_fixed_ns = d_fixed;
  m.sigma_ns = 0;
  m.p_unc = 0;
  return m;
}

SimConfig small_flood(std::size_t hops) {
  SimConfig c = default_config("flood");
  c.hops = hops;
  c.warmup_s = 600;
  c.duration_s = 2'400;
  c.delay_preset = "custom";
  c.delay = noiseless(3'000);
  return c;
}

}  // namespace

TEST(ProbeErrors, Examples) {
  std::vector<ProbeRecord> r{{TrueTime{0}, {0, 5'000, 9'000}}, {TrueTime{1}, {7, 7, 7}}};
  const auto e = probe_errors(r);
  EXPECT_EQ(e.local, (std::vector<double>{5'000, 0}));
  EXPECT_EQ(e.global, (std::vector<double>{9'000, 0}));
  std::vector<ProbeRecord> one{{TrueTime{0}, {42}}};
  EXPECT_THROW(probe_errors(one), InsufficientData);
  EXPECT_THROW(probe_errors(std::vector<ProbeRecord>{}), InsufficientData);
}

TEST(ProbeErrors, GlobalAtLeastLocalProperty) {
  Rng rng(3);
  std::vector<ProbeRecord> r(2'000);
  for (auto& p : r)
    for (int i = 0; i < 6; ++i) p.readings.push_back(static_cast<std::int64_t>(1e6 * standard_normal(rng)));
  const auto e = probe_errors(r);
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_GE(e.global[i], e.local[i]);
}

TEST(Topology, Parents) {
  const auto line = Topology::line(3);
  EXPECT_EQ(line.n_nodes, 4u);
  EXPECT_FALSE(line.parent(0));
  EXPECT_EQ(*line.parent(3), 2);
  const auto star = Topology::star(25);
  EXPECT_EQ(star.n_nodes, 26u);
  EXPECT_EQ(*star.parent(7), 0);
}

TEST(RunStar, NoiselessMleSettlesToQuantization) {
  SimConfig c = default_config("compare");
  c.receivers = 1;
  c.estimators = {EstimatorKind::mle};
  c.delay_preset = "custom";
  c.delay = noiseless(3'300);
  c.duration_s = 3'600;
  const auto r = run_star(c);
  const auto* s = r.find("mle", "skew_error_ppb", 1);
  ASSERT_NE(s, nullptr);
  ASSERT_FALSE(s->points.empty());
  EXPECT_EQ(s->points.front().index, 1);  // first estimate after the second batch
  const double bound = 2.0 * static_cast<double>(c.granule_ns) / 200e9 * 1e9;
  for (const auto& p : s->points) EXPECT_LE(std::abs(p.value), bound);
}

TEST(RunStar, CommonRandomNumbersAcrossEstimators) {
  // direct with N = 1 and window 2 is the plain two-batch ratio, identical to
  // the MLE on the same stream when N and T_b agree and nothing is filtered
  SimConfig c = default_config("compare");
  c.receivers = 3;
  c.preprocessing = false;
  c.duration_s = 1'800;
  c.specs["mle"] = {30, 1, 2};
  c.specs["direct"] = {30, 1, 2};
  c.estimators = {EstimatorKind::mle, EstimatorKind::direct};
  const auto r = run_star(c);
  for (int n = 1; n <= 3; ++n) {
    const auto* a = r.find("mle", "skew_error_ppb", n);
    const auto* b = r.find("direct", "skew_error_ppb", n);
    ASSERT_TRUE(a && b);
    ASSERT_EQ(a->points.size(), b->points.size());
    for (std::size_t i = 0; i < a->points.size(); ++i) EXPECT_NEAR(a->points[i].value, b->points[i].value, 1e-6);
  }
}

TEST(RunStar, Deterministic) {
  SimConfig c = default_config("compare");
  c.receivers = 4;
  c.duration_s = 1'800;
  c.delay = delay_preset("equal");
  c.delay_preset = "equal";
  const auto a = to_csv(run_star(c)), b = to_csv(run_star(c));
  EXPECT_EQ(a, b);
  c.seed = 2;
  EXPECT_NE(to_csv(run_star(c)), a);
}

TEST(RunStar, InfeasibleBurstIsConfigError) {
  SimConfig c = default_config("compare");
  c.granule_ns = 32;
  c.specs["mle"].n_packets = 20;  // 19 * 100 us > 625 us at 50 000 ppb
  c.estimators = {EstimatorKind::mle};
  EXPECT_THROW(run_star(c), ConfigError);
}

TEST(InjectUncertain, PairedSeriesAndRange) {
  SimConfig c = default_config("unc-inject");
  c.duration_s = 3'600;
  const auto r = inject_uncertain(c, 10, 200'000);
  for (const char* e : {"mle", "lr", "direct", "kf"}) {
    EXPECT_NE(r.find(e, "skew_error_ppb", 1), nullptr) << e;
    EXPECT_NE(r.find(e, "clean_skew_error_ppb", 1), nullptr) << e;
  }
  // direct: a spike of about magnitude / tau at the injected round
  const auto* d = r.find("direct", "skew_error_ppb", 1);
  const auto* dc = r.find("direct", "clean_skew_error_ppb", 1);
  for (std::size_t i = 0; i < d->points.size(); ++i) {
    const double diff = std::abs(d->points[i].value - dc->points[i].value);
    if (d->points[i].index == 10) {
      EXPECT_NEAR(diff, 200'000 / 30.0, 300);
    } else if (d->points[i].index != 11) {
      EXPECT_EQ(diff, 0.0);
    }
  }
  EXPECT_THROW(inject_uncertain(c, 100'000, 200'000), DomainError);
  EXPECT_THROW(inject_uncertain(c, -1, 200'000), DomainError);
}

TEST(RunFlood, TwoHopNoiselessWithinTwoGranules) {
  SimConfig c = small_flood(2);
  const auto r = run_flood(c);
  for (const auto& v : c.flood_variants) {
    const auto* g = r.find(v, "global_error_ns", -1);
    const auto* l = r.find(v, "local_error_ns", -1);
    ASSERT_TRUE(g && l) << v;
    ASSERT_FALSE(g->points.empty());
    for (std::size_t i = 0; i < g->points.size(); ++i) {
      EXPECT_LE(g->points[i].value, 2.0 * static_cast<double>(c.granule_ns)) << v << " probe " << i;
      EXPECT_LE(l->points[i].value, 2.0 * static_cast<double>(c.granule_ns)) << v << " probe " << i;
      EXPECT_GE(g->points[i].value, l->points[i].value);
    }
  }
}

TEST(RunFlood, GlobalNotBelowLocalWithNoise) {
  SimConfig c = small_flood(6);
  c.delay = delay_preset("equal");
  c.delay_preset = "equal";
  const auto r = run_flood(c);
  for (const auto& v : c.flood_variants) {
    const auto* g = r.find(v, "global_error_ns", -1);
    const auto* l = r.find(v, "local_error_ns", -1);
    for (std::size_t i = 0; i < g->points.size(); ++i) EXPECT_GE(g->points[i].value, l->points[i].value);
  }
}

TEST(RunFlood, FrozenCompensationReadsHardwareClocks) {
  SimConfig c = small_flood(4);
  c.flood_compensate = false;
  const auto r = run_flood(c);
  const auto* g = r.find("mle-pulsesync", "global_error_ns", -1);
  ASSERT_NE(g, nullptr);
  for (const auto& p : g->points) {
    const TrueTime t = TrueTime::from_seconds(p.sim_time_s);
    std::vector<std::int64_t> rd;
    for (std::size_t i = 0; i <= c.hops; ++i) rd.push_back(detail::make_clock(c, i, c.granule_ns).read_hardware(t));
    const auto [lo, hi] = std::minmax_element(rd.begin(), rd.end());
    EXPECT_EQ(p.value, static_cast<double>(*hi - *lo));
  }
}

TEST(GroundTruth, GlobalErrorGrowsAtLargestPairwiseSkew) {
  Rng rng(17);
  std::vector<SimClock> clocks;
  std::vector<double> skews;
  for (int i = 0; i < 8; ++i) {
    SimClock::Params p;
    p.skew_ppb = 50'000 * (2 * uniform01(rng) - 1);
    skews.push_back(p.skew_ppb);
    clocks.emplace_back(p);
  }
  double want = 0;
  for (double a : skews)
    for (double b : skews) want = std::max(want, std::abs(true_relative_skew_ppb(a, b)));
  for (std::int64_t start : {1LL, 500LL, 3'000LL}) {
    auto global_at = [&](std::int64_t s) {
      ProbeRecord r{TrueTime{s * kNsPerSecond}, {}};
      for (const auto& c : clocks) r.readings.push_back(c.read_logical(r.probe_true_time));
      return probe_errors(std::span<const ProbeRecord>(&r, 1)).global[0];
    };
    const double rate_ppb = (global_at(start + 100) - global_at(start)) / 100.0;
    EXPECT_NEAR(rate_ppb / want, 1.0, 0.05);
  }
}

TEST(RunFlood, DeterministicAndNeedsLine) {
  SimConfig c = small_flood(3);
  c.delay = delay_preset("lowest");
  c.delay_preset = "lowest";
  EXPECT_EQ(to_csv(run_flood(c)), to_csv(run_flood(c)));
  c.topology = TopologyKind::star;
  EXPECT_THROW(run_flood(c), ConfigError);
}
