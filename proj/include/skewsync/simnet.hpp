#pragma once

// Discrete-event simulation of star and line networks.
//
// Star: one reference broadcasts a batch every T_b to k receivers, each of
// which runs its own estimator; the per-round skew error against ground
// truth is recorded. Line: the root floods rounds hop by hop, every node
// compensates its logical clock from its parent's batch and forwards a fresh
// batch stamped with its own logical clock. Probes read all logical clocks at
// a fixed cadence.
//
// Random streams are keyed by (seed, purpose, node), so every estimator in a
// run sees the same clocks and the same delay draws.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "skewsync/broadcast.hpp"
#include "skewsync/config.hpp"
#include "skewsync/delay_model.hpp"
#include "skewsync/errors.hpp"
#include "skewsync/estimators.hpp"
#include "skewsync/parallel.hpp"
#include "skewsync/report.hpp"
#include "skewsync/rng.hpp"
#include "skewsync/skewpipe.hpp"
#include "skewsync/stats.hpp"
#include "skewsync/timebase.hpp"
#include "skewsync/trackers.hpp"

namespace skewsync {

struct Topology {
  TopologyKind kind = TopologyKind::star;
  std::size_t n_nodes = 0;
  int reference = 0;

  static Topology star(std::size_t receivers) { return {TopologyKind::star, receivers + 1, 0}; }
  static Topology line(std::size_t hops) { return {TopologyKind::line, hops + 1, 0}; }

  // Parent of node i on a line (root has none).
  std::optional<int> parent(int i) const {
    if (i == reference) return std::nullopt;
    return kind == TopologyKind::line ? i - 1 : reference;
  }
};

struct ProbeRecord {
  TrueTime probe_true_time;
  std::vector<std::int64_t> readings;  // logical ns, index = node id
};

struct ProbeErrors {
  std::vector<double> local;
  std::vector<double> global;
};

// Local error is the largest disagreement between adjacent nodes on the line,
// global the largest between any pair (max - min).
inline ProbeErrors probe_errors(std::span<const ProbeRecord> records) {
  if (records.empty()) throw InsufficientData("probe_errors needs at least one record");
  ProbeErrors out;
  for (const auto& r : records) {
    if (r.readings.size() < 2) throw InsufficientData("probe errors are undefined for fewer than 2 nodes");
    std::int64_t local = 0;
    for (std::size_t i = 1; i < r.readings.size(); ++i)
      local = std::max(local, std::abs(r.readings[i] - r.readings[i - 1]));
    const auto [lo, hi] = std::minmax_element(r.readings.begin(), r.readings.end());
    out.local.push_back(static_cast<double>(local));
    out.global.push_back(static_cast<double>(*hi - *lo));
  }
  return out;
}

namespace detail {

inline double nominal_hz_for(const SimConfig& c, std::int64_t granule_ns) {
  return c.f_s_hz > 0 ? c.f_s_hz : 1e9 / static_cast<double>(granule_ns);
}

// Clock i of a run: skew uniform in +-bound, initial offset uniform in [0, 1 s).
inline SimClock make_clock(const SimConfig& c, std::size_t node, std::int64_t granule_ns) {
  Rng rng = make_rng(c.seed, "clock", node);
  SimClock::Params p;
  p.nominal_hz = nominal_hz_for(c, granule_ns);
  p.skew_ppb = c.skew_bound_ppb * (2.0 * uniform01(rng) - 1.0);
  p.theta0_ns = static_cast<std::int64_t>(std::floor(uniform01(rng) * 1e9));
  p.granule_ns = granule_ns;
  p.skew_bound_ppb = c.skew_bound_ppb;
  p.drift = DriftProcess{c.drift, c.drift_step_ppb, stream_seed(c.seed, "drift", node)};
  return SimClock(p);
}

// Advances the drift process until every reading up to `t` is final.
inline void ensure_drift(SimClock& clk, TrueTime t, std::int64_t interval_ns, Rng& rng) {
  if (clk.drift().kind == DriftKind::constant) return;
  while (clk.drift_cursor_ns() < t.ns) clk.advance_drift(interval_ns, rng);
}

// With gap_on_ticks the packets leave on sender timer ticks, so every packet
// of a batch sees the same quantization phase.
inline std::int64_t effective_gap_ns(const SimConfig& c, std::int64_t granule_ns) {
  if (!c.gap_on_ticks) return c.intra_gap_ns;
  const std::int64_t ticks = std::max<std::int64_t>(1, (c.intra_gap_ns + granule_ns / 2) / granule_ns);
  return ticks * granule_ns;
}

inline void require_t_shift(const SimConfig& c, const std::string& who, std::size_t n,
                            std::int64_t granule_ns) {
  const std::int64_t t_shift = static_cast<std::int64_t>(n - 1) * effective_gap_ns(c, granule_ns);
  const double f_s = nominal_hz_for(c, granule_ns);
  if (!check_t_shift(t_shift, c.skew_bound_ppb, f_s))
    throw ConfigError(who + ": burst duration " + std::to_string(t_shift) + " ns exceeds the limit of " +
                      std::to_string(static_cast<std::int64_t>(t_shift_limit_ns(c.skew_bound_ppb, f_s))) +
                      " ns for skew bound " + std::to_string(c.skew_bound_ppb) + " ppb at " +
                      std::to_string(f_s) + " Hz");
}

inline std::int64_t seconds_to_ns(double s) { return TrueTime::from_seconds(s).ns; }


}  // namespace detail

// One estimator configuration evaluated on every receiver of a star.
struct StarJob {
  std::string label;
  EstimatorKind kind = EstimatorKind::mle;
  EstimatorSpec spec;
  std::int64_t granule_ns = 1;
};

struct Injection {
  std::int64_t round = -1;
  double magnitude_ns = 0.0;
};

inline constexpr std::int64_t kFirstRoundNs = kNsPerSecond;

inline TrackerConfig tracker_config(const SimConfig& c, EstimatorKind kind, const EstimatorSpec& s,
                                    std::int64_t granule_ns) {
  TrackerConfig t;
  t.kind = kind;
  t.window = s.window;
  t.t_b_ns = detail::seconds_to_ns(s.t_b_s);
  t.pipeline = PipelineOptions{c.preprocessing, c.min_preprocess_n};
  t.kf_q_offset_ns2 = c.kf_q_offset_ns2;
  t.kf_q_skew_ppb2 = c.kf_q_skew_ppb2;
  t.sigma_prior_ns = c.kf_sigma_prior_ns;
  t.granule_ns = granule_ns;
  return t;
}

// Skew error series of one receiver under one job.
inline Series run_star_receiver(const SimConfig& c, const StarJob& job, std::size_t receiver,
                                const Injection& inj = {}) {
  SimClock ref = detail::make_clock(c, 0, job.granule_ns);
  SimClock rx = detail::make_clock(c, receiver, job.granule_ns);
  Rng drift_ref = make_rng(c.seed, "drift", 0);
  Rng drift_rx = make_rng(c.seed, "drift", receiver);
  Rng delay_rng = make_rng(c.seed, "delay", receiver);
  const std::int64_t drift_dt = detail::seconds_to_ns(c.drift_interval_s);

  SkewTracker tracker(tracker_config(c, job.kind, job.spec, job.granule_ns));
  const std::int64_t t_b = detail::seconds_to_ns(job.spec.t_b_s);
  const std::int64_t end = detail::seconds_to_ns(c.duration_s);
  const std::int64_t gap = detail::effective_gap_ns(c, job.granule_ns);
  const std::int64_t t_shift = static_cast<std::int64_t>(job.spec.n_packets - 1) * gap;

  Series s;
  s.node_id = static_cast<int>(receiver);
  s.estimator = job.label;
  s.kind = "skew_error_ppb";
  for (std::int64_t k = 0;; ++k) {
    const TrueTime t{kFirstRoundNs + k * t_b};
    if (t.ns + t_shift >= end) break;
    const TrueTime horizon = t + (t_shift + kNsPerSecond);
    detail::ensure_drift(ref, horizon, drift_dt, drift_ref);
    detail::ensure_drift(rx, horizon, drift_dt, drift_rx);

    BatchOptions opt;
    opt.sender_id = 0;
    opt.receiver_id = static_cast<int>(receiver);
    if (k == inj.round) {
      opt.inject_index = 0;
      opt.inject_ns = inj.magnitude_ns;
    }
    BroadcastBatch b = run_batch(ref, rx, job.spec.n_packets, gap, c.delay, t, delay_rng, opt);
    if (const auto est = tracker.on_batch(std::move(b))) {
      const double truth = true_relative_skew(rx, ref, t);
      s.points.push_back({k, t.seconds(), *est - truth});
    }
  }
  return s;
}

inline std::vector<Series> run_star_jobs(const SimConfig& c, const std::vector<StarJob>& jobs,
                                         const Injection& inj = {}) {
  if (c.topology != TopologyKind::star) throw ConfigError("star run needs topology = star");
  for (const auto& j : jobs) detail::require_t_shift(c, j.label, j.spec.n_packets, j.granule_ns);
  const std::size_t k = c.receivers;
  std::vector<Series> out(jobs.size() * k);
  parallel_for(out.size(), [&](std::size_t i) {
    out[i] = run_star_receiver(c, jobs[i / k], i % k + 1, inj);
  });
  return out;
}

inline std::vector<StarJob> default_star_jobs(const SimConfig& c) {
  std::vector<StarJob> jobs;
  for (auto kind : c.estimators) {
    const std::string name(to_string(kind));
    jobs.push_back({name, kind, c.spec(name), c.granule_ns});
  }
  return jobs;
}

inline RunReport make_report(const SimConfig& c, std::vector<Series> series) {
  RunReport r;
  r.experiment = c.experiment;
  r.seed = c.seed;
  r.config_echo = c.to_text();
  r.series = std::move(series);
  r.summary = summarize(r.series, c.bucket_s);
  return r;
}

inline RunReport run_star(const SimConfig& c) {
  return make_report(c, run_star_jobs(c, default_star_jobs(c)));
}

// Paired runs on identical random streams: the clean traces are labelled
// clean_skew_error_ppb, the injected ones skew_error_ppb.
inline RunReport inject_uncertain(const SimConfig& c, std::int64_t round_index, double magnitude_ns) {
  if (round_index < 0) throw DomainError("injection round must be >= 0");
  const auto jobs = default_star_jobs(c);
  for (const auto& j : jobs) {
    const std::int64_t t_b = detail::seconds_to_ns(j.spec.t_b_s);
    if (kFirstRoundNs + round_index * t_b >= detail::seconds_to_ns(c.duration_s))
      throw DomainError("injection round " + std::to_string(round_index) + " is past the end of the run for " +
                        j.label);
  }
  auto clean = run_star_jobs(c, jobs);
  auto dirty = run_star_jobs(c, jobs, Injection{round_index, magnitude_ns});
  std::vector<Series> all;
  all.reserve(clean.size() + dirty.size());
  for (std::size_t i = 0; i < dirty.size(); ++i) {
    all.push_back(std::move(dirty[i]));
    clean[i].kind = "clean_skew_error_ppb";
    all.push_back(std::move(clean[i]));
  }
  return make_report(c, std::move(all));
}

// ---------------------------------------------------------------------------
// flooding

struct NodeState {
  SimClock clock;
  std::optional<SkewTracker> tracker;
  double phi_compensation = 1.0;
  long double offset_compensation = 0.0L;
};

// One line-topology flood run; returns probe series and per-node rate errors.
inline std::vector<Series> run_flood_variant(const SimConfig& c, const std::string& variant) {
  const EstimatorSpec& spec = c.spec(variant);
  const bool mle = variant == "mle-pulsesync";
  const std::size_t hops = c.hops;
  const std::int64_t g = c.granule_ns;
  const std::int64_t t_b = detail::seconds_to_ns(spec.t_b_s);
  const std::int64_t end = detail::seconds_to_ns(c.duration_s);
  const std::int64_t warmup = detail::seconds_to_ns(c.warmup_s);
  const std::int64_t probe_dt = detail::seconds_to_ns(c.probe_interval_s);
  const std::int64_t drift_dt = detail::seconds_to_ns(c.drift_interval_s);
  const std::int64_t gap = detail::effective_gap_ns(c, g);

  std::vector<NodeState> nodes;
  std::vector<Rng> drift_rng, link_rng, proc_rng;
  for (std::size_t i = 0; i <= hops; ++i) {
    nodes.push_back(NodeState{detail::make_clock(c, i, g), std::nullopt, 1.0, 0.0L});
    drift_rng.push_back(make_rng(c.seed, "drift", i));
    link_rng.push_back(make_rng(c.seed, "flood-delay", i));
    proc_rng.push_back(make_rng(c.seed, "flood-proc", i));
    if (i > 0)
      nodes.back().tracker.emplace(
          tracker_config(c, mle ? EstimatorKind::mle : EstimatorKind::lr, spec, g));
  }

  struct Event {
    std::int64_t t;
    std::uint64_t seq;
    int kind;  // 0 round start, 1 batch complete at node, 2 probe
    std::size_t node;
    std::int64_t round;
    std::shared_ptr<BroadcastBatch> batch;
  };
  auto later = [](const Event& a, const Event& b) { return a.t != b.t ? a.t > b.t : a.seq > b.seq; };
  std::priority_queue<Event, std::vector<Event>, decltype(later)> q(later);
  std::uint64_t seq = 0;

  Series global{-1, variant, "global_error_ns", {}};
  Series local{-1, variant, "local_error_ns", {}};
  std::vector<Series> rate(hops);
  for (std::size_t i = 0; i < hops; ++i) rate[i] = {static_cast<int>(i + 1), variant, "rate_error_ppb", {}};

  auto sync_drift = [&](std::size_t i, TrueTime t) { detail::ensure_drift(nodes[i].clock, t, drift_dt, drift_rng[i]); };

  // Node `from` starts a burst to from+1 at true time t.
  auto send = [&](std::size_t from, std::int64_t t, std::int64_t round) {
    const std::size_t to = from + 1;
    const TrueTime t0{t};
    const TrueTime horizon = t0 + (static_cast<std::int64_t>(spec.n_packets) * gap + kNsPerSecond);
    sync_drift(from, horizon);
    sync_drift(to, horizon);
    BatchOptions opt;
    opt.sender_stamp = SenderStamp::logical;
    opt.sender_id = static_cast<int>(from);
    opt.receiver_id = static_cast<int>(to);
    auto b = std::make_shared<BroadcastBatch>(
        run_batch(nodes[from].clock, nodes[to].clock, spec.n_packets, gap, c.delay, t0, link_rng[to], opt));
    std::int64_t done = t;
    for (std::size_t n = 0; n < b->size(); ++n)
      done = std::max(done, t + static_cast<std::int64_t>(n) * gap +
                                static_cast<std::int64_t>(std::llround(b->delays[n].total)));
    q.push(Event{done, seq++, 1, to, round, std::move(b)});
  };

  auto process = [&](const Event& e) {
    NodeState& nd = nodes[e.node];
    const BroadcastBatch& b = *e.batch;
    const auto est = nd.tracker->on_batch(b);
    if (c.flood_compensate) {
      if (est) nd.phi_compensation = 1.0 + *est * 1e-9;
      std::vector<std::int64_t> offsets;
      offsets.reserve(b.size());
      for (const auto& s : b.stamps)
        offsets.push_back(static_cast<std::int64_t>(
                              std::llroundl(static_cast<long double>(nd.phi_compensation) * s.receiver)) -
                          s.sender);
      nd.offset_compensation = -static_cast<long double>(min_offset_estimate(offsets, c.flood_fixed_delay_ns));
      nd.clock.set_logical(nd.phi_compensation, nd.offset_compensation);
    }
    const TrueTime t{e.t};
    const long double h_node = 1.0L + static_cast<long double>(nd.clock.skew_ppb_at(t)) * 1e-9L;
    const long double h_root = 1.0L + static_cast<long double>(nodes[0].clock.skew_ppb_at(t)) * 1e-9L;
    const double err = static_cast<double>((static_cast<long double>(nd.clock.phi()) * h_node / h_root - 1.0L) * 1e9L);
    rate[e.node - 1].points.push_back({e.round, t.seconds(), err});
    if (e.node < hops) {
      const double proc = sample_delay(c.delay, proc_rng[e.node]).total;
      send(e.node, e.t + static_cast<std::int64_t>(std::llround(proc)), e.round);
    }
  };

  for (std::int64_t k = 0;; ++k) {
    const std::int64_t t = kFirstRoundNs + k * t_b;
    if (t >= end) break;
    q.push(Event{t, seq++, 0, 0, k, nullptr});
  }
  std::int64_t probe_index = 0;
  for (std::int64_t t = warmup; t < end; t += probe_dt) {
    q.push(Event{t, seq++, 2, 0, probe_index++, nullptr});
  }

  std::vector<ProbeRecord> probes;
  while (!q.empty()) {
    Event e = q.top();
    q.pop();
    if (e.t >= end) continue;
    switch (e.kind) {
      case 0:
        send(0, e.t, e.round);
        break;
      case 1:
        process(e);
        break;
      case 2: {
        ProbeRecord r{TrueTime{e.t}, {}};
        for (std::size_t i = 0; i <= hops; ++i) {
          sync_drift(i, r.probe_true_time);
          r.readings.push_back(nodes[i].clock.read_logical(r.probe_true_time));
        }
        const auto pe = probe_errors(std::span<const ProbeRecord>(&r, 1));
        global.points.push_back({e.round, r.probe_true_time.seconds(), pe.global[0]});
        local.points.push_back({e.round, r.probe_true_time.seconds(), pe.local[0]});
        break;
      }
    }
  }

  std::vector<Series> out{std::move(global), std::move(local)};
  for (auto& s : rate)
    if (!s.points.empty()) out.push_back(std::move(s));
  return out;
}

inline RunReport run_flood(const SimConfig& c) {
  if (c.topology != TopologyKind::line) throw ConfigError("flood run needs topology = line");
  for (const auto& v : c.flood_variants) detail::require_t_shift(c, v, c.spec(v).n_packets, c.granule_ns);
  std::vector<std::vector<Series>> parts(c.flood_variants.size());
  parallel_for(parts.size(), [&](std::size_t i) { parts[i] = run_flood_variant(c, c.flood_variants[i]); });
  std::vector<Series> all;
  for (auto& p : parts)
    for (auto& s : p) all.push_back(std::move(s));
  return make_report(c, std::move(all));
}

}  // namespace skewsync
