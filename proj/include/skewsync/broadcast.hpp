#pragma once

// Multiple one-way broadcast: a sender fires N packets back to back, both
// ends timestamp each packet, and two such bursts U and V taken some
// interval apart yield the offset-increment observations
//
//   p[n] = v[n] - u[n],  u[n] = T_sender[u,n] - T_receiver[u,n]
//
// Observations are sender stamp minus receiver stamp, literally. The fixed
// delay therefore enters u and v with a negative sign; it cancels in p.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "skewsync/delay_model.hpp"
#include "skewsync/errors.hpp"
#include "skewsync/rng.hpp"
#include "skewsync/timebase.hpp"

namespace skewsync {

inline constexpr std::int64_t kDefaultIntraGapNs = 100'000;

struct StampPair {
  std::int64_t sender = 0;
  std::int64_t receiver = 0;
};

struct BroadcastBatch {
  int sender_id = 0;
  int receiver_id = 0;
  std::vector<StampPair> stamps;
  std::vector<DelaySample> delays;  // ground truth, one per packet
  std::int64_t t_shift_ns = 0;
  TrueTime batch_true_time{};
  // Ground truth (sender clock - receiver raw hardware) at the first packet.
  long double true_offset_ns = 0.0L;

  std::size_t size() const { return stamps.size(); }
};

struct ObservationSet {
  std::vector<double> p;
  double tau_hat_ns = 0.0;
  long double theta_u_ns = 0.0L;      // ground truth
  long double theta_delta_ns = 0.0L;  // ground truth
};

enum class SenderStamp { hardware, logical };

struct BatchOptions {
  SenderStamp sender_stamp = SenderStamp::hardware;
  int sender_id = 0;
  int receiver_id = 1;
  // Forces an extra uncertain delay onto one packet (no extra random draws).
  std::optional<std::size_t> inject_index;
  double inject_ns = 0.0;
};

inline BroadcastBatch run_batch(const SimClock& sender, const SimClock& receiver,
                                std::size_t n_packets, std::int64_t intra_gap_ns,
                                const DelayModel& delay, TrueTime t0, Rng& rng,
                                const BatchOptions& opt = {}) {
  if (n_packets < 1) throw DomainError("a batch needs at least one packet");
  if (intra_gap_ns <= 0) throw DomainError("intra-batch gap must be positive");

  BroadcastBatch b;
  b.sender_id = opt.sender_id;
  b.receiver_id = opt.receiver_id;
  b.batch_true_time = t0;
  b.t_shift_ns = static_cast<std::int64_t>(n_packets - 1) * intra_gap_ns;
  b.stamps.reserve(n_packets);
  b.delays.reserve(n_packets);

  const bool logical = opt.sender_stamp == SenderStamp::logical;
  b.true_offset_ns = (logical ? sender.logical_exact(t0) : sender.raw_hardware(t0)) -
                     receiver.raw_hardware(t0);

  for (std::size_t n = 0; n < n_packets; ++n) {
    const TrueTime sent = t0 + static_cast<std::int64_t>(n) * intra_gap_ns;
    DelaySample d = sample_delay(delay, rng);
    if (opt.inject_index && *opt.inject_index == n) {
      d.uncertain += opt.inject_ns;
      d.total += opt.inject_ns;
    }
    const TrueTime received = sent + static_cast<std::int64_t>(std::llround(d.total));
    b.stamps.push_back({logical ? sender.read_logical(sent) : sender.read_hardware(sent),
                        receiver.read_hardware(received)});
    b.delays.push_back(d);
  }
  return b;
}

// Largest burst duration for which the offset drift across the burst stays
// under one granule: 1 / (skew * f_s).
inline double t_shift_limit_ns(double skew_bound_ppb, double f_s_hz) {
  if (!(f_s_hz > 0)) throw DomainError("nominal frequency must be positive");
  const double skew = std::abs(skew_bound_ppb) * 1e-9;
  if (skew == 0.0) return std::numeric_limits<double>::infinity();
  return 1e9 / (skew * f_s_hz);
}

inline bool check_t_shift(std::int64_t t_shift_ns, double skew_bound_ppb, double f_s_hz) {
  return static_cast<double>(t_shift_ns) < t_shift_limit_ns(skew_bound_ppb, f_s_hz);
}

inline bool check_t_shift(const BroadcastBatch& b, double skew_bound_ppb, double f_s_hz) {
  return check_t_shift(b.t_shift_ns, skew_bound_ppb, f_s_hz);
}

inline std::vector<double> observations(const BroadcastBatch& b) {
  std::vector<double> out;
  out.reserve(b.size());
  for (const auto& s : b.stamps) out.push_back(static_cast<double>(s.sender - s.receiver));
  return out;
}

namespace detail {

inline double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

// tau_hat is the median over packets of the receiver-clock elapsed time, so
// a single packet straddling a granule boundary does not move it.
inline ObservationSet pair_observations(const BroadcastBatch& u, const BroadcastBatch& v) {
  if (u.size() != v.size() || u.size() == 0)
    throw ProtocolError("paired batches must carry the same non-zero packet count");
  if (!(v.batch_true_time > u.batch_true_time))
    throw OrderingError("batch V must be later than batch U");

  ObservationSet o;
  o.p.reserve(u.size());
  std::vector<double> elapsed;
  elapsed.reserve(u.size());
  for (std::size_t n = 0; n < u.size(); ++n) {
    const std::int64_t un = u.stamps[n].sender - u.stamps[n].receiver;
    const std::int64_t vn = v.stamps[n].sender - v.stamps[n].receiver;
    o.p.push_back(static_cast<double>(vn - un));
    elapsed.push_back(static_cast<double>(v.stamps[n].receiver - u.stamps[n].receiver));
  }
  o.tau_hat_ns = detail::median(std::move(elapsed));
  o.theta_u_ns = u.true_offset_ns;
  o.theta_delta_ns = v.true_offset_ns - u.true_offset_ns;
  return o;
}

}  // namespace skewsync
