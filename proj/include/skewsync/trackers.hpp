#pragma once

// Per-receiver estimator state fed one broadcast batch per synchronization
// round. All four estimators consume the same BroadcastBatch type so runs can
// be compared on identical delay streams.

#include <cstdint>
#include <deque>
#include <numeric>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "skewsync/broadcast.hpp"
#include "skewsync/estimators.hpp"
#include "skewsync/skewpipe.hpp"

namespace skewsync {

struct TrackerConfig {
  EstimatorKind kind = EstimatorKind::mle;
  std::size_t window = 2;  // MLE pages, LR table size, KF variance window
  std::int64_t t_b_ns = 200 * kNsPerSecond;
  PipelineOptions pipeline{};
  double kf_q_offset_ns2 = 10.0 * 10.0;
  double kf_q_skew_ppb2 = 5.0 * 5.0;
  double sigma_prior_ns = 72.0;  // KF measurement noise before any batch variance is known
  std::int64_t granule_ns = 1;   // receiver clock granule, for the KF quantization floor
};

namespace detail {

inline double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double mean_receiver_stamp(const BroadcastBatch& b) {
  long double s = 0.0L;
  for (const auto& st : b.stamps) s += static_cast<long double>(st.receiver);
  return static_cast<double>(s / static_cast<long double>(b.size()));
}

}  // namespace detail

class MleTracker {
 public:
  explicit MleTracker(const TrackerConfig& c) : pipe_(c.window, c.t_b_ns, c.pipeline) {}
  std::optional<double> on_batch(BroadcastBatch b) {
    const auto e = pipe_.on_batch(std::move(b));
    if (!e) return std::nullopt;
    return e->phi_hat_ppb;
  }
  const MlePipeline& pipeline() const { return pipe_; }

 private:
  MlePipeline pipe_;
};

// Offset per round is the plain mean of that batch's observations.
class LrTracker {
 public:
  explicit LrTracker(const TrackerConfig& c) : table_(c.window) {}
  std::optional<double> on_batch(const BroadcastBatch& b) {
    const double offset = detail::mean_of(observations(b));
    return table_.update(detail::mean_receiver_stamp(b), offset);
  }
  const RegressionTable& table() const { return table_; }

 private:
  RegressionTable table_;
};

class DirectTracker {
 public:
  explicit DirectTracker(const TrackerConfig&) {}
  std::optional<double> on_batch(BroadcastBatch b) {
    std::optional<double> out;
    if (prev_) {
      const ObservationSet o = pair_observations(*prev_, b);
      out = direct_estimate(mle_theta_delta(o.p), o.tau_hat_ns);
    }
    prev_ = std::move(b);
    return out;
  }

 private:
  std::optional<BroadcastBatch> prev_;
};

// Measurement noise R = 2 sigma_hat^2 / N + g^2 / 6, with sigma_hat^2 pooled
// from the raw within-batch spread of the last `window` batches. A batch hit
// by an uncertain delay inflates R instead of being filtered. The g^2 / 6
// term is the quantization variance of one stamp pair; it does not shrink
// with N because the quantization phase repeats across packets whenever the
// packet gap is a multiple of the granule.
class KfTracker {
 public:
  explicit KfTracker(const TrackerConfig& c) : cfg_(c) {
    state_.q_offset_ns2 = c.kf_q_offset_ns2;
    state_.q_skew_ppb2 = c.kf_q_skew_ppb2;
  }

  std::optional<double> on_batch(BroadcastBatch b) {
    record_spread(b);
    std::optional<double> out;
    if (prev_) {
      const ObservationSet o = pair_observations(*prev_, b);
      const double sigma2 = pooled_variance();
      const double g = static_cast<double>(cfg_.granule_ns);
      state_.r_ns2 = 2.0 * sigma2 / static_cast<double>(b.size()) + g * g / 6.0;
      out = kf_update(state_, mle_theta_delta(o.p), o.tau_hat_ns);
    }
    prev_ = std::move(b);
    return out;
  }

  const KalmanState& state() const { return state_; }

 private:
  void record_spread(const BroadcastBatch& b) {
    if (b.size() < 2) return;
    const std::vector<double> obs = observations(b);
    const double m = detail::mean_of(obs);
    double ss = 0.0;
    for (double v : obs) ss += (v - m) * (v - m);
    spreads_.push_back(ss / static_cast<double>(obs.size() - 1));
    if (spreads_.size() > cfg_.window) spreads_.pop_front();
  }

  double pooled_variance() const {
    if (spreads_.empty()) return cfg_.sigma_prior_ns * cfg_.sigma_prior_ns;
    return std::accumulate(spreads_.begin(), spreads_.end(), 0.0) / static_cast<double>(spreads_.size());
  }

  TrackerConfig cfg_;
  KalmanState state_;
  std::optional<BroadcastBatch> prev_;
  std::deque<double> spreads_;
};

class SkewTracker {
 public:
  explicit SkewTracker(const TrackerConfig& c) : impl_(make(c)) {}

  std::optional<double> on_batch(BroadcastBatch b) {
    return std::visit([&](auto& t) { return t.on_batch(std::move(b)); }, impl_);
  }

 private:
  using Impl = std::variant<MleTracker, LrTracker, DirectTracker, KfTracker>;
  static Impl make(const TrackerConfig& c) {
    switch (c.kind) {
      case EstimatorKind::mle: return MleTracker{c};
      case EstimatorKind::lr: return LrTracker{c};
      case EstimatorKind::direct: return DirectTracker{c};
      case EstimatorKind::kf: return KfTracker{c};
    }
    return MleTracker{c};
  }
  Impl impl_;
};

}  // namespace skewsync
