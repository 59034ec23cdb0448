#pragma once

// MLE pipeline: a FIFO of W pages of timestamp batches, a sliding window
// that grows from 2 to W pages, and a sort + 3-sigma detector that strips
// uncertain delays from the observations before averaging.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "skewsync/broadcast.hpp"
#include "skewsync/errors.hpp"
#include "skewsync/estimators.hpp"

namespace skewsync {

class FifoPages {
 public:
  FifoPages(std::size_t w_max, std::int64_t t_b_ns) : w_max_(w_max), t_b_ns_(t_b_ns) {
    if (w_max < 2) throw ConfigError("sliding window length W must be >= 2");
    if (t_b_ns <= 0) throw ConfigError("synchronization period must be positive");
  }

  std::size_t w_max() const { return w_max_; }
  std::int64_t t_b_ns() const { return t_b_ns_; }
  std::size_t size() const { return pages_.size(); }
  bool empty() const { return pages_.empty(); }

  // Page 1 is the newest.
  const BroadcastBatch& page(std::size_t one_based) const { return pages_.at(one_based - 1); }

  void push_batch(BroadcastBatch b) {
    if (!pages_.empty() && !(b.batch_true_time > pages_.front().batch_true_time))
      throw OrderingError("batch is not newer than page 1");
    if (pages_.size() == w_max_) pages_.pop_back();
    pages_.push_front(std::move(b));
  }

  // Current window length: 2, 3, ..., W as pages accumulate.
  std::size_t window() const { return pages_.size(); }

  // Nominal tau of the current window, (window - 1) * T_b.
  std::int64_t effective_tau_ns() const {
    return pages_.size() < 2 ? 0 : static_cast<std::int64_t>(pages_.size() - 1) * t_b_ns_;
  }

 private:
  std::size_t w_max_;
  std::int64_t t_b_ns_;
  std::deque<BroadcastBatch> pages_;
};

struct WindowPair {
  const BroadcastBatch* newest = nullptr;
  const BroadcastBatch* oldest = nullptr;
};

inline std::optional<WindowPair> window_pair(const FifoPages& fifo) {
  if (fifo.size() < 2) return std::nullopt;
  return WindowPair{&fifo.page(1), &fifo.page(fifo.window())};
}

struct PreprocessReport {
  std::vector<double> kept;     // ascending
  std::vector<double> removed;  // ascending, always the top of the sorted input
  double sigma_hat = 0.0;
};

inline constexpr std::size_t kMinPreprocessN = 4;

// Sort ascending, then for k = floor(N/2)+1 .. N compare the k-th value with
// the mean and sample std of the k-1 values below it. The first value more
// than 3 sigma above flags itself and everything larger.
inline PreprocessReport preprocess(std::span<const double> p) {
  if (p.size() < kMinPreprocessN)
    throw InsufficientData("3-sigma preprocessing needs at least 4 observations");
  std::vector<double> s(p.begin(), p.end());
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();

  PreprocessReport r;
  std::size_t cut = n;
  for (std::size_t k = n / 2 + 1; k <= n; ++k) {
    const std::size_t m = k - 1;
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) sum += s[i];
    const double mean = sum / static_cast<double>(m);
    double ss = 0.0;
    for (std::size_t i = 0; i < m; ++i) ss += (s[i] - mean) * (s[i] - mean);
    const double sigma = std::sqrt(ss / static_cast<double>(m - 1));
    r.sigma_hat = sigma;
    if (s[k - 1] - mean > 3.0 * sigma) {
      cut = k - 1;
      break;
    }
  }
  r.kept.assign(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(cut));
  r.removed.assign(s.begin() + static_cast<std::ptrdiff_t>(cut), s.end());
  return r;
}

// Observations are sender-minus-receiver, so an uncertain delay on a packet
// of the newer batch pushes p down and one on the older batch pushes p up.
// The detector only scans the upper tail, so it runs on -p first and then on
// the survivors in their original orientation.
inline std::vector<double> strip_uncertain(std::span<const double> p) {
  std::vector<double> neg(p.size());
  std::transform(p.begin(), p.end(), neg.begin(), [](double v) { return -v; });
  PreprocessReport first = preprocess(neg);
  std::vector<double> back(first.kept.size());
  std::transform(first.kept.begin(), first.kept.end(), back.begin(), [](double v) { return -v; });
  if (back.size() < kMinPreprocessN) return back;
  return preprocess(back).kept;
}

struct PipelineOptions {
  bool preprocessing = true;
  std::size_t min_preprocess_n = kMinPreprocessN;
};

inline std::optional<SkewEstimate> estimate(const FifoPages& fifo, const PipelineOptions& opt = {}) {
  const auto pair = window_pair(fifo);
  if (!pair) return std::nullopt;
  ObservationSet obs = pair_observations(*pair->oldest, *pair->newest);
  std::vector<double> p = std::move(obs.p);
  if (opt.preprocessing && p.size() >= std::max(opt.min_preprocess_n, kMinPreprocessN))
    p = strip_uncertain(p);
  if (p.empty()) throw DegenerateBatch("preprocessing removed every observation");
  return mle_skew(p, obs.tau_hat_ns);
}

// FIFO plus the hold-last-good-estimate policy used by a deployed node.
class MlePipeline {
 public:
  MlePipeline(std::size_t w_max, std::int64_t t_b_ns, PipelineOptions opt = {})
      : fifo_(w_max, t_b_ns), opt_(opt) {}

  std::optional<SkewEstimate> on_batch(BroadcastBatch b) {
    fifo_.push_batch(std::move(b));
    try {
      if (auto e = estimate(fifo_, opt_)) last_ = e;
    } catch (const DegenerateBatch&) {
      ++degenerate_;
    }
    return last_;
  }

  const FifoPages& fifo() const { return fifo_; }
  const std::optional<SkewEstimate>& last() const { return last_; }
  std::size_t degenerate_count() const { return degenerate_; }

 private:
  FifoPages fifo_;
  PipelineOptions opt_;
  std::optional<SkewEstimate> last_;
  std::size_t degenerate_ = 0;
};

}  // namespace skewsync
