#pragma once

// Clock-skew estimators and their variance bounds.
//
// With Gaussian jitter d ~ N(0, sigma^2) on each stamp, every observation
// p[n] = theta_delta + d[v,n] - d[u,n] has variance 2 sigma^2, the sample
// mean is the MLE of theta_delta and attains var = 2 sigma^2 / N. The skew
// estimate divides by the receiver-measured interval tau_hat.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "skewsync/broadcast.hpp"
#include "skewsync/errors.hpp"

namespace skewsync {

struct SkewEstimate {
  double phi_hat_ppb = 0.0;
  double theta_delta_hat_ns = 0.0;
  double tau_hat_ns = 0.0;
  std::size_t n_used = 0;
};

// Plain left-to-right sum divided by N.
inline double mle_theta_delta(std::span<const double> p) {
  if (p.empty()) throw InsufficientData("mle_theta_delta needs at least one observation");
  return std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(p.size());
}

inline SkewEstimate mle_skew(std::span<const double> p, double tau_hat_ns) {
  if (!(tau_hat_ns > 0)) throw OrderingError("tau_hat must be positive (V after U)");
  const double theta = mle_theta_delta(p);
  return SkewEstimate{theta / tau_hat_ns * 1e9, theta, tau_hat_ns, p.size()};
}

inline SkewEstimate mle_skew(const ObservationSet& obs) { return mle_skew(obs.p, obs.tau_hat_ns); }

// Lower bound on var(theta_delta_hat), ns^2.
inline double crlb_theta(double sigma_ns, std::size_t n) {
  if (n == 0) throw DomainError("crlb_theta needs n >= 1");
  if (!(sigma_ns >= 0)) throw DomainError("sigma must be >= 0");
  return 2.0 * sigma_ns * sigma_ns / static_cast<double>(n);
}

// Lower bound on var(phi_hat) as a dimensionless variance: 2 sigma^2 / (N tau^2).
inline double crlb_skew(double sigma_ns, std::size_t n, double tau_ns) {
  if (!(tau_ns > 0)) throw DomainError("crlb_skew needs tau > 0");
  return crlb_theta(sigma_ns, n) / (tau_ns * tau_ns);
}

inline double crlb_skew_std_ppb(double sigma_ns, std::size_t n, double tau_ns) {
  return std::sqrt(crlb_skew(sigma_ns, n, tau_ns)) * 1e9;
}

struct CrlbReport {
  double theta_var_ns2 = 0.0;
  double skew_var = 0.0;        // 2 sigma^2 / (N tau^2)
  double skew_std_ppb = 0.0;
  double skew_var_linear_tau = 0.0;  // 2 sigma^2 / (N tau), ns; dimensionally inconsistent form
};

inline CrlbReport crlb_report(double sigma_ns, std::size_t n, double tau_ns) {
  CrlbReport r;
  r.theta_var_ns2 = crlb_theta(sigma_ns, n);
  r.skew_var = crlb_skew(sigma_ns, n, tau_ns);
  r.skew_std_ppb = std::sqrt(r.skew_var) * 1e9;
  r.skew_var_linear_tau = r.theta_var_ns2 / tau_ns;
  return r;
}

// Single-interval ratio, no averaging and no outlier handling.
inline double direct_estimate(double theta_delta_ns, double tau_ns) {
  if (!(tau_ns > 0)) throw DomainError("direct_estimate needs tau > 0");
  return theta_delta_ns / tau_ns * 1e9;
}

// FIFO table of (local time, offset) points; the skew is the OLS slope.
class RegressionTable {
 public:
  explicit RegressionTable(std::size_t capacity = 8) : capacity_(capacity) {
    if (capacity < 2) throw DomainError("regression table needs capacity >= 2");
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  const std::deque<std::pair<double, double>>& entries() const { return entries_; }

  // Returns the slope in ppb, or nullopt while fewer than 2 points are held.
  std::optional<double> update(double local_time_ns, double offset_ns) {
    if (!entries_.empty() && !(local_time_ns > entries_.back().first))
      throw OrderingError("regression table requires strictly increasing local time");
    if (entries_.size() == capacity_) entries_.pop_front();
    entries_.emplace_back(local_time_ns, offset_ns);
    return slope_ppb();
  }

  std::optional<double> slope_ppb() const {
    if (entries_.size() < 2) return std::nullopt;
    const auto [xm, ym] = means();
    double sxy = 0.0, sxx = 0.0;
    for (const auto& [x, y] : entries_) {
      sxy += (x - xm) * (y - ym);
      sxx += (x - xm) * (x - xm);
    }
    return sxy / sxx * 1e9;
  }

  // Regression-line offset at the given local time.
  std::optional<double> offset_at(double local_time_ns) const {
    const auto slope = slope_ppb();
    if (!slope) return std::nullopt;
    const auto [xm, ym] = means();
    return ym + *slope * 1e-9 * (local_time_ns - xm);
  }

 private:
  std::pair<double, double> means() const {
    double xs = 0.0, ys = 0.0;
    for (const auto& [x, y] : entries_) {
      xs += x;
      ys += y;
    }
    const auto n = static_cast<double>(entries_.size());
    return {xs / n, ys / n};
  }

  std::size_t capacity_;
  std::deque<std::pair<double, double>> entries_;
};

inline std::optional<double> lr_update(RegressionTable& table, double local_time_ns, double offset_ns) {
  return table.update(local_time_ns, offset_ns);
}

using Mat2 = std::array<std::array<double, 2>, 2>;

// Two-state [offset ns, skew ppb] filter. The measurement is the running sum
// of observed offset increments, i.e. the offset relative to the first batch.
struct KalmanState {
  std::array<double, 2> x{0.0, 0.0};
  Mat2 P{{{1e6, 0.0}, {0.0, 1e10}}};
  double q_offset_ns2 = 10.0 * 10.0;
  double q_skew_ppb2 = 5.0 * 5.0;
  double r_ns2 = 2.0 * 72.0 * 72.0 / 5.0;
  double accumulated_ns = 0.0;
};

// Returns the posterior skew in ppb.
inline double kf_update(KalmanState& s, double theta_delta_obs_ns, double tau_ns) {
  if (!(tau_ns > 0)) throw DomainError("kf_update needs tau > 0");
  const double f = tau_ns * 1e-9;  // ns of offset per ppb of skew over tau

  // predict
  s.x[0] += f * s.x[1];
  const Mat2 P = s.P;
  s.P[0][0] = P[0][0] + f * (P[1][0] + P[0][1]) + f * f * P[1][1] + s.q_offset_ns2;
  s.P[0][1] = P[0][1] + f * P[1][1];
  s.P[1][0] = P[1][0] + f * P[1][1];
  s.P[1][1] = P[1][1] + s.q_skew_ppb2;

  s.accumulated_ns += theta_delta_obs_ns;
  if (std::isinf(s.r_ns2)) return s.x[1];

  const double S = s.P[0][0] + s.r_ns2;
  if (!(S > 0)) return s.x[1];  // noiseless and already exact
  const double k0 = s.P[0][0] / S;
  const double k1 = s.P[1][0] / S;
  const double innov = s.accumulated_ns - s.x[0];
  s.x[0] += k0 * innov;
  s.x[1] += k1 * innov;

  // Joseph form: (I - K H) P (I - K H)^T + K R K^T
  const Mat2 Pp = s.P;
  const double a00 = 1.0 - k0, a10 = -k1;
  Mat2 A{{{a00, 0.0}, {a10, 1.0}}};
  Mat2 AP{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) AP[i][j] = A[i][0] * Pp[0][j] + A[i][1] * Pp[1][j];
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      s.P[i][j] = AP[i][0] * A[j][0] + AP[i][1] * A[j][1] +
                  (i == 0 ? k0 : k1) * s.r_ns2 * (j == 0 ? k0 : k1);

  const double off = 0.5 * (s.P[0][1] + s.P[1][0]);
  s.P[0][1] = s.P[1][0] = off;
  const double scale = std::max({std::abs(s.P[0][0]), std::abs(s.P[1][1]), 1.0});
  const double eps = 1e-9 * scale;
  const double det = s.P[0][0] * s.P[1][1] - off * off;
  if (s.P[0][0] < -eps || s.P[1][1] < -eps || det < -eps * scale)
    throw NumericalError("Kalman covariance lost positive semidefiniteness");
  return s.x[1];
}

// Offset estimate from one burst: the smallest observed receiver-minus-sender
// offset, less the assumed fixed delay. Each offset is theta + D_fixed + d[n],
// so the residual is (D_fixed - fixed_delay) + min(d).
inline std::int64_t min_offset_estimate(std::span<const std::int64_t> offsets,
                                        std::int64_t fixed_delay_ns) {
  if (offsets.empty()) throw InsufficientData("offset estimate needs at least one packet");
  return *std::min_element(offsets.begin(), offsets.end()) - fixed_delay_ns;
}

enum class EstimatorKind { mle, lr, direct, kf };

inline std::string_view to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::mle: return "mle";
    case EstimatorKind::lr: return "lr";
    case EstimatorKind::direct: return "direct";
    case EstimatorKind::kf: return "kf";
  }
  return "mle";
}

inline EstimatorKind parse_estimator(std::string_view s) {
  if (s == "mle") return EstimatorKind::mle;
  if (s == "lr") return EstimatorKind::lr;
  if (s == "direct") return EstimatorKind::direct;
  if (s == "kf") return EstimatorKind::kf;
  throw ConfigError("unknown estimator '" + std::string(s) + "' (expected mle|lr|direct|kf)");
}

}  // namespace skewsync
